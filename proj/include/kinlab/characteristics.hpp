#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/phase_geometry.hpp"

namespace kinlab {

/// (t, x, v) in phase space-time. t may be +infinity for exit queries.
struct PhasePoint {
  double t = 0.0;
  Vec2 x;
  Vec2 v;
};

struct TrajectorySample {
  double s = 0.0;
  Vec2 x;
  Vec2 v;
};

struct Trajectory {
  PhasePoint anchor;
  std::vector<TrajectorySample> samples;  // from anchor.t to the target time
};

/// Classical RK4 with equal steps of size <= dt landing exactly on s_target.
/// E is extended outside the box by its value at the nearest point of the
/// box. Throws ValidationError for dt <= 0, NumericalError past max_steps.
Trajectory integrate_trajectory(const FieldSpec& E, const Box& domain, const PhasePoint& anchor,
                                double s_target, double dt,
                                std::size_t max_steps = 50'000'000);

struct ExitOptions {
  double dt = 1e-3;
  double horizon_cap = 1e4;  // used when anchor.t is larger
  std::size_t max_steps = 50'000'000;
};

struct ExitRecord {
  bool never = false;
  double t_minus = std::numeric_limits<double>::infinity();
  Vec2 x_minus;
  Vec2 v_minus;
  Vec2 normal;  // outward unit normal of the face hit
  double n_dot_v = 0.0;
};

/// Follows the characteristic backwards from the anchor until it leaves the
/// box; the crossing is bisected to near machine precision. Reports "never"
/// when the backward path reaches time 0 (or the horizon cap) inside.
ExitRecord backward_exit(const FieldSpec& E, const Box& domain, const PhasePoint& anchor,
                         const ExitOptions& options = {});

/// Value of the exact solution at the anchor: inflow or initial datum carried
/// along the characteristic with attenuation exp(-int q) plus the attenuated
/// source integral.
double characteristic_oracle(const FieldSpec& E, const FieldSpec& q, const FieldSpec& S,
                             const FieldSpec& g, const FieldSpec& h, const Box& domain,
                             const PhasePoint& anchor, const ExitOptions& options = {});

/// |n(x_-) . v_-|; throws ValidationError when the exit is "never".
double singularity_diagnostic(const FieldSpec& E, const Box& domain, const PhasePoint& anchor,
                              const ExitOptions& options = {});

}  // namespace kinlab
