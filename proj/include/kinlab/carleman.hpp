#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/manufactured.hpp"
#include "kinlab/phase_geometry.hpp"

namespace kinlab {

/// phi(t, x, v) = -beta t + x1 v1 on the velocity slab
/// V = {a <= v1^2 <= b, v1 > 0}, with v2 truncated to [v2_lo, v2_hi].
struct CarlemanWeight {
  double beta = 0.5;
  double a = 1.0;
  double b = 4.0;
  double d = 0.5;
  double delta = 1.4142135623730951;
  double m = 0.0;
  double v2_lo = -1.0;
  double v2_hi = 1.0;

  double phi0(Vec2 x, Vec2 v) const { return x.x * v.x; }
  double phi(double t, Vec2 x, Vec2 v) const { return -beta * t + phi0(x, v); }
  /// -beta + v.grad_x phi0 + E.grad_v phi0 = -beta + v1^2 + E1 x1.
  double psi(const FieldSpec& E, Vec2 x, Vec2 v) const;
  double v1_lo() const;
  double v1_hi() const;
  Box velocity_box() const;
};

/// Checks 0 < a < b, beta > 0, d > 0, delta > 0, m >= 0 and
/// beta + 2 delta m < a; throws ValidationError naming the failed inequality.
CarlemanWeight canonical_weight(double beta, double a, double b, double d, double delta, double m,
                                double v2_lo = -1.0, double v2_hi = 1.0);

struct HypothesisOptions {
  int samples_per_axis = 33;
  int refinement_sweeps = 3;
  double curl_tolerance = 1e-6;
};

struct HypothesisReport {
  double T = 0.0;
  double R = 0.0, r = 0.0;
  double T_min = 0.0;
  double epsilon = 0.0, alpha0 = 0.0, alpha1 = 0.0;
  double gamma0 = 0.0, M0 = 0.0, M1 = 0.0;
  double curl_max = 0.0;
  bool conservative_field = false;
  double potential_residual = 0.0;  // max |E + grad b| for the reconstructed b
  // geometric conditions of the canonical construction
  bool domain_offset_ok = false;  // x1 >= d on the closed box
  bool diameter_ok = false;       // diam <= delta
  bool force_bound_ok = false;    // ||E||_C1 <= m
  bool item1 = false, item2 = false, item3 = false, item4 = false;

  bool items_pass() const { return item1 && item2 && item3 && item4; }
  /// Description of the first failed item, empty when all four pass.
  std::string first_failure() const;
};

HypothesisReport validate_hypothesis(const CarlemanWeight& weight, const Box& domain,
                                     const FieldSpec& E, double T,
                                     const HypothesisOptions& options = {});

struct CarlemanQuadrature {
  int uniform_cells = 8;   // per graded axis before grading
  int graded_levels = 12;  // geometric halvings toward the peak end
  int flat_cells = 4;      // x2 and v2 axes
  double c0_floor = 1e-6;
  double support_tolerance = 1e-12;
};

struct CarlemanSample {
  double s = 0.0;
  double c0 = 0.0;
  // every term carries the factor e^{-2 s R}
  double initial = 0.0;   // s int Psi |u(0)|^2 e^{2 s phi(0)}
  double bulk = 0.0;      // int int |u|^2 e^{2 s phi}
  double final = 0.0;     // s int Psi |u(T)|^2 e^{2 s phi(T)}
  double outflow = 0.0;   // s int int_{Gamma_+} Psi |u|^2 e^{2 s phi}
  double inflow = 0.0;    // s int int_{Gamma_-} Psi |u|^2 e^{2 s phi}
  double forcing = 0.0;   // 2 int int |P u|^2 e^{2 s phi}
  double lhs = 0.0;
  double rhs = 0.0;
  bool hold = false;
};

struct CarlemanReport {
  std::string function;
  std::vector<CarlemanSample> samples;
  std::optional<double> s_star;  // least s after which every tested s holds
};

/// Both sides of the weighted inequality for a closed-form u on
/// [0, T] x domain x V. gamma0 and M1 come from validate_hypothesis.
/// Throws ValidationError when u leaks outside V in velocity.
CarlemanReport carleman_residual(const PhaseFunction& u, const CarlemanWeight& weight,
                                 const Box& domain, const FieldSpec& E, const FieldSpec& q,
                                 double T, double gamma0, double M1,
                                 std::span<const double> s_list,
                                 const CarlemanQuadrature& quadrature = {});

struct WeightedOperatorValue {
  double lw = 0.0;        // e^{s phi} P0(e^{-s phi} u) by central differences
  double p0u = 0.0;       // P0 u by central differences
  double identity = 0.0;  // p0u - s Psi u
};

WeightedOperatorValue weighted_operator_apply(const PhaseFunction& u, const CarlemanWeight& weight,
                                              const FieldSpec& E, double s, double t, Vec2 x,
                                              Vec2 v, double step = 1e-5);

}  // namespace kinlab
