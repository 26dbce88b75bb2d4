#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/phase_geometry.hpp"

namespace kinlab {

struct Problem {
  PhaseGrid grid;
  FieldSpec E = FieldSpec::zero(Arity::VectorX);
  FieldSpec q = FieldSpec::zero(Arity::ScalarXV);
  FieldSpec S = FieldSpec::zero(Arity::ScalarTXV);
  FieldSpec g = FieldSpec::zero(Arity::ScalarXV);
  FieldSpec h = FieldSpec::zero(Arity::ScalarTXV);
  double T = 0.5;
  double cfl = 1.2;
};

/// min(dx, dy) / (cfl * v_max).
double cfl_dt(const PhaseGrid& grid, double cfl, double v_max);

/// Speed bound the solver feeds to cfl_dt: max|vx| + max|vy| over the box.
double solver_speed_bound(const PhaseGrid& grid);

/// Time levels 0 = t_0 < ... < t_N = T with uniform steps except a shortened
/// last one.
std::vector<double> time_levels(double T, double dt);

/// Donor-cell upwind discretization of v.grad_x + E.grad_v + q with the
/// coefficients frozen on the grid. Writing the Euler update as
///   u_new = u - dt * (A u + q u - S - b(t))
/// A is the homogeneous advection operator and b(t) collects inflow ghosts.
class TransportOperator {
 public:
  TransportOperator(const PhaseGrid& grid, const FieldSpec& E, const FieldSpec& q);

  const PhaseGrid& grid() const { return grid_; }
  std::span<const double> absorption() const { return q_; }
  /// Largest dt * (|vx|/dx + |vy|/dy + |E1|/dvx + |E2|/dvy) over cells, per unit dt.
  double cfl_rate() const { return cfl_rate_; }

  /// out = A u (zero ghosts).
  void apply(std::span<const double> u, std::span<double> out) const;
  /// out = A^T w.
  void apply_transpose(std::span<const double> w, std::span<double> out) const;
  /// out += b(t): inflow ghost contributions from h at time t.
  void add_inflow(const FieldSpec& h, double t, std::span<double> out) const;

  /// Full Euler step u_new = u - dt (A u + q u - S - b) in one pass.
  /// `source` may be empty for S = 0; `ghosts` holds h on the incoming facets.
  void euler_step(std::span<const double> u, std::span<const double> source,
                  std::span<const double> ghosts, double dt, std::span<double> out) const;

  const std::vector<BoundaryFacet>& incoming() const { return incoming_; }
  const std::vector<BoundaryFacet>& outgoing() const { return outgoing_; }
  /// h sampled on the incoming facets at time t.
  void inflow_values(const FieldSpec& h, double t, std::span<double> out) const;

 private:
  PhaseGrid grid_;
  std::vector<Vec2> e_;     // per spatial cell
  std::vector<double> q_;   // per phase cell
  std::vector<double> diag_;  // |vx|/dx + |vy|/dy + |E1|/dvx + |E2|/dvy per phase cell
  std::vector<BoundaryFacet> incoming_;
  std::vector<BoundaryFacet> outgoing_;
  // ghost slot for each spatial face facet, -1 when outgoing/glancing
  std::vector<int> ghost_xlo_, ghost_xhi_, ghost_ylo_, ghost_yhi_;
  double cfl_rate_ = 0.0;
};

/// Diagnostics of one time level, used by the energy and Green checks.
struct LevelDiagnostics {
  double time = 0.0;
  double norm_sq = 0.0;      // ||u||^2 over the phase box
  double plus_flux = 0.0;    // sum over Gamma_+ of sigma |u|^2
  double minus_flux = 0.0;   // sum over Gamma_- of sigma |h|^2
  double forcing_dot = 0.0;  // integral of (S - q u) u
  double source_sq = 0.0;    // ||S||^2
};

struct SolverOptions {
  bool record_traces = true;
  std::size_t trace_stride = 1;   // record every k-th level (plus the final one)
  std::size_t snapshot_stride = 0;  // 0 disables interior snapshots
  bool diagnostics = true;
};

/// Forward Euler march of the kinetic equation, one step per advance().
class TransportSolver {
 public:
  explicit TransportSolver(const Problem& problem);

  const Problem& problem() const { return problem_; }
  const TransportOperator& op() const { return op_; }
  double dt() const { return dt_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t total_steps() const { return times_.size() - 1; }
  std::size_t step_index() const { return n_; }
  double time() const { return times_[n_]; }
  bool done() const { return n_ + 1 >= times_.size(); }

  /// Throws NumericalError on non-finite state, naming the step.
  void advance();

  std::span<const double> state() const { return u_; }
  std::span<const double> previous() const { return prev_; }
  /// u on Gamma_+ (adjacent interior cells) at the current level.
  void outgoing_trace(std::span<double> out) const;
  /// (u^n - u^{n-1}) / dt_{n-1} on Gamma_+; NaN at level 0.
  void outgoing_dudt(std::span<double> out) const;
  /// h on Gamma_- at the current level.
  void incoming_trace(std::span<double> out) const;
  void incoming_dudt(std::span<double> out) const;

  LevelDiagnostics level_diagnostics() const;

 private:
  void fill_source(double t);

  Problem problem_;
  TransportOperator op_;
  double dt_ = 0.0;
  std::vector<double> times_;
  std::size_t n_ = 0;
  std::vector<double> u_, prev_, next_;
  std::vector<double> source_;
  bool source_static_ = false;
  std::vector<double> ghosts_;
};

/// One Euler step from `u` at time t (builds the operator on every call).
std::vector<double> step(std::span<const double> u, const Problem& problem, double t, double dt);

struct SolutionRecord {
  PhaseGrid grid;
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<double> times;
  std::vector<BoundaryFacet> outgoing;
  std::vector<BoundaryFacet> incoming;
  std::vector<std::size_t> trace_levels;
  TraceMatrix outgoing_u, outgoing_dudt;
  TraceMatrix incoming_u, incoming_dudt;
  std::vector<std::pair<std::size_t, std::vector<double>>> snapshots;
  std::vector<double> initial_state;
  std::vector<double> final_state;
  std::vector<LevelDiagnostics> diagnostics;  // one per level
};

SolutionRecord solve(const Problem& problem, const SolverOptions& options = {});

/// Time weights dt_{k-1} for levels k >= 1 (0 at level 0), matching the
/// backward-difference dudt, restricted to `levels`.
std::vector<double> dudt_weights(const std::vector<double>& times,
                                 const std::vector<std::size_t>& levels);

/// FNV-1a digest of the raw bytes of a state vector.
std::uint64_t state_checksum(std::span<const double> u);

}  // namespace kinlab
