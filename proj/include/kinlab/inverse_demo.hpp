#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/phase_geometry.hpp"
#include "kinlab/transport_solver.hpp"

namespace kinlab {

/// Recover one per-cell coefficient from d_t u on Gamma_+.
///   absorption role: q = m, S from the template
///   source role:     S = S0 * m with S0 = template S, q from the template
/// Data rows are levels 1..N of the template's time grid, columns the
/// outgoing facets in enumeration order.
struct InverseProblem {
  Problem forward;
  CoefficientRole role = CoefficientRole::Source;
  TraceMatrix data;
  double lambda = -1.0;  // negative selects 1e-6 * ||data||^2
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;  // relative to the first gradient norm
  double misfit_tolerance = 0.0;
  std::vector<char> velocity_mask;  // one flag per velocity cell; empty = all free
};

/// Weighted inner product sum_k dt_{k-1} sum_f sigma_f a b over two traces.
double measurement_inner(const InverseProblem& problem, const TraceMatrix& a, const TraceMatrix& b);

/// d_t u on Gamma_+ for coefficient m (rows = levels 1..N).
TraceMatrix forward_measurement(const InverseProblem& problem, std::span<const double> m);

/// Data shaped like forward_measurement, i.e. the synthetic measurement for m.
TraceMatrix synthetic_data(const Problem& forward, CoefficientRole role, std::span<const double> m);

double effective_lambda(const InverseProblem& problem);

/// 1/2 ||d_t u(m) - data||^2 + 1/2 lambda sum vol m^2.
double misfit(const InverseProblem& problem, std::span<const double> m);

struct GradientResult {
  double misfit = 0.0;
  std::vector<double> gradient;  // with respect to the cell values of m
};

/// Discrete adjoint: reverse march of the transposed Euler step.
GradientResult adjoint_gradient(const InverseProblem& problem, std::span<const double> m);

/// Jacobian of the measurement at m applied to dm.
TraceMatrix linearized_measurement(const InverseProblem& problem, std::span<const double> m,
                                   std::span<const double> dm);
/// Transpose of linearized_measurement in the weighted data inner product
/// and the plain cell inner product.
std::vector<double> adjoint_apply(const InverseProblem& problem, std::span<const double> m,
                                  const TraceMatrix& y);

struct ReconstructionResult {
  std::vector<double> coefficient;
  std::vector<double> misfit_history;  // entry 0 is the initial misfit
  std::vector<double> gradient_history;
  std::optional<double> relative_error;  // vs truth, L2 over cells
  int iterations = 0;
  double lambda = 0.0;
  const char* stop_reason = "budget";
};

/// Gradient descent with Armijo backtracking (constant 1e-4, halving).
ReconstructionResult reconstruct(const InverseProblem& problem, std::span<const double> initial,
                                 std::span<const double> truth = {});

}  // namespace kinlab
