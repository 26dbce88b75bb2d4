#include "kinlab/inverse_demo.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

namespace {

/// Pieces of the forward march shared by the state, tangent and adjoint sweeps.
/// The operator carries no absorption; q u enters through the source slot.
struct March {
  const Problem& p;
  CoefficientRole role;
  TransportOperator op;
  std::vector<double> times;
  std::vector<std::size_t> adj;
  std::vector<double> sigma;
  std::vector<double> q0;
  std::vector<double> s0;
  bool s0_static = true;

  March(const Problem& problem, CoefficientRole r)
      : p(problem), role(r), op(problem.grid, problem.E, FieldSpec::zero(Arity::ScalarXV)) {
    const double dt = cfl_dt(p.grid, p.cfl, solver_speed_bound(p.grid));
    if (dt * op.cfl_rate() > 1.0 + 1e-12)
      throw NumericalError(fmt::format("CFL violation: rate {:.6g} > 1", dt * op.cfl_rate()));
    times = time_levels(p.T, dt);
    for (const auto& f : op.outgoing()) {
      adj.push_back(adjacent_cell(p.grid, f));
      sigma.push_back(f.sigma_weight);
    }
    q0 = sample_cells(p.q, p.grid);
    s0_static = !p.S.depends_on_time();
    s0 = sample_cells(p.S, p.grid, 0.0);
  }

  std::size_t steps() const { return times.size() - 1; }
  std::size_t cells() const { return p.grid.cell_count(); }
  const std::vector<double>& source_at(std::size_t n) {
    if (!s0_static) s0 = sample_cells(p.S, p.grid, times[n]);
    return s0;
  }
  const double* absorption(std::span<const double> m) const {
    return role == CoefficientRole::Absorption ? m.data() : q0.data();
  }

  /// Forward march; fills the measurement and, when asked, the states u^0..u^{N-1}.
  TraceMatrix run(std::span<const double> m, std::vector<std::vector<double>>* states) {
    const std::size_t nc = cells();
    if (m.size() != nc)
      throw ValidationError(fmt::format("coefficient has {} values, grid has {} cells", m.size(), nc));
    std::vector<double> u = sample_cells(p.g, p.grid), next(nc), src(nc), ghosts(op.incoming().size());
    TraceMatrix d(0, adj.size());
    std::vector<double> row(adj.size());
    const double* q = absorption(m);
    for (std::size_t n = 0; n < steps(); ++n) {
      const double h = times[n + 1] - times[n];
      op.inflow_values(p.h, times[n], ghosts);
      const auto& s = source_at(n);
      for (std::size_t c = 0; c < nc; ++c)
        src[c] = (role == CoefficientRole::Source ? s[c] * m[c] : s[c]) - q[c] * u[c];
      op.euler_step(u, src, ghosts, h, next);
      for (std::size_t c = 0; c < nc; ++c)
        if (!std::isfinite(next[c]))
          throw NumericalError(fmt::format("non-finite state at step {} of the inverse forward run", n + 1));
      for (std::size_t f = 0; f < adj.size(); ++f) row[f] = (next[adj[f]] - u[adj[f]]) / h;
      d.append_row(row);
      if (states) states->push_back(u);
      std::swap(u, next);
    }
    return d;
  }

  /// Reverse march for sum_k <W_k r^k, d^k(m)> linearized in m, where
  /// r^k = residual(k). Returns the gradient with respect to m.
  template <class Residual>
  std::vector<double> reverse(std::span<const double> m, const std::vector<std::vector<double>>& states,
                              Residual residual) {
    const std::size_t nc = cells();
    std::vector<double> ubar(nc, 0.0), lam(nc), tmp(nc), grad(nc, 0.0);
    const double* q = absorption(m);
    for (std::size_t n = steps(); n-- > 0;) {
      const double h = times[n + 1] - times[n];
      const auto r = residual(n);  // row for level n + 1
      lam = ubar;
      for (std::size_t f = 0; f < adj.size(); ++f) lam[adj[f]] += sigma[f] * r[f];
      if (role == CoefficientRole::Source) {
        const auto& s = source_at(n);
        for (std::size_t c = 0; c < nc; ++c) grad[c] += h * s[c] * lam[c];
      } else {
        const auto& u = states[n];
        for (std::size_t c = 0; c < nc; ++c) grad[c] -= h * u[c] * lam[c];
      }
      op.apply_transpose(lam, tmp);
      for (std::size_t c = 0; c < nc; ++c) ubar[c] -= h * (tmp[c] + q[c] * lam[c]);
    }
    return grad;
  }
};

void check_shape(const InverseProblem& pr, const March& mk) {
  if (pr.data.rows() != mk.steps() || pr.data.cols() != mk.adj.size())
    throw ValidationError(fmt::format("data is {}x{}, the template expects {} levels x {} outgoing facets",
                                      pr.data.rows(), pr.data.cols(), mk.steps(), mk.adj.size()));
  if (!pr.velocity_mask.empty() && pr.velocity_mask.size() != pr.forward.grid.velocity_cells())
    throw ValidationError("velocity mask size does not match the velocity grid");
}

void apply_mask(const InverseProblem& pr, std::vector<double>& g) {
  if (pr.velocity_mask.empty()) return;
  const std::size_t nv = pr.forward.grid.velocity_cells();
  for (std::size_t c = 0; c < g.size(); ++c)
    if (!pr.velocity_mask[c % nv]) g[c] = 0.0;
}

double weighted_inner(const March& mk, const TraceMatrix& a, const TraceMatrix& b) {
  CompensatedSum s;
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double h = mk.times[k + 1] - mk.times[k];
    CompensatedSum row;
    for (std::size_t f = 0; f < a.cols(); ++f) row.add(mk.sigma[f] * a(k, f) * b(k, f));
    s.add(h * row.value());
  }
  return s.value();
}

double regularization(const InverseProblem& pr, double lambda, std::span<const double> m) {
  if (lambda == 0.0) return 0.0;
  CompensatedSum s;
  for (double x : m) s.add(x * x);
  return 0.5 * lambda * pr.forward.grid.cell_volume() * s.value();
}

double dot(std::span<const double> a, std::span<const double> b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

}  // namespace

double measurement_inner(const InverseProblem& problem, const TraceMatrix& a, const TraceMatrix& b) {
  March mk(problem.forward, problem.role);
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mk.steps() || a.cols() != mk.adj.size())
    throw ValidationError("trace shapes do not match the template");
  return weighted_inner(mk, a, b);
}

TraceMatrix forward_measurement(const InverseProblem& problem, std::span<const double> m) {
  March mk(problem.forward, problem.role);
  return mk.run(m, nullptr);
}

TraceMatrix synthetic_data(const Problem& forward, CoefficientRole role, std::span<const double> m) {
  March mk(forward, role);
  return mk.run(m, nullptr);
}

double effective_lambda(const InverseProblem& problem) {
  if (problem.lambda >= 0.0) return problem.lambda;
  March mk(problem.forward, problem.role);
  return 1e-6 * weighted_inner(mk, problem.data, problem.data);
}

double misfit(const InverseProblem& problem, std::span<const double> m) {
  March mk(problem.forward, problem.role);
  check_shape(problem, mk);
  const double lambda =
      problem.lambda >= 0.0 ? problem.lambda : 1e-6 * weighted_inner(mk, problem.data, problem.data);
  TraceMatrix d = mk.run(m, nullptr);
  TraceMatrix r(d.rows(), d.cols());
  for (std::size_t k = 0; k < d.rows(); ++k)
    for (std::size_t f = 0; f < d.cols(); ++f) r(k, f) = d(k, f) - problem.data(k, f);
  return 0.5 * weighted_inner(mk, r, r) + regularization(problem, lambda, m);
}

GradientResult adjoint_gradient(const InverseProblem& problem, std::span<const double> m) {
  March mk(problem.forward, problem.role);
  check_shape(problem, mk);
  const double lambda =
      problem.lambda >= 0.0 ? problem.lambda : 1e-6 * weighted_inner(mk, problem.data, problem.data);
  std::vector<std::vector<double>> states;
  TraceMatrix d = mk.run(m, problem.role == CoefficientRole::Absorption ? &states : nullptr);
  TraceMatrix r(d.rows(), d.cols());
  for (std::size_t k = 0; k < d.rows(); ++k)
    for (std::size_t f = 0; f < d.cols(); ++f) r(k, f) = d(k, f) - problem.data(k, f);
  GradientResult out;
  out.misfit = 0.5 * weighted_inner(mk, r, r) + regularization(problem, lambda, m);
  out.gradient = mk.reverse(m, states, [&](std::size_t n) { return r.row(n); });
  const double vol = problem.forward.grid.cell_volume();
  for (std::size_t c = 0; c < m.size(); ++c) out.gradient[c] += lambda * vol * m[c];
  apply_mask(problem, out.gradient);
  return out;
}

TraceMatrix linearized_measurement(const InverseProblem& problem, std::span<const double> m,
                                   std::span<const double> dm) {
  March mk(problem.forward, problem.role);
  std::vector<std::vector<double>> states;
  mk.run(m, problem.role == CoefficientRole::Absorption ? &states : nullptr);
  const std::size_t nc = mk.cells();
  std::vector<double> du(nc, 0.0), next(nc), src(nc), ghosts(mk.op.incoming().size(), 0.0);
  std::vector<double> row(mk.adj.size());
  const double* q = mk.absorption(m);
  TraceMatrix out(0, mk.adj.size());
  for (std::size_t n = 0; n < mk.steps(); ++n) {
    const double h = mk.times[n + 1] - mk.times[n];
    if (problem.role == CoefficientRole::Source) {
      const auto& s = mk.source_at(n);
      for (std::size_t c = 0; c < nc; ++c) src[c] = s[c] * dm[c] - q[c] * du[c];
    } else {
      const auto& u = states[n];
      for (std::size_t c = 0; c < nc; ++c) src[c] = -dm[c] * u[c] - q[c] * du[c];
    }
    mk.op.euler_step(du, src, ghosts, h, next);
    for (std::size_t f = 0; f < mk.adj.size(); ++f) row[f] = (next[mk.adj[f]] - du[mk.adj[f]]) / h;
    out.append_row(row);
    std::swap(du, next);
  }
  return out;
}

std::vector<double> adjoint_apply(const InverseProblem& problem, std::span<const double> m,
                                  const TraceMatrix& y) {
  March mk(problem.forward, problem.role);
  if (y.rows() != mk.steps() || y.cols() != mk.adj.size())
    throw ValidationError("trace shape does not match the template");
  std::vector<std::vector<double>> states;
  mk.run(m, problem.role == CoefficientRole::Absorption ? &states : nullptr);
  return mk.reverse(m, states, [&](std::size_t n) { return y.row(n); });
}

ReconstructionResult reconstruct(const InverseProblem& problem, std::span<const double> initial,
                                 std::span<const double> truth) {
  if (problem.max_iterations < 0) throw ValidationError("iteration budget must be non-negative");
  ReconstructionResult res;
  res.lambda = effective_lambda(problem);
  InverseProblem pr = problem;
  pr.lambda = res.lambda;

  std::vector<double> m(initial.begin(), initial.end());
  auto gr = adjoint_gradient(pr, m);
  double J = gr.misfit;
  res.misfit_history.push_back(J);
  double gnorm = std::sqrt(dot(gr.gradient, gr.gradient));
  res.gradient_history.push_back(gnorm);
  const double g0 = gnorm;
  double alpha = 0.0;
  constexpr double armijo = 1e-4;

  for (int it = 0; it < pr.max_iterations; ++it) {
    if (gnorm == 0.0 || gnorm <= pr.gradient_tolerance * g0) {
      res.stop_reason = "gradient";
      break;
    }
    if (J <= pr.misfit_tolerance) {
      res.stop_reason = "misfit";
      break;
    }
    const double g2 = gnorm * gnorm;
    if (it == 0) alpha = J / g2;
    std::vector<double> trial(m.size());
    bool accepted = false;
    double Jt = J;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t c = 0; c < m.size(); ++c) trial[c] = m[c] - alpha * gr.gradient[c];
      Jt = misfit(pr, trial);
      if (Jt <= J - armijo * alpha * g2) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "line search";
      break;
    }
    auto next = adjoint_gradient(pr, trial);
    // Barzilai-Borwein trial step for the next iteration
    CompensatedSum ss, sy;
    for (std::size_t c = 0; c < m.size(); ++c) {
      const double s = trial[c] - m[c];
      const double y = next.gradient[c] - gr.gradient[c];
      ss.add(s * s);
      sy.add(s * y);
    }
    if (sy.value() > 0.0) alpha = ss.value() / sy.value();
    m = std::move(trial);
    gr = std::move(next);
    J = gr.misfit;
    gnorm = std::sqrt(dot(gr.gradient, gr.gradient));
    res.misfit_history.push_back(J);
    res.gradient_history.push_back(gnorm);
    res.iterations = it + 1;
    spdlog::debug("reconstruct iter {} misfit {:.6e} |grad| {:.3e}", it + 1, J, gnorm);
  }
  if (!truth.empty()) {
    if (truth.size() != m.size()) throw ValidationError("truth does not match the grid");
    CompensatedSum num, den;
    for (std::size_t c = 0; c < m.size(); ++c) {
      num.add((m[c] - truth[c]) * (m[c] - truth[c]));
      den.add(truth[c] * truth[c]);
    }
    res.relative_error = den.value() > 0.0 ? std::sqrt(num.value() / den.value()) : std::sqrt(num.value());
  }
  res.coefficient = std::move(m);
  return res;
}

}  // namespace kinlab
