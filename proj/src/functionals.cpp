#include "kinlab/functionals.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

double GreenReport::max_residual() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.residual);
  return m;
}

double EnergyReport::min_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) m = std::min(m, s.margin);
  return m;
}

GreenReport green_identity_residual(const PhaseFunction& u, const FieldSpec& E,
                                    const PhaseGrid& grid, double T, int time_cells,
                                    std::span<const double> s_values) {
  if (time_cells < 1 || !(T > 0.0))
    throw ValidationError(fmt::format("need T > 0 and at least one time cell (got T={}, cells={})",
                                      T, time_cells));
  const double dt = T / time_cells;
  std::vector<int> marks;
  for (double s : s_values) {
    const double m = std::round(s / dt);
    if (m < 0 || m > time_cells || std::abs(m * dt - s) > 1e-9 * std::max(1.0, T))
      throw ValidationError(fmt::format(
          "sample time {} does not lie on the time grid of {} cells over [0, {}]", s, time_cells, T));
    marks.push_back(int(m));
  }
  const auto part = classify_boundary(grid);
  const double vol = grid.cell_volume();

  auto energy = [&](double t) {
    CompensatedSum k;
    for (int i = 0; i < grid.nx(); ++i)
      for (int j = 0; j < grid.ny(); ++j)
        for (int a = 0; a < grid.nvx(); ++a)
          for (int b = 0; b < grid.nvy(); ++b) {
            const double val = u.value(t, {grid.x(i), grid.y(j)}, {grid.vx(a), grid.vy(b)});
            k.add(val * val);
          }
    return k.value() * vol;
  };
  auto flux = [&](const std::vector<BoundaryFacet>& facets, double t) {
    CompensatedSum f;
    for (const auto& fc : facets) {
      const double val = u.value(t, fc.point, fc.velocity);
      f.add(fc.sigma_weight * val * val);
    }
    return f.value();
  };
  auto forcing = [&](double t) {
    CompensatedSum f;
    for (int i = 0; i < grid.nx(); ++i) {
      for (int j = 0; j < grid.ny(); ++j) {
        const Vec2 x{grid.x(i), grid.y(j)};
        const Vec2 e = E.vector_at(x);
        for (int a = 0; a < grid.nvx(); ++a)
          for (int b = 0; b < grid.nvy(); ++b) {
            const Vec2 v{grid.vx(a), grid.vy(b)};
            const auto d = u.jet(t, x, v);
            const double p0u = d[1] + v.x * d[2] + v.y * d[3] + e.x * d[4] + e.y * d[5];
            f.add(p0u * d[0]);
          }
      }
    }
    return f.value() * vol;
  };

  const int last = marks.empty() ? 0 : *std::max_element(marks.begin(), marks.end());
  // cumulative time integrals at each cell boundary
  std::vector<double> plus(std::size_t(last) + 1, 0.0), minus(plus.size(), 0.0), fu(plus.size(), 0.0);
  CompensatedSum cp, cm, cf;
  for (int n = 0; n < last; ++n) {
    const double tm = (n + 0.5) * dt;
    cp.add(dt * flux(part.outgoing, tm));
    cm.add(dt * flux(part.incoming, tm));
    cf.add(dt * forcing(tm));
    plus[n + 1] = cp.value();
    minus[n + 1] = cm.value();
    fu[n + 1] = cf.value();
  }
  const double k0 = energy(0.0);
  GreenReport rep;
  rep.dx = std::max(grid.dx(), grid.dy());
  rep.dt = dt;
  for (int m : marks) {
    GreenSample g;
    g.s = m * dt;
    g.lhs = energy(g.s) + plus[m];
    g.rhs = k0 + minus[m] + 2.0 * fu[m];
    g.residual = std::abs(g.lhs - g.rhs);
    rep.samples.push_back(g);
  }
  return rep;
}

GreenReport green_identity_residual(const std::vector<LevelDiagnostics>& levels,
                                    const PhaseGrid& grid) {
  if (levels.empty()) throw ValidationError("no time levels to evaluate");
  GreenReport rep;
  rep.dx = std::max(grid.dx(), grid.dy());
  CompensatedSum cp, cm, cf;
  for (std::size_t n = 0; n < levels.size(); ++n) {
    if (n > 0) {
      const auto& p = levels[n - 1];
      const double h = levels[n].time - p.time;
      rep.dt = std::max(rep.dt, h);
      cp.add(h * p.plus_flux);
      cm.add(h * p.minus_flux);
      cf.add(h * p.forcing_dot);
    }
    GreenSample g;
    g.s = levels[n].time;
    g.lhs = levels[n].norm_sq + cp.value();
    g.rhs = levels[0].norm_sq + cm.value() + 2.0 * cf.value();
    g.residual = std::abs(g.lhs - g.rhs);
    rep.samples.push_back(g);
  }
  return rep;
}

EnergyReport energy_estimate_check(const std::vector<LevelDiagnostics>& levels, double q_sup,
                                   double relative_tolerance) {
  if (levels.empty()) throw ValidationError("no time levels to evaluate");
  EnergyReport rep;
  rep.constant = 2.0 * (1.0 + q_sup);
  const double T = levels.back().time - levels.front().time;
  CompensatedSum alpha;
  alpha.add(levels.front().norm_sq);
  for (std::size_t n = 0; n + 1 < levels.size(); ++n) {
    const double h = levels[n + 1].time - levels[n].time;
    alpha.add(h * levels[n].minus_flux);
    alpha.add(h * 0.5 * levels[n].source_sq);  // 2 ||W||^2 with W = S / 2
  }
  rep.alpha = alpha.value();
  const double cT = rep.constant * T;
  rep.rhs = rep.alpha * (1.0 + cT * std::exp(cT));
  rep.tolerance = relative_tolerance * rep.rhs;
  CompensatedSum plus;
  for (std::size_t n = 0; n < levels.size(); ++n) {
    if (n > 0) plus.add((levels[n].time - levels[n - 1].time) * levels[n - 1].plus_flux);
    EnergySample e;
    e.s = levels[n].time;
    e.lhs = levels[n].norm_sq + plus.value();
    e.margin = rep.rhs - e.lhs;
    e.pass = e.margin >= -rep.tolerance;
    rep.pass = rep.pass && e.pass;
    rep.samples.push_back(e);
  }
  return rep;
}

double field_sup(const FieldSpec& f, const PhaseGrid& grid) {
  double m = 0.0;
  for (double v : sample_cells(f, grid)) m = std::max(m, std::abs(v));
  return m;
}

BoundaryControlReport boundary_control_check(const FieldSpec& k0, const FieldSpec& k1,
                                             const FieldSpec& q, const FieldSpec& E,
                                             const PhaseGrid& grid, double T, double cfl) {
  BoundaryControlReport rep;
  rep.k0_norm = field_l2_norm(k0, grid);
  if (k0.is_zero() || rep.k0_norm == 0.0) throw ValidationError("k0 has zero L2 norm");
  const auto f0 = k0.formula();
  const auto f1 = k1.formula();
  if (!f0 || !f1) throw ValidationError("k0 and k1 must be formula fields to form their product");
  Problem p;
  p.grid = grid;
  p.E = E;
  p.q = q;
  p.S = FieldSpec::expression(Arity::ScalarTXV, *f0 + "*" + *f1);
  p.T = T;
  p.cfl = cfl;
  TransportSolver solver(p);
  std::vector<double> dudt(solver.op().outgoing().size());
  const auto& facets = solver.op().outgoing();
  CompensatedSum total;
  while (!solver.done()) {
    solver.advance();
    solver.outgoing_dudt(dudt);
    const double h = solver.times()[solver.step_index()] - solver.times()[solver.step_index() - 1];
    CompensatedSum row;
    for (std::size_t s = 0; s < facets.size(); ++s) row.add(facets[s].sigma_weight * dudt[s] * dudt[s]);
    total.add(h * row.value());
  }
  rep.steps = solver.total_steps();
  rep.dudt_norm = std::sqrt(total.value());
  rep.ratio = rep.dudt_norm / rep.k0_norm;
  return rep;
}

}  // namespace kinlab
