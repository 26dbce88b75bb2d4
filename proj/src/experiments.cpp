#include "kinlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

std::vector<std::pair<double, double>> SweepResult::fit_points() const {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : points)
    if (p.eta != reference) out.emplace_back(p.dcoef, p.ddudt);
  return out;
}

SweepResult run_stability_sweep(const CoefficientFamily& family, const Problem& base,
                                std::span<const int> etas, int reference) {
  if (etas.empty()) throw ValidationError("sweep needs at least one eta");
  std::vector<int> order(etas.begin(), etas.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end())
    throw ValidationError("sweep etas must be distinct");
  if (!std::binary_search(order.begin(), order.end(), reference)) order.insert(
      std::upper_bound(order.begin(), order.end(), reference), reference);

  const bool absorption = family.role == CoefficientRole::Absorption;
  std::vector<std::unique_ptr<TransportSolver>> solvers;
  std::vector<std::vector<double>> coef;
  std::size_t ref_slot = 0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    const int eta = order[n];
    if (eta == reference) ref_slot = n;
    Problem p = base;
    try {
      (absorption ? p.q : p.S) = family_member(family, eta);
      solvers.push_back(std::make_unique<TransportSolver>(p));
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("eta = {}: {}", eta, e.what()));
    }
    coef.push_back(sample_cells(absorption ? p.q : p.S, p.grid));
  }

  const PhaseGrid& grid = base.grid;
  const auto& facets = solvers[ref_slot]->op().outgoing();
  const std::size_t nf = facets.size();
  std::vector<std::vector<double>> dudt(order.size(), std::vector<double>(nf));
  std::vector<CompensatedSum> acc(order.size());
  const auto& times = solvers[ref_slot]->times();

  while (!solvers[ref_slot]->done()) {
    const std::size_t k = solvers[ref_slot]->step_index();
    const double h = times[k + 1] - times[k];  // weight dt_{k} of level k+1
    for (std::size_t n = 0; n < order.size(); ++n) {
      try {
        solvers[n]->advance();
      } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("eta = {}: {}", order[n], e.what()));
      }
      solvers[n]->outgoing_dudt(dudt[n]);
    }
    const auto& ref = dudt[ref_slot];
    for (std::size_t n = 0; n < order.size(); ++n) {
      if (n == ref_slot) continue;
      CompensatedSum row;
      for (std::size_t f = 0; f < nf; ++f) {
        const double d = dudt[n][f] - ref[f];
        row.add(facets[f].sigma_weight * d * d);
      }
      acc[n].add(h * row.value());
    }
  }

  SweepResult out;
  out.role = family.role;
  out.reference = reference;
  out.dt = solvers[ref_slot]->dt();
  out.steps = solvers[ref_slot]->total_steps();
  std::vector<double> diff(grid.cell_count());
  for (std::size_t n = 0; n < order.size(); ++n) {
    SweepPoint p;
    p.eta = order[n];
    for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = coef[n][c] - coef[ref_slot][c];
    p.dcoef = std::sqrt(phase_norm_sq(grid, diff));
    p.ddudt = n == ref_slot ? 0.0 : std::sqrt(acc[n].value());
    p.final_checksum = state_checksum(solvers[n]->state());
    spdlog::debug("sweep eta={} dcoef={:.6g} ddudt={:.6g}", p.eta, p.dcoef, p.ddudt);
    out.points.push_back(p);
  }
  return out;
}

FitReport linear_fit(std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 2)
    throw ValidationError(fmt::format("linear fit needs at least 2 points (got {})", pts.size()));
  const double n = double(pts.size());
  CompensatedSum sx, sy;
  for (const auto& [x, y] : pts) {
    sx.add(x);
    sy.add(y);
  }
  const double mx = sx.value() / n, my = sy.value() / n;
  CompensatedSum sxx, sxy, syy;
  for (const auto& [x, y] : pts) {
    sxx.add((x - mx) * (x - mx));
    sxy.add((x - mx) * (y - my));
    syy.add((y - my) * (y - my));
  }
  if (sxx.value() == 0.0) throw ValidationError("linear fit needs at least two distinct abscissae");
  FitReport r;
  r.n = pts.size();
  r.slope = sxy.value() / sxx.value();
  r.intercept = my - r.slope * mx;
  CompensatedSum res;
  for (const auto& [x, y] : pts) {
    const double e = y - (r.intercept + r.slope * x);
    res.add(e * e);
  }
  r.r2 = syy.value() > 0.0 ? std::clamp(1.0 - res.value() / syy.value(), 0.0, 1.0) : 1.0;
  r.c = std::numeric_limits<double>::infinity();
  r.C = 0.0;
  bool any = false;
  for (const auto& [x, y] : pts) {
    if (x == 0.0) continue;
    const double ratio = y / x;
    r.c = std::min(r.c, ratio);
    r.C = std::max(r.C, ratio);
    any = true;
  }
  if (!any) r.c = 0.0;
  return r;
}

FitReport linear_fit(const SweepResult& sweep) {
  const auto pts = sweep.fit_points();
  return linear_fit(std::span<const std::pair<double, double>>(pts));
}

std::vector<char> probe_velocity_mask(const FieldSpec& g, const PhaseGrid& grid) {
  const auto vals = sample_cells(g, grid);
  const std::size_t nv = grid.velocity_cells();
  std::vector<double> best(nv, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < vals.size(); ++c) {
    best[c % nv] = std::max(best[c % nv], vals[c]);
    top = std::max(top, vals[c]);
  }
  std::vector<char> mask(nv, 0);
  if (!(top > 0.0)) return mask;
  for (std::size_t v = 0; v < nv; ++v) mask[v] = best[v] >= 0.5 * top;
  return mask;
}

}  // namespace kinlab
