#include "kinlab/transport_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

double cfl_dt(const PhaseGrid& grid, double cfl, double v_max) {
  return std::min(grid.dx(), grid.dy()) / (cfl * v_max);
}

double solver_speed_bound(const PhaseGrid& grid) {
  const Vec2 b = grid.speed_bound();
  return b.x + b.y;
}

std::vector<double> time_levels(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0))
    throw ValidationError(fmt::format("need T > 0 and dt > 0 (got T={}, dt={})", T, dt));
  const auto n = std::max<std::size_t>(1, std::size_t(std::ceil(T / dt * (1.0 - 1e-12))));
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k < n; ++k) t[k] = double(k) * dt;
  t[n] = T;
  return t;
}

TransportOperator::TransportOperator(const PhaseGrid& grid, const FieldSpec& E, const FieldSpec& q)
    : grid_(grid) {
  const int nx = grid.nx(), ny = grid.ny(), nvx = grid.nvx(), nvy = grid.nvy();
  e_.resize(grid.spatial_cells());
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) e_[std::size_t(i) * ny + j] = E.vector_at({grid.x(i), grid.y(j)});
  q_ = sample_cells(q, grid);
  diag_.resize(grid.cell_count());
  std::size_t c = 0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Vec2 e = e_[std::size_t(i) * ny + j];
      const double ev = std::abs(e.x) / grid.dvx() + std::abs(e.y) / grid.dvy();
      for (int k = 0; k < nvx; ++k) {
        for (int l = 0; l < nvy; ++l, ++c) {
          diag_[c] = std::abs(grid.vx(k)) / grid.dx() + std::abs(grid.vy(l)) / grid.dy() + ev;
          cfl_rate_ = std::max(cfl_rate_, diag_[c]);
        }
      }
    }
  }
  auto partition = classify_boundary(grid);
  incoming_ = std::move(partition.incoming);
  outgoing_ = std::move(partition.outgoing);
  const std::size_t vcells = grid.velocity_cells();
  ghost_xlo_.assign(std::size_t(ny) * vcells, -1);
  ghost_xhi_.assign(std::size_t(ny) * vcells, -1);
  ghost_ylo_.assign(std::size_t(nx) * vcells, -1);
  ghost_yhi_.assign(std::size_t(nx) * vcells, -1);
  for (std::size_t s = 0; s < incoming_.size(); ++s) {
    const auto& f = incoming_[s];
    const std::size_t slot = (std::size_t(f.tangential) * nvx + f.k) * nvy + f.l;
    if (f.axis == Axis::X) {
      (f.side == Side::Lo ? ghost_xlo_ : ghost_xhi_)[slot] = int(s);
    } else {
      (f.side == Side::Lo ? ghost_ylo_ : ghost_yhi_)[slot] = int(s);
    }
  }
}

void TransportOperator::euler_step(std::span<const double> u, std::span<const double> source,
                                   std::span<const double> ghosts, double dt,
                                   std::span<double> out) const {
  const PhaseGrid& g = grid_;
  const int nx = g.nx(), ny = g.ny(), nvx = g.nvx(), nvy = g.nvy();
  const std::size_t sl = 1, sk = std::size_t(nvy), sj = sk * nvx, si = sj * ny;
  const double idx = 1.0 / g.dx(), idy = 1.0 / g.dy(), idvx = 1.0 / g.dvx(), idvy = 1.0 / g.dvy();
  const bool has_source = !source.empty();
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Vec2 e = e_[std::size_t(i) * ny + j];
      const double wex = std::abs(e.x) * idvx, wey = std::abs(e.y) * idvy;
      for (int k = 0; k < nvx; ++k) {
        const double vx = g.vx(k);
        const double wx = std::abs(vx) * idx;
        for (int l = 0; l < nvy; ++l) {
          const double vy = g.vy(l);
          const double wy = std::abs(vy) * idy;
          const std::size_t c = i * si + j * sj + k * sk + l;
          const std::size_t vslot = std::size_t(k) * nvy + l;
          double acc = 0.0;
          if (vx > 0.0) {
            acc += wx * (i > 0 ? u[c - si] : ghosts[ghost_xlo_[std::size_t(j) * nvx * nvy + vslot]]);
          } else if (vx < 0.0) {
            acc += wx * (i < nx - 1 ? u[c + si] : ghosts[ghost_xhi_[std::size_t(j) * nvx * nvy + vslot]]);
          }
          if (vy > 0.0) {
            acc += wy * (j > 0 ? u[c - sj] : ghosts[ghost_ylo_[std::size_t(i) * nvx * nvy + vslot]]);
          } else if (vy < 0.0) {
            acc += wy * (j < ny - 1 ? u[c + sj] : ghosts[ghost_yhi_[std::size_t(i) * nvx * nvy + vslot]]);
          }
          if (e.x > 0.0) {
            if (k > 0) acc += wex * u[c - sk];
          } else if (e.x < 0.0) {
            if (k < nvx - 1) acc += wex * u[c + sk];
          }
          if (e.y > 0.0) {
            if (l > 0) acc += wey * u[c - sl];
          } else if (e.y < 0.0) {
            if (l < nvy - 1) acc += wey * u[c + sl];
          }
          const double s = has_source ? source[c] : 0.0;
          out[c] = u[c] - dt * ((diag_[c] + q_[c]) * u[c] - acc - s);
        }
      }
    }
  }
}

void TransportOperator::apply(std::span<const double> u, std::span<double> out) const {
  const PhaseGrid& g = grid_;
  const int nx = g.nx(), ny = g.ny(), nvx = g.nvx(), nvy = g.nvy();
  const std::size_t sl = 1, sk = std::size_t(nvy), sj = sk * nvx, si = sj * ny;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Vec2 e = e_[std::size_t(i) * ny + j];
      const double wex = std::abs(e.x) / g.dvx(), wey = std::abs(e.y) / g.dvy();
      for (int k = 0; k < nvx; ++k) {
        const double vx = g.vx(k), wx = std::abs(vx) / g.dx();
        for (int l = 0; l < nvy; ++l) {
          const double vy = g.vy(l), wy = std::abs(vy) / g.dy();
          const std::size_t c = i * si + j * sj + k * sk + l;
          double acc = 0.0;
          if (vx > 0.0 && i > 0) acc += wx * u[c - si];
          if (vx < 0.0 && i < nx - 1) acc += wx * u[c + si];
          if (vy > 0.0 && j > 0) acc += wy * u[c - sj];
          if (vy < 0.0 && j < ny - 1) acc += wy * u[c + sj];
          if (e.x > 0.0 && k > 0) acc += wex * u[c - sk];
          if (e.x < 0.0 && k < nvx - 1) acc += wex * u[c + sk];
          if (e.y > 0.0 && l > 0) acc += wey * u[c - sl];
          if (e.y < 0.0 && l < nvy - 1) acc += wey * u[c + sl];
          out[c] = diag_[c] * u[c] - acc;
        }
      }
    }
  }
}

void TransportOperator::apply_transpose(std::span<const double> w, std::span<double> out) const {
  const PhaseGrid& g = grid_;
  const int nx = g.nx(), ny = g.ny(), nvx = g.nvx(), nvy = g.nvy();
  const std::size_t sl = 1, sk = std::size_t(nvy), sj = sk * nvx, si = sj * ny;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Vec2 e = e_[std::size_t(i) * ny + j];
      const double wex = std::abs(e.x) / g.dvx(), wey = std::abs(e.y) / g.dvy();
      for (int k = 0; k < nvx; ++k) {
        const double vx = g.vx(k), wx = std::abs(vx) / g.dx();
        for (int l = 0; l < nvy; ++l) {
          const double vy = g.vy(l), wy = std::abs(vy) / g.dy();
          const std::size_t c = i * si + j * sj + k * sk + l;
          // cell c feeds its downwind neighbours
          double acc = 0.0;
          if (vx > 0.0 && i < nx - 1) acc += wx * w[c + si];
          if (vx < 0.0 && i > 0) acc += wx * w[c - si];
          if (vy > 0.0 && j < ny - 1) acc += wy * w[c + sj];
          if (vy < 0.0 && j > 0) acc += wy * w[c - sj];
          if (e.x > 0.0 && k < nvx - 1) acc += wex * w[c + sk];
          if (e.x < 0.0 && k > 0) acc += wex * w[c - sk];
          if (e.y > 0.0 && l < nvy - 1) acc += wey * w[c + sl];
          if (e.y < 0.0 && l > 0) acc += wey * w[c - sl];
          out[c] = diag_[c] * w[c] - acc;
        }
      }
    }
  }
}

void TransportOperator::inflow_values(const FieldSpec& h, double t, std::span<double> out) const {
  for (std::size_t s = 0; s < incoming_.size(); ++s)
    out[s] = h.at(t, incoming_[s].point, incoming_[s].velocity);
}

void TransportOperator::add_inflow(const FieldSpec& h, double t, std::span<double> out) const {
  for (const auto& f : incoming_) {
    const double w = f.axis == Axis::X ? std::abs(f.velocity.x) / grid_.dx()
                                       : std::abs(f.velocity.y) / grid_.dy();
    out[adjacent_cell(grid_, f)] += w * h.at(t, f.point, f.velocity);
  }
}

TransportSolver::TransportSolver(const Problem& problem)
    : problem_(problem), op_(problem.grid, problem.E, problem.q) {
  if (!(problem.T > 0.0)) throw ValidationError(fmt::format("T must be positive (got {})", problem.T));
  if (!(problem.cfl > 0.0))
    throw ValidationError(fmt::format("cfl must be positive (got {})", problem.cfl));
  dt_ = cfl_dt(problem.grid, problem.cfl, solver_speed_bound(problem.grid));
  const double rate = dt_ * op_.cfl_rate();
  if (rate > 1.0 + 1e-12)
    throw NumericalError(fmt::format(
        "CFL violation: dt*(|vx|/dx+|vy|/dy+|E1|/dvx+|E2|/dvy) = {:.6g} > 1 with dt = {:.6g}; "
        "increase cfl or refine the velocity grid",
        rate, dt_));
  times_ = time_levels(problem.T, dt_);
  u_ = sample_cells(problem.g, problem.grid);
  prev_ = u_;
  next_.resize(u_.size());
  ghosts_.resize(op_.incoming().size());
  if (!problem.S.is_zero()) {
    source_static_ = !problem.S.depends_on_time();
    fill_source(0.0);
  }
}

void TransportSolver::fill_source(double t) { source_ = sample_cells(problem_.S, problem_.grid, t); }

void TransportSolver::advance() {
  if (done()) throw ValidationError("solver already reached the final time");
  const double t = times_[n_];
  const double h = times_[n_ + 1] - t;
  op_.inflow_values(problem_.h, t, ghosts_);
  if (!source_.empty() && !source_static_) fill_source(t);
  op_.euler_step(u_, source_, ghosts_, h, next_);
  for (std::size_t c = 0; c < next_.size(); ++c) {
    if (!std::isfinite(next_[c])) {
      const auto [i, j, k, l] = problem_.grid.unravel(c);
      throw NumericalError(fmt::format("non-finite value at step {} (t = {:.6g}) in cell ({}, {}, {}, {})",
                                       n_ + 1, times_[n_ + 1], i, j, k, l));
    }
  }
  std::swap(prev_, u_);
  std::swap(u_, next_);
  ++n_;
}

void TransportSolver::outgoing_trace(std::span<double> out) const {
  const auto& f = op_.outgoing();
  for (std::size_t s = 0; s < f.size(); ++s) out[s] = u_[adjacent_cell(problem_.grid, f[s])];
}

void TransportSolver::outgoing_dudt(std::span<double> out) const {
  const auto& f = op_.outgoing();
  if (n_ == 0) {
    std::fill(out.begin(), out.end(), std::numeric_limits<double>::quiet_NaN());
    return;
  }
  const double h = times_[n_] - times_[n_ - 1];
  for (std::size_t s = 0; s < f.size(); ++s) {
    const std::size_t c = adjacent_cell(problem_.grid, f[s]);
    out[s] = (u_[c] - prev_[c]) / h;
  }
}

void TransportSolver::incoming_trace(std::span<double> out) const {
  op_.inflow_values(problem_.h, times_[n_], out);
}

void TransportSolver::incoming_dudt(std::span<double> out) const {
  if (n_ == 0) {
    std::fill(out.begin(), out.end(), std::numeric_limits<double>::quiet_NaN());
    return;
  }
  const auto& f = op_.incoming();
  const double t1 = times_[n_], t0 = times_[n_ - 1];
  for (std::size_t s = 0; s < f.size(); ++s)
    out[s] = (problem_.h.at(t1, f[s].point, f[s].velocity) -
              problem_.h.at(t0, f[s].point, f[s].velocity)) / (t1 - t0);
}

LevelDiagnostics TransportSolver::level_diagnostics() const {
  LevelDiagnostics d;
  d.time = times_[n_];
  const PhaseGrid& g = problem_.grid;
  const double vol = g.cell_volume();
  std::vector<double> src;
  std::span<const double> s;
  if (!source_.empty()) {
    if (source_static_ || n_ == 0) {
      s = source_;
    } else {
      src = sample_cells(problem_.S, g, d.time);
      s = src;
    }
  }
  const auto q = op_.absorption();
  CompensatedSum norm, dotp, ssq;
  for (std::size_t c = 0; c < u_.size(); ++c) {
    const double sc = s.empty() ? 0.0 : s[c];
    norm.add(u_[c] * u_[c]);
    dotp.add((sc - q[c] * u_[c]) * u_[c]);
    ssq.add(sc * sc);
  }
  d.norm_sq = norm.value() * vol;
  d.forcing_dot = dotp.value() * vol;
  d.source_sq = ssq.value() * vol;
  CompensatedSum plus, minus;
  for (const auto& f : op_.outgoing()) {
    const double v = u_[adjacent_cell(g, f)];
    plus.add(f.sigma_weight * v * v);
  }
  for (const auto& f : op_.incoming()) {
    const double v = problem_.h.at(d.time, f.point, f.velocity);
    minus.add(f.sigma_weight * v * v);
  }
  d.plus_flux = plus.value();
  d.minus_flux = minus.value();
  return d;
}

std::vector<double> step(std::span<const double> u, const Problem& problem, double t, double dt) {
  const PhaseGrid& g = problem.grid;
  if (u.size() != g.cell_count())
    throw ValidationError(fmt::format("state has {} cells, grid has {}", u.size(), g.cell_count()));
  TransportOperator op(g, problem.E, problem.q);
  const double rate = dt * op.cfl_rate();
  if (rate > 1.0 + 1e-12)
    throw NumericalError(fmt::format("CFL violation: dt*(|vx|/dx+|vy|/dy+|E1|/dvx+|E2|/dvy) = {:.6g} > 1", rate));
  std::vector<double> ghosts(op.incoming().size());
  op.inflow_values(problem.h, t, ghosts);
  std::vector<double> source;
  if (!problem.S.is_zero()) source = sample_cells(problem.S, g, t);
  std::vector<double> out(u.size());
  op.euler_step(u, source, ghosts, dt, out);
  return out;
}

SolutionRecord solve(const Problem& problem, const SolverOptions& options) {
  TransportSolver solver(problem);
  SolutionRecord rec;
  rec.grid = problem.grid;
  rec.dt = solver.dt();
  rec.steps = solver.total_steps();
  rec.times = solver.times();
  rec.outgoing = solver.op().outgoing();
  rec.incoming = solver.op().incoming();
  rec.initial_state.assign(solver.state().begin(), solver.state().end());
  const std::size_t stride = std::max<std::size_t>(1, options.trace_stride);
  std::vector<double> plus(rec.outgoing.size()), minus(rec.incoming.size());

  auto record = [&] {
    const std::size_t n = solver.step_index();
    if (options.record_traces && (n % stride == 0 || solver.done())) {
      rec.trace_levels.push_back(n);
      solver.outgoing_trace(plus);
      rec.outgoing_u.append_row(plus);
      solver.outgoing_dudt(plus);
      rec.outgoing_dudt.append_row(plus);
      solver.incoming_trace(minus);
      rec.incoming_u.append_row(minus);
      solver.incoming_dudt(minus);
      rec.incoming_dudt.append_row(minus);
    }
    if (options.snapshot_stride > 0 && (n % options.snapshot_stride == 0 || solver.done()))
      rec.snapshots.emplace_back(n, std::vector<double>(solver.state().begin(), solver.state().end()));
    if (options.diagnostics) rec.diagnostics.push_back(solver.level_diagnostics());
  };
  record();
  while (!solver.done()) {
    solver.advance();
    record();
  }
  rec.final_state.assign(solver.state().begin(), solver.state().end());
  return rec;
}

std::vector<double> dudt_weights(const std::vector<double>& times,
                                 const std::vector<std::size_t>& levels) {
  std::vector<double> w(levels.size());
  for (std::size_t r = 0; r < levels.size(); ++r)
    w[r] = levels[r] == 0 ? 0.0 : times[levels[r]] - times[levels[r] - 1];
  return w;
}

std::uint64_t state_checksum(std::span<const double> u) {
  std::uint64_t hash = 1469598103934665603ull;
  for (double v : u) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      hash ^= b;
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

}  // namespace kinlab
