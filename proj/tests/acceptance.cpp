#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "kinlab/carleman.hpp"
#include "kinlab/characteristics.hpp"
#include "kinlab/config.hpp"
#include "kinlab/error.hpp"
#include "kinlab/experiments.hpp"
#include "kinlab/functionals.hpp"
#include "kinlab/inverse_demo.hpp"
#include "kinlab/io.hpp"
#include "kinlab/manufactured.hpp"
#include "kinlab/pipelines.hpp"
#include "kinlab/summation.hpp"

using namespace kinlab;
namespace fs = std::filesystem;

namespace tol {
constexpr double sweep_r2 = 0.98;
constexpr double sweep_ratio = 3.0;
constexpr double sweep_minutes = 10.0;
constexpr double source_spread = 1e-12;
constexpr double source_r2 = 1.0 - 1e-10;
constexpr double convergence_factor = 1.7;
constexpr double green_factor = 0.6;
constexpr double green_exact = 1e-12;
constexpr double gamma0 = 0.5, T_min = 5.0, hypothesis = 1e-6;
constexpr double exit_straight = 1e-8;
constexpr double exit_parabola = 1e-8;
constexpr double time_reversal = 1e-7;
constexpr double dot_test = 1e-10;
constexpr double recon_error = 0.10;
constexpr int recon_iterations = 200;
constexpr double recon_seconds = 120.0;
}  // namespace tol

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("error: {}", e.what())};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %2d  %-22s %s  (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

RunConfig load(const fs::path& dir, const char* name) { return load_config((dir / name).string()); }

// first time a 1D parabola p(tau) = p0 + b tau + c tau^2 leaves [lo, hi]
double leave_time(double p0, double b, double c, double lo, double hi) {
  double best = std::numeric_limits<double>::infinity();
  for (double wall : {lo, hi}) {
    const double a0 = p0 - wall;
    if (c == 0.0) {
      if (b != 0.0 && -a0 / b > 0) best = std::min(best, -a0 / b);
      continue;
    }
    const double disc = b * b - 4 * c * a0;
    if (disc < 0) continue;
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    for (double r : {q / c, q != 0.0 ? a0 / q : -1.0})
      if (r > 0) best = std::min(best, r);
  }
  return best;
}

Outcome sweep_criterion(const PipelineResult& r, double minutes) {
  const auto& fit = r.summary["fit"];
  const double r2 = fit["r2"], c = fit["c"], C = fit["C"];
  const int n = fit["points"];
  const bool ok = n == 5 && r2 >= tol::sweep_r2 && C / c <= tol::sweep_ratio && minutes <= tol::sweep_minutes;
  return {ok, fmt::format("points={} R2={:.5f} (>= {}) C/c={:.3f} (<= {}) runtime={:.2f} min", n, r2, tol::sweep_r2,
                          C / c, tol::sweep_ratio, minutes)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinlab acceptance suite"};
  std::string configs_arg = "configs", work_arg = "acceptance_out";
  app.add_option("--configs", configs_arg, "directory with the shipped configs")->check(CLI::ExistingDirectory);
  app.add_option("--work", work_arg, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  const fs::path configs(configs_arg), work(work_arg);
  fs::create_directories(work);

  // runs shared by criteria 1 and 10
  const auto q_cfg = load(configs, "absorption_sweep.cfg");
  PipelineResult sweep_a, sweep_b;
  double sweep_a_minutes = 0.0;
  {
    const auto t0 = Clock::now();
    sweep_a = run_sweep(q_cfg, (work / "sweep_a").string());
    sweep_a_minutes = seconds_since(t0) / 60.0;
  }

  report(1, "absorption sweep", [&] { return sweep_criterion(sweep_a, sweep_a_minutes); });

  report(2, "source sweep", [&] {
    const auto cfg = load(configs, "source_sweep.cfg");
    const auto t0 = Clock::now();
    const auto r = run_sweep(cfg, (work / "sweep_source").string());
    const double minutes = seconds_since(t0) / 60.0;
    const auto& fit = r.summary["fit"];
    const double r2 = fit["r2"], c = fit["c"], C = fit["C"];
    const double spread = (C - c) / C;
    const bool ok = spread <= tol::source_spread && r2 >= tol::source_r2 && minutes <= tol::sweep_minutes;
    return Outcome{ok, fmt::format("ratio spread={:.2e} (<= {:.0e}) 1-R2={:.2e} (<= 1e-10) runtime={:.2f} min",
                                   spread, tol::source_spread, 1.0 - r2, minutes)};
  });

  report(3, "solver convergence", [&] {
    // E = 0, q = 1, g = h = 1 on v in [-1, 1]^2, T = 1; three uniform refinements
    std::vector<double> errors;
    for (int level = 0; level < 3; ++level) {
      GridConfig gc;
      gc.velocity = {{-1.0, -1.0}, {1.0, 1.0}};
      gc.nx = gc.ny = 16 << level;
      gc.nvx = gc.nvy = 4 << level;
      Problem p{build_grid(gc)};
      p.q = FieldSpec::expression(Arity::ScalarXV, "1");
      p.g = FieldSpec::expression(Arity::ScalarXV, "1");
      p.h = FieldSpec::expression(Arity::ScalarTXV, "1");
      p.T = 1.0;
      p.cfl = 1.2;
      SolverOptions o;
      o.record_traces = false;
      o.diagnostics = false;
      const auto rec = solve(p, o);
      const auto& g = rec.grid;
      ExitOptions eo;
      eo.dt = 0.05;
      CompensatedSum err;
      for (std::size_t c = 0; c < g.cell_count(); ++c) {
        auto [i, j, k, l] = g.unravel(c);
        const double exact = characteristic_oracle(p.E, p.q, p.S, p.g, p.h, g.space(),
                                                   {p.T, {g.x(i), g.y(j)}, {g.vx(k), g.vy(l)}}, eo);
        err.add(std::abs(rec.final_state[c] - exact) * g.cell_volume());
      }
      errors.push_back(err.value());
    }
    const double r1 = errors[0] / errors[1], r2 = errors[1] / errors[2];
    const bool ok = r1 >= tol::convergence_factor && r2 >= tol::convergence_factor;
    return Outcome{ok, fmt::format("L1 errors {:.4e} {:.4e} {:.4e}, factors {:.3f} {:.3f} (>= {})", errors[0],
                                   errors[1], errors[2], r1, r2, tol::convergence_factor)};
  });

  report(4, "green identity", [&] {
    auto E = FieldSpec::builtin(Arity::VectorX, "paper-E");
    auto u = green_test_function();
    std::vector<double> res;
    for (int n : {8, 16, 32}) {
      GridConfig gc;
      gc.velocity = {{-4.0, -4.0}, {4.0, 4.0}};
      gc.nx = gc.ny = gc.nvx = gc.nvy = n;
      std::vector<double> s;
      for (int k = 1; k <= n; ++k) s.push_back(double(k) / n);
      res.push_back(green_identity_residual(*u, E, build_grid(gc), 1.0, n, s).max_residual());
    }
    GridConfig gc;
    gc.velocity = {{-2.0, -2.0}, {2.0, 2.0}};
    gc.nx = gc.ny = gc.nvx = gc.nvy = 8;
    const auto grid = build_grid(gc);
    const auto zero_E = FieldSpec::zero(Arity::VectorX);
    std::vector<double> s{0.25, 0.5, 0.75, 1.0};
    const double zero_res = green_identity_residual(*constant_function(0.0), zero_E, grid, 1.0, 8, s).max_residual();
    const double one_res = green_identity_residual(*constant_function(1.0), zero_E, grid, 1.0, 8, s).max_residual();
    const double f1 = res[1] / res[0], f2 = res[2] / res[1];
    const bool ok = f1 <= tol::green_factor && f2 <= tol::green_factor && zero_res <= tol::green_exact &&
                    one_res <= tol::green_exact;
    return Outcome{ok, fmt::format("residuals {:.3e} {:.3e} {:.3e}, factors {:.3f} {:.3f} (<= {}); "
                                   "zero {:.1e} constant {:.1e} (<= {:.0e})",
                                   res[0], res[1], res[2], f1, f2, tol::green_factor, zero_res, one_res,
                                   tol::green_exact)};
  });

  report(5, "energy estimate", [&] {
    int runs = 0, passed = 0;
    double worst = std::numeric_limits<double>::infinity();
    auto check = [&](const Problem& p) {
      SolverOptions o;
      o.record_traces = false;
      const auto rec = solve(p, o);
      const auto rep = energy_estimate_check(rec.diagnostics, field_sup(p.q, p.grid));
      ++runs;
      const double margin = rep.min_margin();
      if (rep.pass && margin > 0.0) ++passed;
      worst = std::min(worst, margin);
    };
    const Problem base = make_problem(q_cfg);
    CoefficientFamily fam{base.q, CoefficientRole::Absorption};
    for (int eta : q_cfg.etas) {
      Problem p = base;
      p.q = family_member(fam, eta);
      p.S = FieldSpec::zero(Arity::ScalarTXV);
      check(p);
    }
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 10; ++n) {
      GridConfig gc;
      gc.velocity = {{-3.0, -3.0}, {3.0, 3.0}};
      gc.nx = gc.ny = 16;
      gc.nvx = gc.nvy = 8;
      Problem p{build_grid(gc)};
      auto r = [&](double lo, double hi) { return fmt::format("{:.17g}", lo + (hi - lo) * u(rng)); };
      p.E = FieldSpec::vector_expression(r(-0.5, 0.5) + "*sin(2*pi*y+" + r(0, 6) + ")",
                                         r(-0.5, 0.5) + "*cos(2*pi*x+" + r(0, 6) + ")");
      p.q = FieldSpec::expression(Arity::ScalarXV, r(0, 1) + "+" + r(0, 0.5) + "*sin(pi*x)*cos(pi*y)*exp(-0.1*vx*vx)");
      p.S = FieldSpec::expression(Arity::ScalarTXV, r(-1, 1) + "*cos(" + r(1, 4) + "*t)*exp(-(vx^2+vy^2)/4)*x*y");
      p.g = FieldSpec::expression(Arity::ScalarXV,
                                  r(0.5, 2) + "*exp(-" + r(5, 20) + "*((x-0.5)^2+(y-0.5)^2))*exp(-(vx^2+vy^2)/2)");
      p.h = FieldSpec::expression(Arity::ScalarTXV, r(0, 1) + "*exp(-t)*exp(-(vx^2+vy^2)/2)");
      p.T = 0.5;
      check(p);
    }
    return Outcome{passed == runs,
                   fmt::format("{}/{} runs pass (6 absorption, 10 randomized), smallest margin {:.4e}", passed, runs, worst)};
  });

  const auto carleman_cfg = load(configs, "carleman.cfg");
  const auto weight = make_weight(carleman_cfg);
  const auto zero_E = FieldSpec::zero(Arity::VectorX);

  report(6, "carleman s*", [&] {
    const auto hyp = validate_hypothesis(weight, carleman_cfg.omega, zero_E, carleman_cfg.verify_T);
    CarlemanSupport sup{carleman_cfg.omega, weight.v1_lo(), weight.v1_hi(), weight.v2_lo, weight.v2_hi,
                        carleman_cfg.verify_T};
    std::vector<double> s;
    for (double x = 1; x <= 1024; x *= 2) s.push_back(x);
    int found = 0, total = 0;
    std::string stars;
    for (const auto& u : carleman_catalog(sup)) {
      const auto rep = carleman_residual(*u, weight, carleman_cfg.omega, zero_E, FieldSpec::zero(Arity::ScalarXV),
                                         carleman_cfg.verify_T, hyp.gamma0, hyp.M1, s);
      ++total;
      if (rep.s_star) ++found;
      stars += fmt::format(" {}={}", rep.function, rep.s_star ? fmt::format("{:g}", *rep.s_star) : "none");
    }
    return Outcome{found == total && total == 5, fmt::format("s* found for {}/{}:{}", found, total, stars)};
  });

  report(7, "hypothesis checker", [&] {
    const auto good = validate_hypothesis(weight, carleman_cfg.omega, zero_E, 6.0);
    const auto short_T = validate_hypothesis(weight, carleman_cfg.omega, zero_E, 4.0);
    const bool ok = good.items_pass() && std::abs(good.gamma0 - tol::gamma0) <= tol::hypothesis &&
                    std::abs(good.T_min - tol::T_min) <= tol::hypothesis && !short_T.item2;
    return Outcome{ok, fmt::format("T=6 items {}{}{}{} gamma0={:.9f} T_min={:.9f}; T=4: {}", good.item1, good.item2,
                                   good.item3, good.item4, good.gamma0, good.T_min,
                                   short_T.first_failure().empty() ? "no failure" : short_T.first_failure())};
  });

  report(8, "backward exit", [&] {
    const Box unit{{0.0, 0.0}, {1.0, 1.0}};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(0.0, 1.0), vel(-3.0, 3.0), force(-2.0, 2.0), ang(0.0, 6.283185307179586);
    double straight_err = 0.0;
    int straight_n = 0;
    while (straight_n < 10000) {
      const Vec2 x{pos(rng), pos(rng)};
      const double th = ang(rng), sp = 0.5 + 2.5 * pos(rng);
      const Vec2 v{sp * std::cos(th), sp * std::sin(th)};
      const double t = 4.0 * pos(rng);
      const double tx = leave_time(x.x, -v.x, 0.0, 0.0, 1.0), ty = leave_time(x.y, -v.y, 0.0, 0.0, 1.0);
      const double tm = std::min(tx, ty);
      const auto r = backward_exit(zero_E, unit, {t, x, v});
      ++straight_n;
      if (tm > t) {
        straight_err = std::max(straight_err, r.never ? 0.0 : 1.0);
        continue;
      }
      if (r.never) {
        straight_err = 1.0;
        continue;
      }
      const Vec2 xm = x - tm * v;
      straight_err = std::max({straight_err, std::abs(r.t_minus - tm), std::abs(r.x_minus.x - xm.x),
                               std::abs(r.x_minus.y - xm.y)});
    }
    double parabola_err = 0.0;
    for (int n = 0; n < 1000; ++n) {
      const Vec2 x{0.05 + 0.9 * pos(rng), 0.05 + 0.9 * pos(rng)};
      const Vec2 v{vel(rng), vel(rng)};
      const Vec2 e{force(rng), force(rng)};
      // backward path x(tau) = x - v tau + e tau^2 / 2
      const double tm = std::min(leave_time(x.x, -v.x, 0.5 * e.x, 0.0, 1.0), leave_time(x.y, -v.y, 0.5 * e.y, 0.0, 1.0));
      if (!(tm < 50.0)) continue;
      const auto E = FieldSpec::vector_expression(fmt::format("{:.17g}", e.x), fmt::format("{:.17g}", e.y));
      const auto r = backward_exit(E, unit, {100.0, x, v});
      parabola_err = std::max(parabola_err, r.never ? 1.0 : std::abs(r.t_minus - tm));
    }
    for (double e2 : {1.0, -1.0}) {
      const auto E = FieldSpec::vector_expression("0", fmt::format("{}", e2));
      const double tm = e2 > 0 ? 1.0 - std::sqrt(0.8) : std::sqrt(1.2) - 1.0;
      const auto r = backward_exit(E, unit, {10.0, {0.5, 0.1}, {0.0, 1.0}});
      parabola_err = std::max(parabola_err, std::abs(r.t_minus - tm));
    }
    const auto pE = FieldSpec::builtin(Arity::VectorX, "paper-E");
    double reversal_err = 0.0;
    for (int n = 0; n < 200; ++n) {
      const PhasePoint a{0.0, {pos(rng), pos(rng)}, {vel(rng), vel(rng)}};
      const double s = 0.2 + pos(rng);
      const auto f = integrate_trajectory(pE, unit, a, s, 1e-3).samples.back();
      const auto b = integrate_trajectory(pE, unit, {s, f.x, f.v}, 0.0, 1e-3).samples.back();
      reversal_err = std::max({reversal_err, std::abs(b.x.x - a.x.x), std::abs(b.x.y - a.x.y),
                               std::abs(b.v.x - a.v.x), std::abs(b.v.y - a.v.y)});
    }
    const bool ok = straight_err <= tol::exit_straight && parabola_err <= tol::exit_parabola &&
                    reversal_err <= tol::time_reversal;
    return Outcome{ok, fmt::format("straight max err {:.2e} over {} anchors; parabola {:.2e}; reversal {:.2e}",
                                   straight_err, straight_n, parabola_err, reversal_err)};
  });

  report(9, "adjoint and inversion", [&] {
    const auto cfg = load(configs, "reconstruct_source.cfg");
    const Problem base = make_problem(cfg);
    const auto n = base.grid.cell_count();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto random_vec = [&](std::size_t len) {
      std::vector<double> v(len);
      for (auto& x : v) x = u(rng);
      return v;
    };
    double dot_err = 0.0;
    for (auto role : {CoefficientRole::Source, CoefficientRole::Absorption}) {
      InverseProblem ip;
      ip.forward = base;
      ip.role = role;
      if (role == CoefficientRole::Absorption) ip.forward.g = FieldSpec::expression(Arity::ScalarXV, "exp(-(vx^2+vy^2)/4)");
      else ip.forward.S = FieldSpec::expression(Arity::ScalarTXV, "1");
      auto m = random_vec(n);
      for (auto& x : m) x = 0.5 + 0.25 * x;
      ip.data = synthetic_data(ip.forward, role, m);
      const auto dm = random_vec(n);
      const auto Jdm = linearized_measurement(ip, m, dm);
      TraceMatrix y(Jdm.rows(), Jdm.cols());
      for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) = u(rng);
      const double lhs = measurement_inner(ip, Jdm, y);
      const auto JTy = adjoint_apply(ip, m, y);
      CompensatedSum rhs;
      for (std::size_t c = 0; c < n; ++c) rhs.add(dm[c] * JTy[c]);
      dot_err = std::max(dot_err, std::abs(lhs - rhs.value()) / std::max(std::abs(lhs), std::abs(rhs.value())));
    }

    const auto data_dir = work / "reconstruct_data";
    run_simulate(cfg, data_dir.string());
    const auto t0 = Clock::now();
    const auto r = run_reconstruct(cfg, (data_dir / "outgoing_dudt.csv").string(), std::nullopt,
                                   (work / "reconstruct").string());
    const double secs = seconds_since(t0);
    const double err = r.summary.value("relative_error", 1.0);
    const int iters = r.summary["iterations"];
    const bool ok = dot_err <= tol::dot_test && err <= tol::recon_error && iters <= tol::recon_iterations &&
                    secs <= tol::recon_seconds;
    return Outcome{ok, fmt::format("dot test {:.2e} (<= {:.0e}); relative error {:.4f} (<= {}) in {} iterations, "
                                   "{:.1f} s (<= {:.0f})",
                                   dot_err, tol::dot_test, err, tol::recon_error, iters, secs, tol::recon_seconds)};
  });

  report(10, "determinism", [&] {
    sweep_b = run_sweep(q_cfg, (work / "sweep_b").string());
    const auto a = sha256_file((work / "sweep_a" / "sweep.csv").string());
    const auto b = sha256_file((work / "sweep_b" / "sweep.csv").string());
    const auto fa = sha256_file((work / "sweep_a" / "fit.json").string());
    const auto fb = sha256_file((work / "sweep_b" / "fit.json").string());
    return Outcome{a == b && fa == fb, fmt::format("sweep.csv sha256 {} vs {}", a.substr(0, 16), b.substr(0, 16))};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
