#include "kinlab/pipelines.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kinlab/carleman.hpp"
#include "kinlab/error.hpp"
#include "kinlab/experiments.hpp"
#include "kinlab/functionals.hpp"
#include "kinlab/inverse_demo.hpp"
#include "kinlab/io.hpp"
#include "kinlab/manufactured.hpp"

namespace kinlab {

namespace fs = std::filesystem;

namespace {

struct RunContext {
  std::string dir;
  Manifest manifest;
  std::string file(const std::string& name) {
    auto p = (fs::path(dir) / name).string();
    manifest.outputs.push_back(p);
    return p;
  }
};

/// Creates the output directory, runs the body and always leaves a manifest
/// behind, marking it as an error when the body throws.
PipelineResult with_manifest(const std::string& subcommand, const RunConfig& config,
                             const std::string& out_dir,
                             const std::function<PipelineResult(RunContext&)>& body) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", out_dir, ec.message()));
  RunContext ctx;
  ctx.dir = out_dir;
  ctx.manifest.subcommand = subcommand;
  ctx.manifest.config_text = emit_config(config);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  try {
    PipelineResult r = body(ctx);
    ctx.manifest.wall_seconds = elapsed();
    if (!r.passed) {
      ctx.manifest.status = "check_failed";
      ctx.manifest.message = r.message;
    }
    r.outputs = ctx.manifest.outputs;
    write_manifest(out_dir, ctx.manifest, r.summary);
    r.outputs.push_back((fs::path(out_dir) / "manifest.json").string());
    return r;
  } catch (const std::exception& e) {
    ctx.manifest.wall_seconds = elapsed();
    ctx.manifest.status = "error";
    ctx.manifest.message = e.what();
    try {
      write_manifest(out_dir, ctx.manifest, nlohmann::json::object());
    } catch (const std::exception& inner) {
      spdlog::warn("could not write manifest: {}", inner.what());
    }
    throw;
  }
}

void write_facets(const std::string& path, const std::vector<BoundaryFacet>& facets, int partition) {
  CsvWriter w(path, {"id", "partition", "axis", "side", "tangential", "k", "l", "x", "y", "vx", "vy",
                     "n_dot_v", "sigma"});
  for (const auto& f : facets) {
    w.cell((long long)f.id).cell((long long)partition).cell((long long)f.axis).cell((long long)f.side);
    w.cell((long long)f.tangential).cell((long long)f.k).cell((long long)f.l);
    w.cell(f.point.x).cell(f.point.y).cell(f.velocity.x).cell(f.velocity.y).cell(f.n_dot_v).cell(f.sigma_weight);
    w.end_row();
  }
  w.close();
}

std::vector<std::string> trace_header(const std::vector<BoundaryFacet>& facets) {
  std::vector<std::string> h{"level", "time"};
  for (const auto& f : facets) h.push_back(fmt::format("f{}", f.id));
  return h;
}

nlohmann::json hypothesis_json(const HypothesisReport& r) {
  return {{"T", r.T},
          {"R", r.R},
          {"r", r.r},
          {"T_min", r.T_min},
          {"epsilon", r.epsilon},
          {"alpha0", r.alpha0},
          {"alpha1", r.alpha1},
          {"gamma0", r.gamma0},
          {"M0", r.M0},
          {"M1", r.M1},
          {"curl_max", r.curl_max},
          {"conservative_field", r.conservative_field},
          {"potential_residual", r.potential_residual},
          {"domain_offset_ok", r.domain_offset_ok},
          {"diameter_ok", r.diameter_ok},
          {"force_bound_ok", r.force_bound_ok},
          {"items", {r.item1, r.item2, r.item3, r.item4}},
          {"first_failure", r.first_failure()}};
}

CarlemanWeight verify_weight(const RunConfig& c) {
  if (!(c.beta > 0.0)) throw ValidationError(fmt::format("beta > 0 violated (beta = {})", c.beta));
  if (!(c.a > 0.0 && c.a < c.b))
    throw ValidationError(fmt::format("0 < a < b violated (a = {}, b = {})", c.a, c.b));
  if (!(c.v2_lo < c.v2_hi)) throw ValidationError("v2_lo < v2_hi violated");
  CarlemanWeight w;
  w.beta = c.beta;
  w.a = c.a;
  w.b = c.b;
  w.d = c.d;
  w.delta = c.delta;
  w.m = c.m;
  w.v2_lo = c.v2_lo;
  w.v2_hi = c.v2_hi;
  return w;
}

}  // namespace

void write_cell_csv(const std::string& path, const PhaseGrid& grid, std::span<const double> values) {
  CsvWriter w(path, {"i", "j", "k", "l", "value"});
  std::size_t c = 0;
  for (int i = 0; i < grid.nx(); ++i)
    for (int j = 0; j < grid.ny(); ++j)
      for (int k = 0; k < grid.nvx(); ++k)
        for (int l = 0; l < grid.nvy(); ++l, ++c)
          w.cell((long long)i).cell((long long)j).cell((long long)k).cell((long long)l).cell(values[c]).end_row();
  w.close();
}

std::vector<double> read_cell_csv(const std::string& path, const PhaseGrid& grid) {
  const auto t = read_csv(path);
  const auto ci = t.column("i"), cj = t.column("j"), ck = t.column("k"), cl = t.column("l");
  const auto cv = t.column("value");
  if (t.rows.size() != grid.cell_count())
    throw ValidationError(fmt::format("'{}' has {} cells, the grid has {}", path, t.rows.size(), grid.cell_count()));
  std::vector<double> out(grid.cell_count(), std::nan(""));
  for (const auto& r : t.rows) {
    const int i = int(r[ci]), j = int(r[cj]), k = int(r[ck]), l = int(r[cl]);
    if (i < 0 || i >= grid.nx() || j < 0 || j >= grid.ny() || k < 0 || k >= grid.nvx() || l < 0 || l >= grid.nvy())
      throw ValidationError(fmt::format("'{}': cell ({}, {}, {}, {}) is outside the grid", path, i, j, k, l));
    out[grid.index(i, j, k, l)] = r[cv];
  }
  return out;
}

PipelineResult run_simulate(const RunConfig& config, const std::string& out_dir) {
  return with_manifest("simulate", config, out_dir, [&](RunContext& ctx) {
    const Problem p = make_problem(config);
    const auto adm = check_admissibility(p.E, p.h, p.g, p.grid);
    TransportSolver solver(p);
    ctx.manifest.dt = solver.dt();
    ctx.manifest.steps = solver.total_steps();
    const bool out_on = config.partition != "incoming";
    const bool in_on = config.partition != "outgoing";
    const auto& outgoing = solver.op().outgoing();
    const auto& incoming = solver.op().incoming();
    if (out_on) write_facets(ctx.file("facets_outgoing.csv"), outgoing, 1);
    if (in_on) write_facets(ctx.file("facets_incoming.csv"), incoming, -1);

    std::optional<CsvWriter> ou, od, iu, id;
    if (out_on) {
      ou.emplace(ctx.file("outgoing_u.csv"), trace_header(outgoing));
      od.emplace(ctx.file("outgoing_dudt.csv"), trace_header(outgoing));
    }
    if (in_on) {
      iu.emplace(ctx.file("incoming_u.csv"), trace_header(incoming));
      id.emplace(ctx.file("incoming_dudt.csv"), trace_header(incoming));
    }
    CsvWriter diag(ctx.file("diagnostics.csv"),
                   {"level", "time", "norm_sq", "plus_flux", "minus_flux", "forcing_dot", "source_sq"});
    std::vector<double> plus(outgoing.size()), minus(incoming.size());
    auto emit_row = [&](CsvWriter& w, std::size_t n, std::span<const double> v) {
      w.cell((long long)n).cell(solver.time());
      for (double x : v) w.cell(x);
      w.end_row();
    };
    const std::size_t stride = config.trace_stride;
    auto record = [&] {
      const std::size_t n = solver.step_index();
      if (n % stride == 0 || solver.done()) {
        if (out_on) {
          solver.outgoing_trace(plus);
          emit_row(*ou, n, plus);
          solver.outgoing_dudt(plus);
          emit_row(*od, n, plus);
        }
        if (in_on) {
          solver.incoming_trace(minus);
          emit_row(*iu, n, minus);
          solver.incoming_dudt(minus);
          emit_row(*id, n, minus);
        }
      }
      const auto d = solver.level_diagnostics();
      diag.cell((long long)n).cell(d.time).cell(d.norm_sq).cell(d.plus_flux).cell(d.minus_flux);
      diag.cell(d.forcing_dot).cell(d.source_sq).end_row();
      if (config.snapshot_stride > 0 && (n % config.snapshot_stride == 0 || solver.done()))
        write_cell_csv(ctx.file(fmt::format("snapshot_{:06d}.csv", n)), p.grid, solver.state());
    };
    record();
    while (!solver.done()) {
      solver.advance();
      record();
    }
    for (auto* w : {&ou, &od, &iu, &id})
      if (*w) (*w)->close();
    diag.close();
    write_cell_csv(ctx.file("final_state.csv"), p.grid, solver.state());

    PipelineResult r;
    r.summary = {{"dt", solver.dt()},
                 {"steps", solver.total_steps()},
                 {"final_checksum", fmt::format("{:016x}", state_checksum(solver.state()))},
                 {"outgoing_facets", outgoing.size()},
                 {"incoming_facets", incoming.size()},
                 {"admissibility",
                  {{"max_normal_force", adm.max_normal_force},
                   {"force_c1_bound", adm.force_c1_bound},
                   {"compatibility_residual", adm.compatibility_residual},
                   {"tangency_ok", adm.tangency_ok},
                   {"compatibility_ok", adm.compatibility_ok}}}};
    return r;
  });
}

PipelineResult run_sweep(const RunConfig& config, const std::string& out_dir) {
  return with_manifest("sweep", config, out_dir, [&](RunContext& ctx) {
    Problem p = make_problem(config);
    CoefficientFamily fam;
    fam.role = parse_role(config.experiment_role);
    if (fam.role == CoefficientRole::Absorption) {
      fam.profile = p.q;
      p.S = FieldSpec::zero(Arity::ScalarTXV);
    } else {
      fam.profile = p.S;
      p.q = FieldSpec::zero(Arity::ScalarXV);
    }
    const auto sweep = run_stability_sweep(fam, p, config.etas, config.reference);
    ctx.manifest.dt = sweep.dt;
    ctx.manifest.steps = sweep.steps;
    CsvWriter w(ctx.file("sweep.csv"), {"eta", "dcoef", "ddudt"});
    for (const auto& pt : sweep.points)
      if (pt.eta != sweep.reference) w.cell((long long)pt.eta).cell(pt.dcoef).cell(pt.ddudt).end_row();
    w.close();
    const auto fit = linear_fit(sweep);
    nlohmann::json fj = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2},
                         {"c", fit.c},         {"C", fit.C},                 {"points", fit.n}};
    write_text(ctx.file("fit.json"), fj.dump(2) + "\n");
    PipelineResult r;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& pt : sweep.points)
      runs.push_back({{"eta", pt.eta}, {"final_checksum", fmt::format("{:016x}", pt.final_checksum)}});
    r.summary = {{"role", to_string(fam.role)}, {"reference", config.reference}, {"fit", fj}, {"runs", runs}};
    return r;
  });
}

PipelineResult run_verify_green(const RunConfig& config, bool manufactured, const std::string& out_dir) {
  return with_manifest("verify-green", config, out_dir, [&](RunContext& ctx) {
    const Problem p = make_problem(config);
    GreenReport rep;
    if (manufactured) {
      auto u = green_test_function();
      const int cells = std::max(p.grid.nx(), p.grid.ny());
      std::vector<double> s;
      for (int k = 0; k <= cells; ++k) s.push_back(p.T * k / cells);
      rep = green_identity_residual(*u, p.E, p.grid, p.T, cells, s);
    } else {
      SolverOptions o;
      o.record_traces = false;
      const auto rec = solve(p, o);
      ctx.manifest.dt = rec.dt;
      ctx.manifest.steps = rec.steps;
      rep = green_identity_residual(rec.diagnostics, p.grid);
    }
    CsvWriter w(ctx.file("green.csv"), {"s", "lhs", "rhs", "residual"});
    for (const auto& g : rep.samples) w.cell(g.s).cell(g.lhs).cell(g.rhs).cell(g.residual).end_row();
    w.close();
    PipelineResult r;
    r.summary = {{"mode", manufactured ? "manufactured" : "solver"},
                 {"max_residual", rep.max_residual()},
                 {"dx", rep.dx},
                 {"dt", rep.dt}};
    return r;
  });
}

PipelineResult run_verify_energy(const RunConfig& config, const std::string& out_dir) {
  return with_manifest("verify-energy", config, out_dir, [&](RunContext& ctx) {
    const Problem p = make_problem(config);
    SolverOptions o;
    o.record_traces = false;
    const auto rec = solve(p, o);
    ctx.manifest.dt = rec.dt;
    ctx.manifest.steps = rec.steps;
    const auto rep = energy_estimate_check(rec.diagnostics, field_sup(p.q, p.grid));
    CsvWriter w(ctx.file("energy.csv"), {"s", "lhs", "rhs", "margin", "pass"});
    for (const auto& e : rep.samples) w.cell(e.s).cell(e.lhs).cell(rep.rhs).cell(e.margin).cell((long long)e.pass).end_row();
    w.close();
    PipelineResult r;
    r.passed = rep.pass;
    if (!rep.pass) r.message = fmt::format("energy bound violated: min margin {:.6g}", rep.min_margin());
    r.summary = {{"constant", rep.constant}, {"alpha", rep.alpha},  {"rhs", rep.rhs},
                 {"min_margin", rep.min_margin()}, {"pass", rep.pass}};
    return r;
  });
}

PipelineResult run_verify_carleman(const RunConfig& config, const std::string& out_dir) {
  return with_manifest("verify-carleman", config, out_dir, [&](RunContext& ctx) {
    const auto E = FieldSpec::parse(Arity::VectorX, config.E);
    const auto q = FieldSpec::parse(Arity::ScalarXV, config.q);
    const auto w = verify_weight(config);
    const auto hyp = validate_hypothesis(w, config.omega, E, config.verify_T);
    PipelineResult r;
    r.summary["hypothesis"] = hypothesis_json(hyp);
    write_text(ctx.file("hypothesis.json"), hypothesis_json(hyp).dump(2) + "\n");
    if (!hyp.items_pass()) {
      r.passed = false;
      r.message = hyp.first_failure();
      return r;
    }
    CarlemanSupport sup{config.omega, w.v1_lo(), w.v1_hi(), w.v2_lo, w.v2_hi, config.verify_T};
    CsvWriter out(ctx.file("carleman.csv"), {"function", "s", "c0", "initial", "bulk", "final", "outflow",
                                             "inflow", "forcing", "lhs", "rhs", "hold"});
    nlohmann::json stars = nlohmann::json::object();
    for (const auto& u : carleman_catalog(sup)) {
      const auto rep = carleman_residual(*u, w, config.omega, E, q, config.verify_T, hyp.gamma0, hyp.M1,
                                         config.s_list);
      for (const auto& s : rep.samples) {
        out.cell(rep.function).cell(s.s).cell(s.c0).cell(s.initial).cell(s.bulk).cell(s.final);
        out.cell(s.outflow).cell(s.inflow).cell(s.forcing).cell(s.lhs).cell(s.rhs).cell((long long)s.hold);
        out.end_row();
      }
      stars[rep.function] = rep.s_star ? nlohmann::json(*rep.s_star) : nlohmann::json(nullptr);
      if (!rep.s_star) {
        r.passed = false;
        r.message = fmt::format("no s* for test function '{}': the inequality fails at the largest s", rep.function);
      }
    }
    out.close();
    r.summary["s_star"] = stars;
    return r;
  });
}

PipelineResult run_check_weight(const RunConfig& config, const std::string& out_dir) {
  return with_manifest("check-weight", config, out_dir, [&](RunContext& ctx) {
    const auto E = FieldSpec::parse(Arity::VectorX, config.E);
    const auto w = make_weight(config);
    const auto hyp = validate_hypothesis(w, config.omega, E, config.verify_T);
    PipelineResult r;
    r.summary["hypothesis"] = hypothesis_json(hyp);
    write_text(ctx.file("hypothesis.json"), hypothesis_json(hyp).dump(2) + "\n");
    if (!hyp.items_pass()) {
      r.passed = false;
      r.message = hyp.first_failure();
    } else if (!hyp.domain_offset_ok || !hyp.diameter_ok || !hyp.force_bound_ok) {
      r.passed = false;
      r.message = fmt::format("geometric condition failed: x1 >= d {}, diam <= delta {}, ||E||_C1 <= m {}",
                              hyp.domain_offset_ok, hyp.diameter_ok, hyp.force_bound_ok);
    }
    return r;
  });
}

PipelineResult run_exit_time(const RunConfig& config, const PhasePoint& anchor, const std::string& out_dir) {
  return with_manifest("exit-time", config, out_dir, [&](RunContext& ctx) {
    const Problem p = make_problem(config);
    const auto ex = backward_exit(p.E, p.grid.space(), anchor);
    const double value = characteristic_oracle(p.E, p.q, p.S, p.g, p.h, p.grid.space(), anchor);
    nlohmann::json j = {{"anchor", {anchor.t, anchor.x.x, anchor.x.y, anchor.v.x, anchor.v.y}},
                        {"never", ex.never},
                        {"oracle_value", value}};
    if (!ex.never) {
      j["t_minus"] = ex.t_minus;
      j["x_minus"] = {ex.x_minus.x, ex.x_minus.y};
      j["v_minus"] = {ex.v_minus.x, ex.v_minus.y};
      j["normal"] = {ex.normal.x, ex.normal.y};
      j["n_dot_v"] = ex.n_dot_v;
    }
    write_text(ctx.file("exit.json"), j.dump(2) + "\n");
    PipelineResult r;
    r.summary = j;
    return r;
  });
}

PipelineResult run_reconstruct(const RunConfig& config, const std::string& data_csv,
                               const std::optional<std::string>& truth_csv, const std::string& out_dir) {
  return with_manifest("reconstruct", config, out_dir, [&](RunContext& ctx) {
    InverseProblem ip;
    ip.forward = make_problem(config);
    ip.role = parse_role(config.reconstruct_role);
    const auto s0 = FieldSpec::parse(Arity::ScalarTXV, config.s0);
    if (ip.role == CoefficientRole::Source) ip.forward.S = s0;
    ip.lambda = config.lambda;
    ip.max_iterations = config.budget;
    ip.gradient_tolerance = config.gradient_tolerance;
    if (config.mask == "probe")
      ip.velocity_mask = probe_velocity_mask(ip.role == CoefficientRole::Absorption ? ip.forward.g : s0,
                                             ip.forward.grid);

    const auto table = read_csv(data_csv);
    const auto level_col = table.column("level");
    std::vector<const std::vector<double>*> rows;
    for (const auto& row : table.rows)
      if (row[level_col] >= 1.0) rows.push_back(&row);
    for (std::size_t k = 0; k < rows.size(); ++k)
      if ((*rows[k])[level_col] != double(k + 1))
        throw ValidationError("data must hold every level 1..N (simulate with trace_stride = 1)");
    const std::size_t cols = table.header.size() - 2;
    ip.data = TraceMatrix(0, cols);
    for (const auto* row : rows) ip.data.append_row(std::span<const double>(row->data() + 2, cols));

    std::vector<double> truth;
    if (truth_csv)
      truth = read_cell_csv(*truth_csv, ip.forward.grid);
    else if (!config.truth.empty())
      truth = sample_cells(FieldSpec::parse(Arity::ScalarXV, config.truth), ip.forward.grid);

    const std::vector<double> initial(ip.forward.grid.cell_count(), 0.0);
    const auto res = reconstruct(ip, initial, truth);
    const double dt = cfl_dt(ip.forward.grid, ip.forward.cfl, solver_speed_bound(ip.forward.grid));
    ctx.manifest.dt = dt;
    ctx.manifest.steps = ip.data.rows();
    write_cell_csv(ctx.file("recovered.csv"), ip.forward.grid, res.coefficient);
    CsvWriter w(ctx.file("convergence.csv"), {"iteration", "misfit", "gradient_norm"});
    for (std::size_t k = 0; k < res.misfit_history.size(); ++k)
      w.cell((long long)k).cell(res.misfit_history[k]).cell(res.gradient_history[k]).end_row();
    w.close();
    PipelineResult r;
    r.summary = {{"role", to_string(ip.role)},
                 {"iterations", res.iterations},
                 {"lambda", res.lambda},
                 {"stop_reason", res.stop_reason},
                 {"initial_misfit", res.misfit_history.front()},
                 {"final_misfit", res.misfit_history.back()},
                 {"inverse_crime", true}};
    if (res.relative_error) r.summary["relative_error"] = *res.relative_error;
    return r;
  });
}

}  // namespace kinlab
