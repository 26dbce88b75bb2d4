#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kinlab/kinlab.h"

namespace {

int exit_code(kinlab_status s) {
  switch (s) {
    case KINLAB_OK: return 0;
    case KINLAB_ERR_NUMERICAL: return 2;
    default: return 1;
  }
}

int report(kinlab_status s, char* summary) {
  if (summary) {
    std::printf("%s\n", summary);
    kinlab_string_free(summary);
  }
  if (s != KINLAB_OK) std::fprintf(stderr, "kinlab: %s: %s\n", kinlab_status_name(s), kinlab_last_error());
  return exit_code(s);
}

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c, const std::string& name) {
  sub->add_option("config", c.config, "run config file")->required()->check(CLI::ExistingFile);
  c.out = "out/" + name;
  sub->add_option("-o,--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--set", c.sets, "override a key: section.key=value")->take_all();
}

kinlab_status apply_set(kinlab_config* cfg, const std::string& item) {
  const auto dot = item.find('.');
  const auto eq = item.find('=');
  if (dot == std::string::npos || eq == std::string::npos || eq < dot) {
    std::fprintf(stderr, "kinlab: --set expects section.key=value, got '%s'\n", item.c_str());
    return KINLAB_ERR_ARGUMENT;
  }
  return kinlab_config_set(cfg, item.substr(0, dot).c_str(), item.substr(dot + 1, eq - dot - 1).c_str(),
                           item.substr(eq + 1).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinlab: kinetic transport laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kinlab_version()));

  Common c;
  std::string role, etas;
  int reference = 0;
  bool manufactured = false;
  double t = 0, x = 0, y = 0, vx = 0, vy = 0;
  std::string data, truth;

  auto* simulate = app.add_subcommand("simulate", "solve the forward problem and write boundary traces");
  auto* sweep = app.add_subcommand("sweep", "coefficient-family stability sweep with linear fit");
  auto* green = app.add_subcommand("verify-green", "Green identity residual");
  auto* energy = app.add_subcommand("verify-energy", "energy estimate check on a solver run");
  auto* carleman = app.add_subcommand("verify-carleman", "weight hypothesis and weighted inequality");
  auto* weight = app.add_subcommand("check-weight", "canonical weight conditions");
  auto* exit_time = app.add_subcommand("exit-time", "backward exit of one characteristic");
  auto* recon = app.add_subcommand("reconstruct", "adjoint least-squares coefficient recovery");

  for (auto* s : {simulate, sweep, green, energy, carleman, weight, exit_time, recon}) add_common(s, c, s->get_name());
  sweep->add_option("--role", role, "q or S");
  sweep->add_option("--etas", etas, "list or range a..b");
  sweep->add_option("--reference", reference, "reference eta");
  green->add_flag("--manufactured", manufactured, "use the closed-form test function instead of the solver");
  exit_time->add_option("--t", t, "anchor time")->required();
  exit_time->add_option("--x", x)->required();
  exit_time->add_option("--y", y)->required();
  exit_time->add_option("--vx", vx)->required();
  exit_time->add_option("--vy", vy)->required();
  recon->add_option("--data", data, "outgoing_dudt.csv from simulate")->required()->check(CLI::ExistingFile);
  recon->add_option("--truth", truth, "cell CSV of the true coefficient")->check(CLI::ExistingFile);

  if (argc < 2) {
    std::fprintf(stderr, "%s", app.help().c_str());
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fprintf(stderr, "%s", app.help().c_str());
    return 1;
  }

  kinlab_config* cfg = nullptr;
  kinlab_status s = kinlab_config_load(c.config.c_str(), &cfg);
  if (s != KINLAB_OK) return report(s, nullptr);
  auto done = [&](kinlab_status st, char* summary) {
    kinlab_config_free(cfg);
    return report(st, summary);
  };
  for (const auto& item : c.sets)
    if ((s = apply_set(cfg, item)) != KINLAB_OK) return done(s, nullptr);
  if (!role.empty() && (s = kinlab_config_set(cfg, "experiment", "role", role.c_str())) != KINLAB_OK)
    return done(s, nullptr);
  if (!etas.empty() && (s = kinlab_config_set(cfg, "experiment", "etas", etas.c_str())) != KINLAB_OK)
    return done(s, nullptr);
  if (reference > 0 &&
      (s = kinlab_config_set(cfg, "experiment", "reference", std::to_string(reference).c_str())) != KINLAB_OK)
    return done(s, nullptr);

  char* summary = nullptr;
  const char* out = c.out.c_str();
  if (simulate->parsed()) s = kinlab_run_simulate(cfg, out, &summary);
  else if (sweep->parsed()) s = kinlab_run_sweep(cfg, out, &summary);
  else if (green->parsed()) s = kinlab_run_verify_green(cfg, manufactured ? 1 : 0, out, &summary);
  else if (energy->parsed()) s = kinlab_run_verify_energy(cfg, out, &summary);
  else if (carleman->parsed()) s = kinlab_run_verify_carleman(cfg, out, &summary);
  else if (weight->parsed()) s = kinlab_run_check_weight(cfg, out, &summary);
  else if (exit_time->parsed()) s = kinlab_run_exit_time(cfg, t, x, y, vx, vy, out, &summary);
  else s = kinlab_run_reconstruct(cfg, data.c_str(), truth.empty() ? nullptr : truth.c_str(), out, &summary);
  return done(s, summary);
}
