#include "kinlab/kinlab.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "kinlab/config.hpp"
#include "kinlab/error.hpp"
#include "kinlab/pipelines.hpp"

struct kinlab_config {
  kinlab::RunConfig value;
};

namespace {

thread_local std::string last_error;

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <class F>
kinlab_status guarded(F&& f) {
  last_error.clear();
  try {
    return f();
  } catch (const kinlab::ConfigError& e) {
    last_error = e.what();
    return KINLAB_ERR_CONFIG;
  } catch (const kinlab::ValidationError& e) {
    last_error = e.what();
    return KINLAB_ERR_VALIDATION;
  } catch (const kinlab::NumericalError& e) {
    last_error = e.what();
    return KINLAB_ERR_NUMERICAL;
  } catch (const kinlab::IoError& e) {
    last_error = e.what();
    return KINLAB_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
    return KINLAB_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return KINLAB_ERR_INTERNAL;
  }
}

kinlab_status argument(const char* what) {
  last_error = what;
  return KINLAB_ERR_ARGUMENT;
}

kinlab_status finish(const kinlab::PipelineResult& r, char** summary) {
  if (summary) *summary = dup(r.summary.dump(2));
  if (!r.passed) {
    last_error = r.message;
    return KINLAB_CHECK_FAILED;
  }
  return KINLAB_OK;
}

}  // namespace

extern "C" {

const char* kinlab_last_error(void) { return last_error.c_str(); }

const char* kinlab_version(void) { return KINLAB_VERSION_STRING; }

const char* kinlab_status_name(kinlab_status s) {
  switch (s) {
    case KINLAB_OK: return "ok";
    case KINLAB_CHECK_FAILED: return "check failed";
    case KINLAB_ERR_CONFIG: return "configuration error";
    case KINLAB_ERR_VALIDATION: return "validation error";
    case KINLAB_ERR_NUMERICAL: return "numerical error";
    case KINLAB_ERR_IO: return "i/o error";
    case KINLAB_ERR_ARGUMENT: return "invalid argument";
    case KINLAB_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void kinlab_string_free(char* s) { std::free(s); }

kinlab_status kinlab_config_parse(const char* text, kinlab_config** out) {
  if (!text || !out) return argument("null argument to kinlab_config_parse");
  *out = nullptr;
  return guarded([&] {
    *out = new kinlab_config{kinlab::parse_config(text)};
    return KINLAB_OK;
  });
}

kinlab_status kinlab_config_load(const char* path, kinlab_config** out) {
  if (!path || !out) return argument("null argument to kinlab_config_load");
  *out = nullptr;
  return guarded([&] {
    *out = new kinlab_config{kinlab::load_config(path)};
    return KINLAB_OK;
  });
}

kinlab_status kinlab_config_set(kinlab_config* c, const char* section, const char* key, const char* value) {
  if (!c || !section || !key || !value) return argument("null argument to kinlab_config_set");
  return guarded([&] {
    kinlab::RunConfig copy = c->value;
    kinlab::set_config_value(copy, section, key, value);
    c->value = std::move(copy);
    return KINLAB_OK;
  });
}

kinlab_status kinlab_config_emit(const kinlab_config* c, char** text) {
  if (!c || !text) return argument("null argument to kinlab_config_emit");
  return guarded([&] {
    *text = dup(kinlab::emit_config(c->value));
    return KINLAB_OK;
  });
}

void kinlab_config_free(kinlab_config* c) { delete c; }

#define KINLAB_RUN_PRELUDE(name)                            \
  if (!c || !out_dir) return argument("null argument to " name); \
  if (summary) *summary = nullptr;

kinlab_status kinlab_run_simulate(const kinlab_config* c, const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_simulate")
  return guarded([&] { return finish(kinlab::run_simulate(c->value, out_dir), summary); });
}

kinlab_status kinlab_run_sweep(const kinlab_config* c, const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_sweep")
  return guarded([&] { return finish(kinlab::run_sweep(c->value, out_dir), summary); });
}

kinlab_status kinlab_run_verify_green(const kinlab_config* c, int manufactured, const char* out_dir,
                                      char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_verify_green")
  return guarded([&] { return finish(kinlab::run_verify_green(c->value, manufactured != 0, out_dir), summary); });
}

kinlab_status kinlab_run_verify_energy(const kinlab_config* c, const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_verify_energy")
  return guarded([&] { return finish(kinlab::run_verify_energy(c->value, out_dir), summary); });
}

kinlab_status kinlab_run_verify_carleman(const kinlab_config* c, const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_verify_carleman")
  return guarded([&] { return finish(kinlab::run_verify_carleman(c->value, out_dir), summary); });
}

kinlab_status kinlab_run_check_weight(const kinlab_config* c, const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_check_weight")
  return guarded([&] { return finish(kinlab::run_check_weight(c->value, out_dir), summary); });
}

kinlab_status kinlab_run_exit_time(const kinlab_config* c, double t, double x, double y, double vx, double vy,
                                   const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_exit_time")
  return guarded([&] {
    return finish(kinlab::run_exit_time(c->value, {t, {x, y}, {vx, vy}}, out_dir), summary);
  });
}

kinlab_status kinlab_run_reconstruct(const kinlab_config* c, const char* data_csv, const char* truth_csv,
                                     const char* out_dir, char** summary) {
  KINLAB_RUN_PRELUDE("kinlab_run_reconstruct")
  if (!data_csv) return argument("null data path to kinlab_run_reconstruct");
  return guarded([&] {
    std::optional<std::string> truth;
    if (truth_csv) truth = truth_csv;
    return finish(kinlab::run_reconstruct(c->value, data_csv, truth, out_dir), summary);
  });
}

#undef KINLAB_RUN_PRELUDE

kinlab_status kinlab_backward_exit(const kinlab_config* c, double t, double x, double y, double vx, double vy,
                                   kinlab_exit* out) {
  if (!c || !out) return argument("null argument to kinlab_backward_exit");
  return guarded([&] {
    const auto p = kinlab::make_problem(c->value);
    const auto e = kinlab::backward_exit(p.E, p.grid.space(), {t, {x, y}, {vx, vy}});
    out->never = e.never ? 1 : 0;
    out->t_minus = e.t_minus;
    out->x_minus[0] = e.x_minus.x;
    out->x_minus[1] = e.x_minus.y;
    out->v_minus[0] = e.v_minus.x;
    out->v_minus[1] = e.v_minus.y;
    out->normal[0] = e.normal.x;
    out->normal[1] = e.normal.y;
    out->n_dot_v = e.n_dot_v;
    return KINLAB_OK;
  });
}

}  // extern "C"
