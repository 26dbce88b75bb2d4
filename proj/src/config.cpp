#include "kinlab/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "kinlab/error.hpp"

namespace kinlab {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Thrown by setters; the caller adds the location.
struct TypeMismatch {
  std::string what;
};

double to_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw TypeMismatch{fmt::format("expected a number, got '{}'", s)};
  return v;
}

template <class Int>
Int to_int(std::string_view s) {
  s = trim(s);
  Int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw TypeMismatch{fmt::format("expected an integer, got '{}'", s)};
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<int> to_int_list(std::string_view s) {
  s = trim(s);
  if (const auto dots = s.find(".."); dots != std::string_view::npos) {
    const int lo = to_int<int>(s.substr(0, dots)), hi = to_int<int>(s.substr(dots + 2));
    if (hi < lo) throw TypeMismatch{fmt::format("empty range '{}'", s)};
    std::vector<int> out;
    for (int i = lo; i <= hi; ++i) out.push_back(i);
    return out;
  }
  std::vector<int> out;
  for (auto part : split(s, ',')) out.push_back(to_int<int>(part));
  return out;
}

std::vector<double> to_double_list(std::string_view s) {
  std::vector<double> out;
  for (auto part : split(s, ',')) out.push_back(to_double(part));
  return out;
}

std::string choice(std::string_view s, std::initializer_list<std::string_view> options) {
  s = trim(s);
  for (auto o : options)
    if (s == o) return std::string(s);
  std::string list;
  for (auto o : options) list += (list.empty() ? "" : ", ") + std::string(o);
  throw TypeMismatch{fmt::format("expected one of {{{}}}, got '{}'", list, s)};
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (const auto& x : v) {
    if (!out.empty()) out += ", ";
    if constexpr (std::is_floating_point_v<T>)
      out += num(x);
    else
      out += fmt::format("{}", x);
  }
  return out;
}

struct Key {
  const char* section;
  const char* name;
  bool required;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KL_DOUBLE(sec, key, req, member)                                          \
  Key {                                                                            \
    sec, key, req, [](RunConfig& c, std::string_view v) { c.member = to_double(v); }, \
        [](const RunConfig& c) { return num(c.member); }                           \
  }
#define KL_INT(sec, key, req, member, type)                                              \
  Key {                                                                                   \
    sec, key, req, [](RunConfig& c, std::string_view v) { c.member = to_int<type>(v); }, \
        [](const RunConfig& c) { return fmt::format("{}", c.member); }                    \
  }
#define KL_STRING(sec, key, req, member)                                                   \
  Key {                                                                                     \
    sec, key, req, [](RunConfig& c, std::string_view v) { c.member = std::string(trim(v)); }, \
        [](const RunConfig& c) { return c.member; }                                         \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      KL_DOUBLE("grid", "x_lo", true, grid.space.lo.x),
      KL_DOUBLE("grid", "x_hi", true, grid.space.hi.x),
      KL_DOUBLE("grid", "y_lo", true, grid.space.lo.y),
      KL_DOUBLE("grid", "y_hi", true, grid.space.hi.y),
      KL_DOUBLE("grid", "vx_lo", true, grid.velocity.lo.x),
      KL_DOUBLE("grid", "vx_hi", true, grid.velocity.hi.x),
      KL_DOUBLE("grid", "vy_lo", true, grid.velocity.lo.y),
      KL_DOUBLE("grid", "vy_hi", true, grid.velocity.hi.y),
      KL_INT("grid", "nx", true, grid.nx, int),
      KL_INT("grid", "ny", true, grid.ny, int),
      KL_INT("grid", "nvx", true, grid.nvx, int),
      KL_INT("grid", "nvy", true, grid.nvy, int),
      KL_DOUBLE("time", "T", true, T),
      KL_DOUBLE("time", "cfl", true, cfl),
      KL_INT("time", "snapshot_stride", false, snapshot_stride, std::size_t),
      KL_STRING("fields", "E", true, E),
      KL_STRING("fields", "q", true, q),
      KL_STRING("fields", "S", true, S),
      KL_STRING("fields", "g", true, g),
      KL_STRING("fields", "h", true, h),
      Key{"experiment", "role", false,
          [](RunConfig& c, std::string_view v) { c.experiment_role = choice(v, {"q", "S"}); },
          [](const RunConfig& c) { return c.experiment_role; }},
      Key{"experiment", "etas", false, [](RunConfig& c, std::string_view v) { c.etas = to_int_list(v); },
          [](const RunConfig& c) { return join(c.etas); }},
      KL_INT("experiment", "reference", false, reference, int),
      KL_DOUBLE("verify", "beta", false, beta),
      KL_DOUBLE("verify", "a", false, a),
      KL_DOUBLE("verify", "b", false, b),
      KL_DOUBLE("verify", "d", false, d),
      KL_DOUBLE("verify", "delta", false, delta),
      KL_DOUBLE("verify", "m", false, m),
      KL_DOUBLE("verify", "v2_lo", false, v2_lo),
      KL_DOUBLE("verify", "v2_hi", false, v2_hi),
      KL_DOUBLE("verify", "T", false, verify_T),
      Key{"verify", "s", false, [](RunConfig& c, std::string_view v) { c.s_list = to_double_list(v); },
          [](const RunConfig& c) { return join(c.s_list); }},
      KL_DOUBLE("verify", "omega_x_lo", false, omega.lo.x),
      KL_DOUBLE("verify", "omega_x_hi", false, omega.hi.x),
      KL_DOUBLE("verify", "omega_y_lo", false, omega.lo.y),
      KL_DOUBLE("verify", "omega_y_hi", false, omega.hi.y),
      Key{"reconstruct", "role", false,
          [](RunConfig& c, std::string_view v) { c.reconstruct_role = choice(v, {"q", "S"}); },
          [](const RunConfig& c) { return c.reconstruct_role; }},
      KL_DOUBLE("reconstruct", "lambda", false, lambda),
      KL_INT("reconstruct", "budget", false, budget, int),
      KL_DOUBLE("reconstruct", "gradient_tolerance", false, gradient_tolerance),
      KL_STRING("reconstruct", "s0", false, s0),
      KL_STRING("reconstruct", "truth", false, truth),
      Key{"reconstruct", "mask", false,
          [](RunConfig& c, std::string_view v) { c.mask = choice(v, {"all", "probe"}); },
          [](const RunConfig& c) { return c.mask; }},
      KL_INT("output", "trace_stride", false, trace_stride, std::size_t),
      Key{"output", "partition", false,
          [](RunConfig& c, std::string_view v) { c.partition = choice(v, {"outgoing", "incoming", "both"}); },
          [](const RunConfig& c) { return c.partition; }},
      KL_INT("run", "seed", false, seed, std::uint64_t),
  };
  return keys;
}

#undef KL_DOUBLE
#undef KL_INT
#undef KL_STRING

const Key* find_key(std::string_view section, std::string_view name) {
  for (const auto& k : registry())
    if (section == k.section && name == k.name) return &k;
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& k : registry())
    if (section == k.section) return true;
  return false;
}

/// Checks that need several keys; appended to the error list.
void cross_check(const RunConfig& c, std::vector<std::string>& errors) {
  auto field = [&](const char* key, Arity arity, const std::string& text) {
    if (text.empty()) return;
    try {
      FieldSpec::parse(arity, text);
    } catch (const Error& e) {
      errors.push_back(fmt::format("[fields] {}: {}", key, e.what()));
    }
  };
  field("E", Arity::VectorX, c.E);
  field("q", Arity::ScalarXV, c.q);
  field("S", Arity::ScalarTXV, c.S);
  field("g", Arity::ScalarXV, c.g);
  field("h", Arity::ScalarTXV, c.h);
  try {
    build_grid(c.grid);
  } catch (const Error& e) {
    errors.push_back(fmt::format("[grid]: {}", e.what()));
  }
  if (!(c.T > 0.0)) errors.push_back(fmt::format("[time] T: must be positive (got {})", c.T));
  if (!(c.cfl > 0.0)) errors.push_back(fmt::format("[time] cfl: must be positive (got {})", c.cfl));
  if (c.etas.empty()) errors.push_back("[experiment] etas: empty list");
  for (int e : c.etas)
    if (e < 1) errors.push_back(fmt::format("[experiment] etas: eta must be >= 1 (got {})", e));
  if (c.reference < 1) errors.push_back("[experiment] reference: must be >= 1");
  if (c.s_list.empty()) errors.push_back("[verify] s: empty list");
  if (c.budget < 0) errors.push_back("[reconstruct] budget: must be >= 0");
  if (c.trace_stride < 1) errors.push_back("[output] trace_stride: must be >= 1");
  if (!c.s0.empty()) {
    try {
      FieldSpec::parse(Arity::ScalarTXV, c.s0);
    } catch (const Error& e) {
      errors.push_back(fmt::format("[reconstruct] s0: {}", e.what()));
    }
  }
  if (!c.truth.empty()) {
    try {
      FieldSpec::parse(Arity::ScalarXV, c.truth);
    } catch (const Error& e) {
      errors.push_back(fmt::format("[reconstruct] truth: {}", e.what()));
    }
  }
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::vector<std::string> errors;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  bool section_ok = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(fmt::format("line {}: malformed section header '{}'", line_no, line));
        section_ok = false;
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      section_ok = known_section(section);
      if (!section_ok) errors.push_back(fmt::format("line {}: unknown section [{}]", line_no, section));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(fmt::format("line {}: expected 'key = value', got '{}'", line_no, line));
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (section.empty()) {
      errors.push_back(fmt::format("line {}: key '{}' appears before any section", line_no, key));
      continue;
    }
    if (!section_ok) continue;
    const Key* k = find_key(section, key);
    if (!k) {
      errors.push_back(fmt::format("line {}: [{}] {}: unknown key", line_no, section, key));
      continue;
    }
    if (!seen.insert({section, key}).second) {
      errors.push_back(fmt::format("line {}: [{}] {}: duplicate key", line_no, section, key));
      continue;
    }
    try {
      k->set(cfg, value);
    } catch (const TypeMismatch& t) {
      errors.push_back(fmt::format("line {}: [{}] {}: {}", line_no, section, key, t.what));
    }
  }
  for (const auto& k : registry())
    if (k.required && !seen.count({k.section, k.name}))
      errors.push_back(fmt::format("[{}] {}: missing required key", k.section, k.name));
  if (errors.empty()) cross_check(cfg, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  std::string current;
  for (const auto& k : registry()) {
    if (current != k.section) {
      if (!current.empty()) out += "\n";
      current = k.section;
      out += fmt::format("[{}]\n", current);
    }
    out += fmt::format("{} = {}\n", k.name, k.get(c));
  }
  return out;
}

void set_config_value(RunConfig& c, std::string_view section, std::string_view key,
                      std::string_view value) {
  const Key* k = find_key(section, key);
  if (!k) throw ConfigError(fmt::format("[{}] {}: unknown key", section, key));
  try {
    k->set(c, value);
  } catch (const TypeMismatch& t) {
    throw ConfigError(fmt::format("[{}] {}: {}", section, key, t.what));
  }
  std::vector<std::string> errors;
  cross_check(c, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

Problem make_problem(const RunConfig& c) {
  Problem p;
  p.grid = build_grid(c.grid);
  p.E = FieldSpec::parse(Arity::VectorX, c.E);
  p.q = FieldSpec::parse(Arity::ScalarXV, c.q);
  p.S = FieldSpec::parse(Arity::ScalarTXV, c.S);
  p.g = FieldSpec::parse(Arity::ScalarXV, c.g);
  p.h = FieldSpec::parse(Arity::ScalarTXV, c.h);
  p.T = c.T;
  p.cfl = c.cfl;
  return p;
}

CoefficientRole parse_role(std::string_view text) {
  text = trim(text);
  if (text == "q" || text == "absorption") return CoefficientRole::Absorption;
  if (text == "S" || text == "source") return CoefficientRole::Source;
  throw ConfigError(fmt::format("role must be q or S (got '{}')", text));
}

CarlemanWeight make_weight(const RunConfig& c) {
  return canonical_weight(c.beta, c.a, c.b, c.d, c.delta, c.m, c.v2_lo, c.v2_hi);
}

}  // namespace kinlab
