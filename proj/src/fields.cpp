#include "kinlab/fields.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

namespace {

constexpr const char* kPaperE1 = "0.3+0.1*cos(2*pi*x)*sin(4*pi*y)";
constexpr const char* kPaperE2 = "0.2+0.15*sin(2*pi*x)*cos(4*pi*y)";
constexpr const char* kPaperProfile = "0.3*sin(2*pi*x)*cos(4*pi*y)+0.4";

unsigned allowed_variables(Arity arity) {
  const unsigned xy = variable_bit(Variable::X) | variable_bit(Variable::Y);
  const unsigned v = variable_bit(Variable::VX) | variable_bit(Variable::VY);
  switch (arity) {
    case Arity::ScalarX:
    case Arity::VectorX:
      return xy;
    case Arity::ScalarXV:
      return xy | v;
    case Arity::ScalarTXV:
      return xy | v | variable_bit(Variable::T);
  }
  return 0;
}

bool takes_time(Arity a) { return a == Arity::ScalarTXV; }
bool takes_velocity(Arity a) { return a == Arity::ScalarXV || a == Arity::ScalarTXV; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Expression checked_expression(Arity arity, std::string_view text) {
  Expression e = Expression::parse(text);
  const unsigned extra = e.variables() & ~allowed_variables(arity);
  if (extra != 0) {
    static constexpr const char* names[] = {"t", "x", "y", "vx", "vy"};
    std::string list;
    for (int b = 0; b < 5; ++b) {
      if (extra & (1u << b)) {
        if (!list.empty()) list += ", ";
        list += names[b];
      }
    }
    throw ConfigError(fmt::format("expression '{}' uses {} which a {} field does not take", text,
                                  list, to_string(arity)));
  }
  return e;
}

std::string format_scale(double s) { return fmt::format("{:.17g}", s); }

}  // namespace

const char* to_string(Arity arity) {
  switch (arity) {
    case Arity::ScalarX:
      return "scalar-on-x";
    case Arity::ScalarXV:
      return "scalar-on-xv";
    case Arity::ScalarTXV:
      return "scalar-on-txv";
    case Arity::VectorX:
      return "vector-on-x";
  }
  return "?";
}

const char* to_string(CoefficientRole role) {
  return role == CoefficientRole::Absorption ? "absorption" : "source";
}

FieldTable::FieldTable(std::vector<std::vector<double>> axes, int components,
                       std::vector<double> values)
    : axes_(std::move(axes)), components_(components), values_(std::move(values)) {
  std::size_t nodes = 1;
  for (const auto& a : axes_) {
    if (a.size() < 2) throw ConfigError("tabulated field needs at least two nodes per axis");
    if (!std::is_sorted(a.begin(), a.end()) || std::adjacent_find(a.begin(), a.end()) != a.end())
      throw ConfigError("tabulated field axes must be strictly increasing");
    nodes *= a.size();
  }
  if (values_.size() != nodes * std::size_t(components_))
    throw ConfigError(fmt::format("tabulated field has {} values, expected {}", values_.size(),
                                  nodes * std::size_t(components_)));
}

FieldTable FieldTable::load_csv(const std::string& path, int naxes, int components) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open tabulated field '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(fmt::format("'{}': empty file", path));
  const std::size_t ncols = std::size_t(naxes + components);
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto t = trim(cell);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(fmt::format("'{}' line {}: malformed number '{}'", path, lineno, t));
      row.push_back(v);
    }
    if (row.size() != ncols)
      throw ConfigError(fmt::format("'{}' line {}: expected {} columns, got {}", path, lineno,
                                    ncols, row.size()));
    rows.push_back(std::move(row));
  }
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(naxes));
  for (int a = 0; a < naxes; ++a) {
    for (const auto& r : rows) axes[a].push_back(r[a]);
    std::sort(axes[a].begin(), axes[a].end());
    axes[a].erase(std::unique(axes[a].begin(), axes[a].end()), axes[a].end());
  }
  std::size_t nodes = 1;
  for (const auto& a : axes) nodes *= a.size();
  if (rows.size() != nodes)
    throw ConfigError(fmt::format("'{}': {} rows do not form a full tensor grid of {} nodes", path,
                                  rows.size(), nodes));
  std::vector<double> values(nodes * std::size_t(components),
                             std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    std::size_t flat = 0;
    for (int a = 0; a < naxes; ++a) {
      const auto pos = std::lower_bound(axes[a].begin(), axes[a].end(), r[a]) - axes[a].begin();
      flat = flat * axes[a].size() + std::size_t(pos);
    }
    for (int c = 0; c < components; ++c) values[flat * components + c] = r[naxes + c];
  }
  for (double v : values)
    if (std::isnan(v)) throw ConfigError(fmt::format("'{}': duplicate or missing grid nodes", path));
  return FieldTable(std::move(axes), components, std::move(values));
}

void FieldTable::interpolate(std::span<const double> point, std::span<double> out) const {
  const std::size_t d = axes_.size();
  std::array<std::size_t, 4> lo{};
  std::array<double, 4> w{};
  for (std::size_t a = 0; a < d; ++a) {
    const auto& ax = axes_[a];
    const double p = point[a];
    if (!(p >= ax.front() && p <= ax.back()))
      throw ValidationError(fmt::format("point {} on axis {} lies outside the table range [{}, {}]",
                                        p, a, ax.front(), ax.back()));
    std::size_t i = std::size_t(std::upper_bound(ax.begin(), ax.end(), p) - ax.begin());
    i = std::clamp<std::size_t>(i, 1, ax.size() - 1) - 1;
    lo[a] = i;
    w[a] = (p - ax[i]) / (ax[i + 1] - ax[i]);
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < d; ++a) {
      const bool up = corner & (1u << a);
      weight *= up ? w[a] : 1.0 - w[a];
      flat = flat * axes_[a].size() + lo[a] + (up ? 1 : 0);
    }
    if (weight == 0.0) continue;
    for (int c = 0; c < components_; ++c) out[c] += weight * values_[flat * components_ + c];
  }
}

FieldSpec FieldSpec::zero(Arity arity) {
  FieldSpec f;
  f.arity_ = arity;
  f.kind_ = FieldKind::Builtin;
  f.name_ = "zero";
  const int n = arity == Arity::VectorX ? 2 : 1;
  for (int i = 0; i < n; ++i) f.components_.push_back(Expression::constant(0.0));
  return f;
}

FieldSpec FieldSpec::expression(Arity arity, std::string_view text) {
  if (arity == Arity::VectorX)
    throw ConfigError(fmt::format("vector field needs two components, got '{}'", text));
  FieldSpec f;
  f.arity_ = arity;
  f.kind_ = FieldKind::Expression;
  f.components_.push_back(checked_expression(arity, text));
  return f;
}

FieldSpec FieldSpec::vector_expression(std::string_view first, std::string_view second) {
  FieldSpec f;
  f.arity_ = Arity::VectorX;
  f.kind_ = FieldKind::Expression;
  f.components_.push_back(checked_expression(Arity::VectorX, first));
  f.components_.push_back(checked_expression(Arity::VectorX, second));
  return f;
}

FieldSpec FieldSpec::builtin(Arity arity, std::string_view name) {
  name = trim(name);
  if (name == "zero") return zero(arity);
  if (name == "paper-E") {
    if (arity != Arity::VectorX)
      throw ConfigError(fmt::format("builtin paper-E is a vector field, not {}", to_string(arity)));
    FieldSpec f = vector_expression(kPaperE1, kPaperE2);
    f.kind_ = FieldKind::Builtin;
    f.name_ = "paper-E";
    return f;
  }
  for (std::string_view base : {"paper-q", "paper-S"}) {
    if (!name.starts_with(base)) continue;
    std::string_view rest = name.substr(base.size());
    double eta = 1.0;
    if (!rest.empty()) {
      if (rest.front() != '(' || rest.back() != ')')
        throw ConfigError(fmt::format("malformed builtin '{}'", name));
      const auto inner = trim(rest.substr(1, rest.size() - 2));
      auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), eta);
      if (ec != std::errc() || ptr != inner.data() + inner.size())
        throw ConfigError(fmt::format("malformed eta in builtin '{}'", name));
    }
    if (arity == Arity::VectorX)
      throw ConfigError(fmt::format("builtin {} is scalar, not a vector field", base));
    FieldSpec f = expression(arity, kPaperProfile);
    f.kind_ = FieldKind::Builtin;
    f.name_ = std::string(base);
    f.scale_ = eta;
    return f;
  }
  throw ConfigError(fmt::format("unknown builtin field '{}'", name));
}

FieldSpec FieldSpec::tabulated(Arity arity, std::shared_ptr<const FieldTable> table,
                               std::string source) {
  const std::size_t want_axes = takes_velocity(arity) ? 4 : 2;
  const int want_comp = arity == Arity::VectorX ? 2 : 1;
  if (table->dimension() != want_axes || table->components() != want_comp)
    throw ConfigError(fmt::format("table '{}' has {} axes and {} components, a {} field needs {} and {}",
                                  source, table->dimension(), table->components(),
                                  to_string(arity), want_axes, want_comp));
  FieldSpec f;
  f.arity_ = arity;
  f.kind_ = FieldKind::Tabulated;
  f.name_ = std::move(source);
  f.table_ = std::move(table);
  return f;
}

FieldSpec FieldSpec::parse(Arity arity, std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ConfigError("empty field definition");
  if (text.starts_with("csv:")) {
    const std::string path(trim(text.substr(4)));
    const int naxes = takes_velocity(arity) ? 4 : 2;
    const int comps = arity == Arity::VectorX ? 2 : 1;
    auto table = std::make_shared<const FieldTable>(FieldTable::load_csv(path, naxes, comps));
    return tabulated(arity, std::move(table), path);
  }
  if (text == "zero" || text.starts_with("paper-")) return builtin(arity, text);
  if (arity == Arity::VectorX) {
    if (text.front() != '[' || text.back() != ']')
      throw ConfigError(fmt::format("vector field '{}' must be written [e1, e2]", text));
    const auto inner = text.substr(1, text.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos || inner.find(',', comma + 1) != std::string_view::npos)
      throw ConfigError(fmt::format("vector field '{}' must have exactly two components", text));
    return vector_expression(trim(inner.substr(0, comma)), trim(inner.substr(comma + 1)));
  }
  return expression(arity, text);
}

FieldSpec FieldSpec::scaled(double factor) const {
  FieldSpec f = *this;
  f.scale_ *= factor;
  return f;
}

std::string FieldSpec::source() const {
  std::string base;
  switch (kind_) {
    case FieldKind::Builtin:
      if (name_ == "paper-q" || name_ == "paper-S")
        return scale_ == 1.0 ? name_ : fmt::format("{}({})", name_, format_scale(scale_));
      base = name_;
      break;
    case FieldKind::Tabulated:
      base = "csv:" + name_;
      break;
    case FieldKind::Expression:
      if (arity_ == Arity::VectorX) {
        base = fmt::format("[{}, {}]", components_[0].text(), components_[1].text());
      } else {
        base = components_[0].text();
      }
      break;
  }
  if (scale_ == 1.0) return base;
  // Scaled formulas and tables have no direct config syntax; express them
  // as a formula when possible.
  if (kind_ == FieldKind::Expression || name_ == "paper-E") {
    if (arity_ == Arity::VectorX)
      return fmt::format("[{}*({}), {}*({})]", format_scale(scale_), components_[0].text(),
                         format_scale(scale_), components_[1].text());
    return fmt::format("{}*({})", format_scale(scale_), components_[0].text());
  }
  return base;
}

std::optional<std::string> FieldSpec::formula() const {
  if (kind_ == FieldKind::Tabulated || arity_ == Arity::VectorX) return std::nullopt;
  if (scale_ == 1.0) return "(" + components_[0].text() + ")";
  return fmt::format("({}*({}))", format_scale(scale_), components_[0].text());
}

bool FieldSpec::is_zero() const {
  if (scale_ == 0.0) return true;
  if (kind_ == FieldKind::Tabulated) return false;
  for (const auto& c : components_)
    if (!(c.is_constant() && c.evaluate({}) == 0.0)) return false;
  return true;
}

bool FieldSpec::depends_on_time() const {
  if (kind_ == FieldKind::Tabulated) return false;
  for (const auto& c : components_)
    if (c.variables() & variable_bit(Variable::T)) return true;
  return false;
}

bool FieldSpec::depends_on_velocity() const {
  if (kind_ == FieldKind::Tabulated) return takes_velocity(arity_);
  const unsigned v = variable_bit(Variable::VX) | variable_bit(Variable::VY);
  for (const auto& c : components_)
    if (c.variables() & v) return true;
  return false;
}

double FieldSpec::at(double t, Vec2 x, Vec2 v) const {
  if (table_) {
    double out = 0.0;
    if (takes_velocity(arity_)) {
      const double p[4] = {x.x, x.y, v.x, v.y};
      table_->interpolate(p, {&out, 1});
    } else {
      const double p[2] = {x.x, x.y};
      table_->interpolate(p, {&out, 1});
    }
    return scale_ * out;
  }
  return scale_ * components_[0].evaluate({t, x.x, x.y, v.x, v.y});
}

Vec2 FieldSpec::vector_at(Vec2 x) const {
  if (table_) {
    double out[2];
    const double p[2] = {x.x, x.y};
    table_->interpolate(p, out);
    return {scale_ * out[0], scale_ * out[1]};
  }
  const VariableValues vals{0.0, x.x, x.y, 0.0, 0.0};
  return {scale_ * components_[0].evaluate(vals), scale_ * components_[1].evaluate(vals)};
}

namespace {

void check_point(const FieldSpec& f, const EvalPoint& p) {
  const bool want_t = takes_time(f.arity());
  const bool want_v = takes_velocity(f.arity());
  if (p.t.has_value() != want_t || p.v.has_value() != want_v)
    throw ValidationError(fmt::format("{} field evaluated at a point with{} t and with{} v",
                                      to_string(f.arity()), p.t ? "" : "out",
                                      p.v ? "" : "out"));
}

}  // namespace

double FieldSpec::value(const EvalPoint& p) const {
  if (arity_ == Arity::VectorX)
    throw ValidationError("vector field evaluated as a scalar");
  check_point(*this, p);
  return at(p.t.value_or(0.0), p.x, p.v.value_or(Vec2{}));
}

Vec2 FieldSpec::vector_value(const EvalPoint& p) const {
  if (arity_ != Arity::VectorX)
    throw ValidationError(fmt::format("{} field evaluated as a vector", to_string(arity_)));
  check_point(*this, p);
  return vector_at(p.x);
}

FieldValue eval_field(const FieldSpec& spec, const EvalPoint& p) {
  if (spec.arity() == Arity::VectorX) return spec.vector_value(p);
  return spec.value(p);
}

FieldSpec family_member(const CoefficientFamily& family, int eta) {
  if (eta < 1) throw ValidationError(fmt::format("eta must be a positive integer (got {})", eta));
  return family.profile.scaled(double(eta));
}

std::vector<double> sample_cells(const FieldSpec& spec, const PhaseGrid& grid, double t) {
  std::vector<double> out(grid.cell_count());
  std::size_t c = 0;
  for (int i = 0; i < grid.nx(); ++i)
    for (int j = 0; j < grid.ny(); ++j)
      for (int k = 0; k < grid.nvx(); ++k)
        for (int l = 0; l < grid.nvy(); ++l)
          out[c++] = spec.at(t, {grid.x(i), grid.y(j)}, {grid.vx(k), grid.vy(l)});
  return out;
}

double field_l2_norm(const FieldSpec& spec, const PhaseGrid& grid, double t) {
  return std::sqrt(phase_norm_sq(grid, sample_cells(spec, grid, t)));
}

AdmissibilityReport check_admissibility(const FieldSpec& E, const FieldSpec& h, const FieldSpec& g,
                                        const PhaseGrid& grid, double tolerance, int refinement) {
  AdmissibilityReport r;
  r.tolerance = tolerance;
  const Box& box = grid.space();
  const int mx = refinement * grid.nx();
  const int my = refinement * grid.ny();
  auto xs = [&](int i) { return box.lo.x + (box.hi.x - box.lo.x) * i / mx; };
  auto ys = [&](int j) { return box.lo.y + (box.hi.y - box.lo.y) * j / my; };

  // boundary samples with outward normals, endpoints included
  std::vector<std::pair<Vec2, Vec2>> boundary;
  for (int j = 0; j <= my; ++j) {
    boundary.push_back({{box.lo.x, ys(j)}, {-1.0, 0.0}});
    boundary.push_back({{box.hi.x, ys(j)}, {1.0, 0.0}});
  }
  for (int i = 0; i <= mx; ++i) {
    boundary.push_back({{xs(i), box.lo.y}, {0.0, -1.0}});
    boundary.push_back({{xs(i), box.hi.y}, {0.0, 1.0}});
  }
  for (const auto& [x, n] : boundary)
    r.max_normal_force = std::max(r.max_normal_force, std::abs(dot(n, E.vector_at(x))));
  r.tangency_ok = r.max_normal_force <= tolerance;

  double sup_e = 0.0;
  double sup_grad = 0.0;
  const double hx = (box.hi.x - box.lo.x) / mx;
  const double hy = (box.hi.y - box.lo.y) / my;
  for (int i = 0; i <= mx; ++i) {
    for (int j = 0; j <= my; ++j) {
      const Vec2 x{xs(i), ys(j)};
      const Vec2 e = E.vector_at(x);
      sup_e = std::max({sup_e, std::abs(e.x), std::abs(e.y)});
      const Vec2 xp{std::min(x.x + hx, box.hi.x), x.y}, xm{std::max(x.x - hx, box.lo.x), x.y};
      const Vec2 yp{x.x, std::min(x.y + hy, box.hi.y)}, ym{x.x, std::max(x.y - hy, box.lo.y)};
      const Vec2 dex = (1.0 / (xp.x - xm.x)) * (E.vector_at(xp) - E.vector_at(xm));
      const Vec2 dey = (1.0 / (yp.y - ym.y)) * (E.vector_at(yp) - E.vector_at(ym));
      sup_grad = std::max({sup_grad, std::abs(dex.x), std::abs(dex.y), std::abs(dey.x),
                           std::abs(dey.y)});
    }
  }
  r.force_c1_bound = sup_e + sup_grad;

  for (const auto& f : classify_boundary(grid).incoming) {
    const double gv = g.at(0.0, f.point, f.velocity);
    const double hv = h.at(0.0, f.point, f.velocity);
    r.compatibility_residual = std::max(r.compatibility_residual, std::abs(gv - hv));
  }
  r.compatibility_ok = r.compatibility_residual <= tolerance;

  if (!r.tangency_ok)
    spdlog::warn("force field is not tangent to the boundary: max |n.E| = {:.3e}",
                 r.max_normal_force);
  if (!r.compatibility_ok)
    spdlog::warn("initial and inflow data disagree on the incoming boundary: max |g - h(0)| = {:.3e}",
                 r.compatibility_residual);
  return r;
}

}  // namespace kinlab
