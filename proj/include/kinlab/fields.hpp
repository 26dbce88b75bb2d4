#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kinlab/expression.hpp"
#include "kinlab/phase_geometry.hpp"

namespace kinlab {

/// Which arguments a field takes and whether it is vector valued.
enum class Arity { ScalarX, ScalarXV, ScalarTXV, VectorX };

enum class FieldKind { Builtin, Expression, Tabulated };

const char* to_string(Arity arity);

/// Evaluation point; `t` and `v` are present exactly when the field's arity
/// takes them.
struct EvalPoint {
  std::optional<double> t;
  Vec2 x;
  std::optional<Vec2> v;
};

/// Regular tensor-product table over 2 (x, y) or 4 (x, y, vx, vy) axes with
/// one or two value components, interpolated multilinearly.
class FieldTable {
 public:
  FieldTable(std::vector<std::vector<double>> axes, int components, std::vector<double> values);

  /// Reads a CSV with header `x,y[,vx,vy],value` (or two value columns for
  /// vector fields). Throws IoError / ConfigError.
  static FieldTable load_csv(const std::string& path, int axes, int components);

  std::size_t dimension() const { return axes_.size(); }
  int components() const { return components_; }
  /// Throws ValidationError outside the tabulated domain.
  void interpolate(std::span<const double> point, std::span<double> out) const;

 private:
  std::vector<std::vector<double>> axes_;
  int components_;
  std::vector<double> values_;
};

/// Immutable, reentrant definition of one of E, q, S, g, h.
class FieldSpec {
 public:
  /// Identically zero field of the given arity.
  static FieldSpec zero(Arity arity);
  /// Scalar formula; throws ConfigError if it references variables outside
  /// the arity.
  static FieldSpec expression(Arity arity, std::string_view text);
  static FieldSpec vector_expression(std::string_view first, std::string_view second);
  /// `paper-E`, `paper-q(eta)`, `paper-S(eta)` (eta defaults to 1), `zero`.
  static FieldSpec builtin(Arity arity, std::string_view name);
  static FieldSpec tabulated(Arity arity, std::shared_ptr<const FieldTable> table, std::string source);
  /// Config-file syntax: a builtin name, `csv:<path>`, `[e1, e2]` for vector
  /// fields, or a scalar formula.
  static FieldSpec parse(Arity arity, std::string_view text);

  /// `factor` times this field.
  FieldSpec scaled(double factor) const;

  Arity arity() const { return arity_; }
  FieldKind kind() const { return kind_; }
  /// Round-trippable config text.
  std::string source() const;
  /// Scalar formula including the scale factor, when the field has one
  /// (formulas and formula builtins; not tables or vector fields).
  std::optional<std::string> formula() const;
  double scale() const { return scale_; }
  bool is_zero() const;
  bool depends_on_time() const;
  bool depends_on_velocity() const;

  /// Checked evaluation; throws ValidationError on arity mismatch.
  double value(const EvalPoint& p) const;
  Vec2 vector_value(const EvalPoint& p) const;

  /// Unchecked fast paths used by the solvers.
  double at(double t, Vec2 x, Vec2 v) const;
  double at(Vec2 x, Vec2 v) const { return at(0.0, x, v); }
  Vec2 vector_at(Vec2 x) const;

 private:
  FieldSpec() = default;

  Arity arity_ = Arity::ScalarX;
  FieldKind kind_ = FieldKind::Expression;
  std::string name_;  // builtin name or csv path, empty for formulas
  std::vector<Expression> components_;
  std::shared_ptr<const FieldTable> table_;
  double scale_ = 1.0;
};

using FieldValue = std::variant<double, Vec2>;

FieldValue eval_field(const FieldSpec& spec, const EvalPoint& p);

enum class CoefficientRole { Absorption, Source };

const char* to_string(CoefficientRole role);

/// eta -> eta * profile.
struct CoefficientFamily {
  FieldSpec profile = FieldSpec::zero(Arity::ScalarXV);
  CoefficientRole role = CoefficientRole::Absorption;
};

/// Throws ValidationError when eta < 1.
FieldSpec family_member(const CoefficientFamily& family, int eta);

/// Midpoint-rule L2(Omega x V) norm of a scalar-on-xv (or time slice of a
/// scalar-on-txv) field over the grid.
double field_l2_norm(const FieldSpec& spec, const PhaseGrid& grid, double t = 0.0);

/// Samples a scalar field on every phase cell center.
std::vector<double> sample_cells(const FieldSpec& spec, const PhaseGrid& grid, double t = 0.0);

struct AdmissibilityReport {
  double max_normal_force = 0.0;  // max |n.E| over boundary samples
  double force_c1_bound = 0.0;    // sup|E| + sup|grad E| estimate
  double compatibility_residual = 0.0;  // max over Gamma_- of |g - h(0)|
  bool tangency_ok = true;
  bool compatibility_ok = true;
  double tolerance = 1e-8;
};

/// Report-only check of n.E = 0, C1 size of E and g = h(0) on Gamma_-.
/// Sampling runs at `refinement` times the grid density.
AdmissibilityReport check_admissibility(const FieldSpec& E, const FieldSpec& h, const FieldSpec& g,
                                        const PhaseGrid& grid, double tolerance = 1e-8,
                                        int refinement = 4);

}  // namespace kinlab
