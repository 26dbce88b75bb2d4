#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kinlab {

/// Variables an expression may reference, in evaluation-slot order.
enum class Variable : int { T = 0, X = 1, Y = 2, VX = 3, VY = 4 };

inline constexpr unsigned variable_bit(Variable v) { return 1u << static_cast<int>(v); }

using VariableValues = std::array<double, 5>;

/// Closed-form field formula over (t, x, y, vx, vy).
///
/// Grammar: sums, differences, products, quotients, powers (^), unary minus,
/// numeric literals, the constant `pi`, the variables t x y vx vy and the
/// functions sin cos exp sqrt. Parsed once into a postfix program.
class Expression {
 public:
  /// Throws ConfigError naming the offending column.
  static Expression parse(std::string_view text);
  static Expression constant(double value);

  double evaluate(const VariableValues& values) const;

  /// Bitmask of referenced variables (see variable_bit).
  unsigned variables() const { return variables_; }
  bool is_constant() const { return variables_ == 0; }
  const std::string& text() const { return text_; }

 private:
  enum class Op : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt };
  struct Instr {
    Op op;
    int slot = 0;
    double value = 0.0;
  };
  friend class ExpressionParser;

  std::vector<Instr> program_;
  unsigned variables_ = 0;
  int max_depth_ = 0;
  std::string text_;
};

}  // namespace kinlab
