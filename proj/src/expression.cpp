#include "kinlab/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "kinlab/error.hpp"

namespace kinlab {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Expression run() {
    parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    if (out_.program_.empty()) fail("empty expression");
    out_.text_ = std::string(text_);
    // depth tracking for the evaluation stack
    int depth = 0;
    for (const auto& in : out_.program_) {
      switch (in.op) {
        case Expression::Op::Const:
        case Expression::Op::Var:
          ++depth;
          break;
        case Expression::Op::Add:
        case Expression::Op::Sub:
        case Expression::Op::Mul:
        case Expression::Op::Div:
        case Expression::Op::Pow:
          --depth;
          break;
        default:
          break;
      }
      out_.max_depth_ = std::max(out_.max_depth_, depth);
    }
    if (out_.is_constant()) {
      const double v = out_.evaluate({});
      out_.program_ = {{Expression::Op::Const, 0, v}};
      out_.max_depth_ = 1;
    }
    return std::move(out_);
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(std::string_view what) const {
    throw ConfigError(fmt::format("expression '{}': {} at column {}", text_, what, pos_ + 1));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, int slot = 0, double value = 0.0) { out_.program_.push_back({op, slot, value}); }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        emit(Op::Add);
      } else if (accept('-')) {
        parse_product();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::Neg);
      return;
    }
    if (accept('+')) {
      parse_unary();
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();  // right associative
      emit(Op::Pow);
    }
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double value = 0.0;
      const char* begin = text_.data() + pos_;
      const char* end = text_.data() + text_.size();
      auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc()) fail("malformed number");
      pos_ += std::size_t(ptr - begin);
      emit(Op::Const, 0, value);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      if (name == "pi") {
        emit(Op::Const, 0, std::numbers::pi);
        return;
      }
      static constexpr std::pair<std::string_view, Variable> vars[] = {
          {"t", Variable::T}, {"x", Variable::X}, {"y", Variable::Y},
          {"vx", Variable::VX}, {"vy", Variable::VY}};
      for (auto [vname, var] : vars) {
        if (name == vname) {
          emit(Op::Var, static_cast<int>(var));
          out_.variables_ |= variable_bit(var);
          return;
        }
      }
      static constexpr std::pair<std::string_view, Op> funcs[] = {
          {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"sqrt", Op::Sqrt}};
      for (auto [fname, op] : funcs) {
        if (name == fname) {
          if (!accept('(')) fail(fmt::format("expected '(' after {}", fname));
          parse_sum();
          if (!accept(')')) fail("expected ')'");
          emit(op);
          return;
        }
      }
      pos_ = start;
      fail(fmt::format("unknown identifier '{}'", name));
    }
    fail(fmt::format("unexpected character '{}'", c));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Expression out_;
};

Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

Expression Expression::constant(double value) {
  Expression e;
  e.program_ = {{Op::Const, 0, value}};
  e.max_depth_ = 1;
  e.text_ = fmt::format("{:.17g}", value);
  return e;
}

double Expression::evaluate(const VariableValues& values) const {
  double stack[64];
  stack[0] = 0.0;
  double* heap = nullptr;
  std::vector<double> big;
  if (max_depth_ > 64) {
    big.resize(std::size_t(max_depth_));
    heap = big.data();
  }
  double* s = heap ? heap : stack;
  int top = -1;
  for (const auto& in : program_) {
    switch (in.op) {
      case Op::Const:
        s[++top] = in.value;
        break;
      case Op::Var:
        s[++top] = values[std::size_t(in.slot)];
        break;
      case Op::Add:
        s[top - 1] += s[top];
        --top;
        break;
      case Op::Sub:
        s[top - 1] -= s[top];
        --top;
        break;
      case Op::Mul:
        s[top - 1] *= s[top];
        --top;
        break;
      case Op::Div:
        s[top - 1] /= s[top];
        --top;
        break;
      case Op::Pow: {
        const double e = s[top];
        const double b = s[top - 1];
        --top;
        if (e == 2.0) {
          s[top] = b * b;
        } else {
          s[top] = std::pow(b, e);
        }
        break;
      }
      case Op::Neg:
        s[top] = -s[top];
        break;
      case Op::Sin:
        s[top] = std::sin(s[top]);
        break;
      case Op::Cos:
        s[top] = std::cos(s[top]);
        break;
      case Op::Exp:
        s[top] = std::exp(s[top]);
        break;
      case Op::Sqrt:
        s[top] = std::sqrt(s[top]);
        break;
    }
  }
  return s[0];
}

}  // namespace kinlab
