#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "kinlab/carleman.hpp"
#include "kinlab/error.hpp"

using namespace kinlab;

namespace {

const Box kOmega{{0.5, 0.0}, {1.5, 1.0}};

CarlemanWeight example_weight() { return canonical_weight(0.5, 1.0, 4.0, 0.5, std::sqrt(2.0), 0.0); }

CarlemanQuadrature coarse() {
  CarlemanQuadrature q;
  q.uniform_cells = 4;
  q.graded_levels = 6;
  q.flat_cells = 3;
  return q;
}

class Zero : public PhaseFunction {
 public:
  const std::string& name() const override { return name_; }
  double value(double, Vec2, Vec2) const override { return 0.0; }
  std::array<double, 6> jet(double, Vec2, Vec2) const override { return {}; }

 private:
  std::string name_ = "zero";
};

// u = x1 + 2 t v1 - x2 v2^2, smooth with simple derivatives
class Poly : public PhaseFunction {
 public:
  const std::string& name() const override { return name_; }
  double value(double t, Vec2 x, Vec2 v) const override { return x.x + 2 * t * v.x - x.y * v.y * v.y; }
  std::array<double, 6> jet(double t, Vec2 x, Vec2 v) const override {
    return {value(t, x, v), 2 * v.x, 1.0, -v.y * v.y, 2 * t, -2 * x.y * v.y};
  }

 private:
  std::string name_ = "poly";
};

}  // namespace

TEST_SUITE("carleman") {
  TEST_CASE("canonical weight inequalities") {
    auto w = example_weight();
    CHECK(w.v1_lo() == 1.0);
    CHECK(w.v1_hi() == 2.0);
    auto zero = FieldSpec::zero(Arity::VectorX);
    CHECK(w.psi(zero, {1.0, 0.5}, {1.0, 0.0}) == doctest::Approx(0.5));
    CHECK(w.psi(zero, {1.0, 0.5}, {2.0, 0.0}) == doctest::Approx(3.5));
    CHECK_THROWS_AS(canonical_weight(0.2, 1.0, 4.0, 0.5, 1.0, 0.4), ValidationError);
    CHECK_THROWS_AS(canonical_weight(0.5, 4.0, 1.0, 0.5, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(canonical_weight(-0.5, 1.0, 4.0, 0.5, 1.0, 0.0), ValidationError);
    CHECK_NOTHROW(canonical_weight(0.2, 1.0, 4.0, 0.5, 1.0, 0.39));
  }

  TEST_CASE("hypothesis holds for the canonical example at T = 6") {
    auto r = validate_hypothesis(example_weight(), kOmega, FieldSpec::zero(Arity::VectorX), 6.0);
    CHECK(r.items_pass());
    CHECK(r.first_failure().empty());
    CHECK(r.gamma0 == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.R == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(r.r == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.T_min == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(r.conservative_field);
    CHECK(r.domain_offset_ok);
    CHECK(r.diameter_ok);
  }

  TEST_CASE("short horizon fails item 2") {
    auto r = validate_hypothesis(example_weight(), kOmega, FieldSpec::zero(Arity::VectorX), 4.0);
    CHECK_FALSE(r.item2);
    CHECK(r.first_failure().find("item (2)") != std::string::npos);
  }

  TEST_CASE("large beta fails item 3") {
    CarlemanWeight w = example_weight();
    w.beta = 5.0;
    auto r = validate_hypothesis(w, kOmega, FieldSpec::zero(Arity::VectorX), 6.0);
    CHECK_FALSE(r.item3);
    CHECK(r.gamma0 == doctest::Approx(-4.0).epsilon(1e-9));
  }

  TEST_CASE("curl detection") {
    auto w = example_weight();
    auto r = validate_hypothesis(w, kOmega, FieldSpec::builtin(Arity::VectorX, "paper-E"), 6.0);
    CHECK_FALSE(r.conservative_field);
    CHECK(r.curl_max > 0.1);
    auto grad = validate_hypothesis(w, kOmega, FieldSpec::vector_expression("-0.01*y", "-0.01*x"), 6.0);
    CHECK(grad.conservative_field);
    CHECK(grad.potential_residual < 1e-6);
  }

  TEST_CASE("zero function holds for every s") {
    std::vector<double> s{1, 2, 4, 8};
    auto rep = carleman_residual(Zero{}, example_weight(), kOmega, FieldSpec::zero(Arity::VectorX),
                                 FieldSpec::zero(Arity::ScalarXV), 6.0, 0.5, 0.0, s, coarse());
    REQUIRE(rep.samples.size() == 4);
    for (auto& x : rep.samples) {
      CHECK(x.hold);
      CHECK(x.lhs == 0.0);
      CHECK(x.rhs == 0.0);
    }
    REQUIRE(rep.s_star.has_value());
    CHECK(*rep.s_star == 1.0);
  }

  TEST_CASE("catalog functions reach s*") {
    CarlemanSupport sup{kOmega, 1.0, 2.0, -1.0, 1.0, 6.0};
    auto cat = carleman_catalog(sup);
    REQUIRE(cat.size() == 5);
    std::vector<double> s{1, 4, 16, 64};
    auto zero = FieldSpec::zero(Arity::VectorX);
    auto q0 = FieldSpec::zero(Arity::ScalarXV);
    auto rep = carleman_residual(*cat[0], example_weight(), kOmega, zero, q0, 6.0, 0.5, 0.0, s, coarse());
    CHECK(rep.s_star.has_value());
    auto q1 = FieldSpec::expression(Arity::ScalarXV, "1");
    auto rep1 = carleman_residual(*cat[0], example_weight(), kOmega, zero, q1, 6.0, 0.5, 0.0, s, coarse());
    REQUIRE(rep1.s_star.has_value());
    CHECK(*rep1.s_star >= *rep.s_star);
  }

  TEST_CASE("functions leaking outside the velocity slab are rejected") {
    std::vector<double> s{1};
    CHECK_THROWS_AS(carleman_residual(*constant_function(1.0), example_weight(), kOmega,
                                      FieldSpec::zero(Arity::VectorX), FieldSpec::zero(Arity::ScalarXV),
                                      6.0, 0.5, 0.0, s, coarse()),
                    ValidationError);
  }

  TEST_CASE("conjugated operator") {
    auto w = example_weight();
    auto zero = FieldSpec::zero(Arity::VectorX);
    Poly u;
    const double t = 1.3;
    const Vec2 x{0.8, 0.4}, v{1.5, 0.3};
    auto at0 = weighted_operator_apply(u, w, zero, 0.0, t, x, v);
    CHECK(at0.lw == doctest::Approx(at0.p0u).epsilon(1e-12));
    const double exact_p0u = 2 * v.x + v.x * 1.0 + v.y * (-v.y * v.y);
    CHECK(at0.p0u == doctest::Approx(exact_p0u).epsilon(1e-8));

    auto one = constant_function(1.0);
    const double s = 3.0;
    auto c = weighted_operator_apply(*one, w, zero, s, t, x, v);
    CHECK(c.lw == doctest::Approx(-s * w.psi(zero, x, v)).epsilon(1e-7));

    auto E = FieldSpec::vector_expression("0.1*y", "0.1*x");
    auto gen = weighted_operator_apply(u, w, E, s, t, x, v);
    CHECK(gen.lw == doctest::Approx(gen.identity).epsilon(1e-6));
  }
}
