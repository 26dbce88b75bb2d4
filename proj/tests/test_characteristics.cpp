#include <cmath>
#include <random>

#include "doctest.h"
#include "kinlab/characteristics.hpp"
#include "kinlab/error.hpp"

using namespace kinlab;

namespace {

const Box kUnit{{0.0, 0.0}, {1.0, 1.0}};

FieldSpec constant_force(double e1, double e2) {
  return FieldSpec::vector_expression(std::to_string(e1), std::to_string(e2));
}

// first backward time at which a straight line from x with velocity v hits the unit box boundary
double straight_exit(Vec2 x, Vec2 v) {
  double t = INFINITY;
  if (v.x > 0) t = std::min(t, x.x / v.x);
  if (v.x < 0) t = std::min(t, (x.x - 1.0) / v.x);
  if (v.y > 0) t = std::min(t, x.y / v.y);
  if (v.y < 0) t = std::min(t, (x.y - 1.0) / v.y);
  return t;
}

}  // namespace

TEST_SUITE("characteristics") {
  TEST_CASE("straight line") {
    auto tr = integrate_trajectory(FieldSpec::zero(Arity::VectorX), kUnit, {0.0, {0.5, 0.5}, {1.0, 0.0}},
                                   0.2, 0.01);
    const auto& last = tr.samples.back();
    CHECK(last.s == 0.2);
    CHECK(last.x.x == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(last.x.y == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(last.v == Vec2{1.0, 0.0});
  }

  TEST_CASE("constant force gives a parabola") {
    const double s = 0.3;
    auto tr = integrate_trajectory(constant_force(0.0, -1.0), kUnit, {0.0, {0.5, 0.6}, {0.0, 0.0}}, s, 0.01);
    const auto& last = tr.samples.back();
    CHECK(last.v.y == doctest::Approx(-s).epsilon(1e-13));
    CHECK(last.x.y == doctest::Approx(0.6 - s * s / 2).epsilon(1e-13));
    CHECK(last.x.x == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("zero span gives the anchor only") {
    auto tr = integrate_trajectory(constant_force(0.3, 0.2), kUnit, {0.4, {0.1, 0.2}, {1.0, 2.0}}, 0.4, 0.01);
    REQUIRE(tr.samples.size() == 1);
    CHECK(tr.samples[0].s == 0.4);
    CHECK(tr.samples[0].x == Vec2{0.1, 0.2});
    CHECK_THROWS_AS(integrate_trajectory(constant_force(0, 0), kUnit, {0.0, {0.5, 0.5}, {1, 0}}, 1.0, 0.0),
                    ValidationError);
  }

  TEST_CASE("group property and time reversal") {
    auto E = FieldSpec::builtin(Arity::VectorX, "paper-E");
    const Box wide{{-10.0, -10.0}, {10.0, 10.0}};
    PhasePoint a{0.0, {0.2, 0.3}, {0.7, -0.4}};
    auto direct = integrate_trajectory(E, wide, a, 1.0, 1e-3).samples.back();
    auto half = integrate_trajectory(E, wide, a, 0.4, 1e-3).samples.back();
    auto rest = integrate_trajectory(E, wide, {0.4, half.x, half.v}, 1.0, 1e-3).samples.back();
    CHECK(std::abs(rest.x.x - direct.x.x) < 1e-10);
    CHECK(std::abs(rest.v.y - direct.v.y) < 1e-10);
    auto back = integrate_trajectory(E, wide, {1.0, direct.x, direct.v}, 0.0, 1e-3).samples.back();
    CHECK(std::abs(back.x.x - a.x.x) < 1e-7);
    CHECK(std::abs(back.x.y - a.x.y) < 1e-7);
    CHECK(std::abs(back.v.x - a.v.x) < 1e-7);
    CHECK(std::abs(back.v.y - a.v.y) < 1e-7);
  }

  TEST_CASE("backward exit along a straight line") {
    auto zero = FieldSpec::zero(Arity::VectorX);
    auto r = backward_exit(zero, kUnit, {10.0, {0.5, 0.5}, {1.0, 0.0}});
    CHECK_FALSE(r.never);
    CHECK(r.t_minus == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.x_minus.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.x_minus.y == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.v_minus == Vec2{1.0, 0.0});
    CHECK(r.n_dot_v == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r.normal == Vec2{-1.0, 0.0});

    auto still = backward_exit(zero, kUnit, {10.0, {0.5, 0.5}, {0.0, 0.0}});
    CHECK(still.never);
    auto short_time = backward_exit(zero, kUnit, {0.2, {0.5, 0.5}, {1.0, 0.0}});
    CHECK(short_time.never);
  }

  TEST_CASE("random straight exits match the closed form") {
    auto zero = FieldSpec::zero(Arity::VectorX);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0.05, 0.95), vel(-3.0, 3.0);
    for (int n = 0; n < 200; ++n) {
      Vec2 x{pos(rng), pos(rng)}, v{vel(rng), vel(rng)};
      if (std::abs(v.x) + std::abs(v.y) < 0.1) continue;
      auto r = backward_exit(zero, kUnit, {100.0, x, v});
      REQUIRE_FALSE(r.never);
      CHECK(std::abs(r.t_minus - straight_exit(x, v)) < 1e-8);
    }
  }

  TEST_CASE("backward exit along parabolas") {
    // backward path y(tau) = 0.1 - tau - e2 tau^2 / 2
    auto up = backward_exit(constant_force(0.0, 1.0), kUnit, {10.0, {0.5, 0.1}, {0.0, 1.0}});
    CHECK(std::abs(up.t_minus - (1.0 - std::sqrt(0.8))) < 1e-8);
    CHECK(up.normal == Vec2{0.0, -1.0});
    auto down = backward_exit(constant_force(0.0, -1.0), kUnit, {10.0, {0.5, 0.1}, {0.0, 1.0}});
    CHECK(std::abs(down.t_minus - (std::sqrt(1.2) - 1.0)) < 1e-8);
    CHECK(down.v_minus.y == doctest::Approx(1.0 + down.t_minus).epsilon(1e-10));
  }

  TEST_CASE("oracle values") {
    auto zE = FieldSpec::zero(Arity::VectorX);
    auto zq = FieldSpec::zero(Arity::ScalarXV);
    auto zS = FieldSpec::zero(Arity::ScalarTXV);
    auto zg = FieldSpec::zero(Arity::ScalarXV);
    auto one_h = FieldSpec::expression(Arity::ScalarTXV, "1");
    auto one_S = FieldSpec::expression(Arity::ScalarTXV, "1");
    auto cq = FieldSpec::expression(Arity::ScalarXV, "0.7");
    const Vec2 x{0.3, 0.5}, v{1.0, 0.0};  // t_minus = 0.3

    CHECK(characteristic_oracle(zE, zq, zS, zg, one_h, kUnit, {0.5, x, v}) == doctest::Approx(1.0));
    CHECK(characteristic_oracle(zE, zq, zS, zg, one_h, kUnit, {0.2, x, v}) == 0.0);
    CHECK(characteristic_oracle(zE, cq, zS, zg, one_h, kUnit, {0.5, x, v}) ==
          doctest::Approx(std::exp(-0.7 * 0.3)).epsilon(1e-10));
    CHECK(characteristic_oracle(zE, zq, one_S, zg, zS, kUnit, {0.5, x, v}) ==
          doctest::Approx(0.3).epsilon(1e-12));
    CHECK(characteristic_oracle(zE, zq, one_S, zg, zS, kUnit, {0.2, x, v}) ==
          doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("singularity diagnostic") {
    auto zero = FieldSpec::zero(Arity::VectorX);
    CHECK(singularity_diagnostic(zero, kUnit, {10.0, {0.5, 0.5}, {2.0, 0.0}}) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(singularity_diagnostic(zero, kUnit, {1000.0, {0.0005, 0.5}, {1e-3, 1e-4}}) ==
          doctest::Approx(1e-3).epsilon(1e-9));
    CHECK_THROWS_AS(singularity_diagnostic(zero, kUnit, {10.0, {0.5, 0.5}, {0.0, 0.0}}), ValidationError);
  }

  TEST_CASE("tangential force keeps outgoing exits transversal") {
    // E is tangent on every face of the box: E = (sin(pi x) y, -sin(pi y) x)
    auto E = FieldSpec::vector_expression("sin(pi*x)*y", "-sin(pi*y)*x");
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0), sp(0.3, 2.0);
    for (int n = 0; n < 50; ++n) {
      // anchor on the x = 1 face with outgoing velocity
      PhasePoint a{5.0, {0.999, 0.05 + 0.9 * u01(rng)}, {sp(rng), sp(rng) - 1.0}};
      auto r = backward_exit(E, kUnit, a);
      if (r.never) continue;
      CHECK(std::abs(r.n_dot_v) > 0.0);
    }
  }
}
