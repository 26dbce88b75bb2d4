#include <cmath>
#include <vector>

#include "doctest.h"
#include "kinlab/error.hpp"
#include "kinlab/functionals.hpp"

using namespace kinlab;

namespace {

PhaseGrid grid_of(int n, int nv, double vmax) {
  GridConfig c;
  c.velocity = {{-vmax, -vmax}, {vmax, vmax}};
  c.nx = c.ny = n;
  c.nvx = c.nvy = nv;
  return build_grid(c);
}

}  // namespace

TEST_SUITE("functionals") {
  TEST_CASE("green identity vanishes for zero and constant functions") {
    auto g = grid_of(6, 4, 2.0);
    auto E = FieldSpec::zero(Arity::VectorX);
    std::vector<double> s{0.25, 0.5, 1.0};
    auto zero = constant_function(0.0);
    CHECK(green_identity_residual(*zero, E, g, 1.0, 4, s).max_residual() == 0.0);
    auto one = constant_function(1.0);
    CHECK(green_identity_residual(*one, E, g, 1.0, 4, s).max_residual() <= 1e-12);
    std::vector<double> off{0.3};
    CHECK_THROWS_AS(green_identity_residual(*one, E, g, 1.0, 4, off), ValidationError);
  }

  TEST_CASE("green identity residual shrinks under refinement") {
    auto E = FieldSpec::builtin(Arity::VectorX, "paper-E");
    auto u = green_test_function();
    std::vector<double> s{1.0};
    double prev = INFINITY;
    for (int n : {8, 16}) {
      auto r = green_identity_residual(*u, E, grid_of(n, n, 4.0), 1.0, n, s);
      CHECK(r.max_residual() < prev);
      prev = r.max_residual();
    }
  }

  TEST_CASE("energy check on the zero solution") {
    Problem p{grid_of(4, 4, 2.0)};
    p.T = 0.2;
    auto rec = solve(p);
    auto rep = energy_estimate_check(rec.diagnostics, 0.0);
    CHECK(rep.pass);
    CHECK(rep.alpha == 0.0);
    CHECK(rep.rhs == 0.0);
    for (auto& s : rep.samples) CHECK(s.lhs == 0.0);
  }

  TEST_CASE("energy check on a bump with absorption and source") {
    Problem p{grid_of(8, 6, 3.0)};
    p.E = FieldSpec::builtin(Arity::VectorX, "paper-E");
    p.q = FieldSpec::builtin(Arity::ScalarXV, "paper-q(3)");
    p.S = FieldSpec::expression(Arity::ScalarTXV, "cos(t)*exp(-vx*vx)");
    p.g = FieldSpec::expression(Arity::ScalarXV, "exp(-10*((x-0.5)^2+(y-0.5)^2))");
    p.T = 0.4;
    auto rec = solve(p);
    auto rep = energy_estimate_check(rec.diagnostics, field_sup(p.q, p.grid));
    CHECK(rep.pass);
    CHECK(rep.min_margin() > 0.0);
    CHECK(rep.constant == doctest::Approx(2.0 * (1.0 + field_sup(p.q, p.grid))));
  }

  TEST_CASE("boundary control ratio") {
    auto g = grid_of(6, 4, 2.0);
    auto zero_k0 = FieldSpec::zero(Arity::ScalarXV);
    auto one = FieldSpec::expression(Arity::ScalarTXV, "1");
    auto q0 = FieldSpec::zero(Arity::ScalarXV);
    auto E = FieldSpec::builtin(Arity::VectorX, "paper-E");
    CHECK_THROWS_AS(boundary_control_check(zero_k0, one, q0, E, g, 0.3, 1.2), ValidationError);

    auto k0 = FieldSpec::builtin(Arity::ScalarXV, "paper-q");
    auto r1 = boundary_control_check(k0, one, q0, E, g, 0.3, 1.2);
    CHECK(std::isfinite(r1.ratio));
    CHECK(r1.ratio > 0.0);
    auto r3 = boundary_control_check(k0.scaled(3.0), one, q0, E, g, 0.3, 1.2);
    CHECK(r3.ratio == doctest::Approx(r1.ratio).epsilon(1e-12));
    CHECK(r3.dudt_norm == doctest::Approx(3.0 * r1.dudt_norm).epsilon(1e-12));
  }
}
