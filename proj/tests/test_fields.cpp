#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "kinlab/error.hpp"
#include "kinlab/fields.hpp"

using namespace kinlab;

namespace {

PhaseGrid unit_grid(int n, int nv, double vmax) {
  GridConfig c;
  c.velocity = {{-vmax, -vmax}, {vmax, vmax}};
  c.nx = c.ny = n;
  c.nvx = c.nvy = nv;
  return build_grid(c);
}

}  // namespace

TEST_SUITE("fields") {
  TEST_CASE("builtin force field") {
    auto E = FieldSpec::builtin(Arity::VectorX, "paper-E");
    auto e = E.vector_value({std::nullopt, {0.0, 0.0}, std::nullopt});
    CHECK(e.x == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(e.y == doctest::Approx(0.2).epsilon(1e-15));
    const double x = 0.3, y = 0.7, pi = std::numbers::pi;
    auto f = E.vector_at({x, y});
    CHECK(f.x == doctest::Approx(0.3 + 0.1 * std::cos(2 * pi * x) * std::sin(4 * pi * y)));
    CHECK(f.y == doctest::Approx(0.2 + 0.15 * std::sin(2 * pi * x) * std::cos(4 * pi * y)));
  }

  TEST_CASE("builtin coefficient with eta") {
    auto q2 = FieldSpec::builtin(Arity::ScalarXV, "paper-q(2)");
    CHECK(q2.value({std::nullopt, {0.25, 0.0}, Vec2{1.0, -2.0}}) == doctest::Approx(1.4).epsilon(1e-14));
    auto q = FieldSpec::parse(Arity::ScalarXV, "paper-q");
    CHECK(q.at({0.25, 0.0}, {0.0, 0.0}) == doctest::Approx(0.7).epsilon(1e-14));
  }

  TEST_CASE("zero field") {
    auto z = FieldSpec::zero(Arity::ScalarTXV);
    CHECK(z.is_zero());
    CHECK(z.value({0.3, {0.1, 0.2}, Vec2{3.0, 4.0}}) == 0.0);
    auto zv = FieldSpec::zero(Arity::VectorX);
    CHECK(zv.vector_at({0.4, 0.4}) == Vec2{0.0, 0.0});
  }

  TEST_CASE("arity mismatch is rejected") {
    auto q = FieldSpec::expression(Arity::ScalarXV, "x + vx");
    CHECK_THROWS_AS(q.value({std::nullopt, {0.1, 0.2}, std::nullopt}), ValidationError);
    CHECK_THROWS_AS(q.value({1.0, {0.1, 0.2}, Vec2{0, 0}}), ValidationError);
    CHECK_THROWS_AS(FieldSpec::expression(Arity::ScalarX, "x + vx"), ConfigError);
    CHECK_THROWS_AS(FieldSpec::expression(Arity::ScalarXV, "t * x"), ConfigError);
  }

  TEST_CASE("evaluation is pure") {
    auto f = FieldSpec::expression(Arity::ScalarTXV, "exp(-t) * sin(pi*x) * vx^2 + sqrt(1 + vy*vy)");
    const double a = f.at(0.3, {0.2, 0.9}, {1.5, -0.5});
    const double b = f.at(0.3, {0.2, 0.9}, {1.5, -0.5});
    CHECK(a == b);
    CHECK(a == doctest::Approx(std::exp(-0.3) * std::sin(std::numbers::pi * 0.2) * 2.25 +
                               std::sqrt(1.25)));
  }

  TEST_CASE("source text round trips") {
    for (const char* text : {"paper-q(3)", "x*vy + 2", "zero"}) {
      auto f = FieldSpec::parse(Arity::ScalarXV, text);
      auto g = FieldSpec::parse(Arity::ScalarXV, f.source());
      CHECK(g.at({0.3, 0.6}, {1.0, 2.0}) == f.at({0.3, 0.6}, {1.0, 2.0}));
    }
    auto E = FieldSpec::parse(Arity::VectorX, "[y, -x]");
    auto E2 = FieldSpec::parse(Arity::VectorX, E.source());
    CHECK(E2.vector_at({0.3, 0.8}) == E.vector_at({0.3, 0.8}));
  }

  TEST_CASE("family members scale linearly") {
    CoefficientFamily fam{FieldSpec::builtin(Arity::ScalarXV, "paper-q"), CoefficientRole::Absorption};
    const Vec2 x{0.17, 0.61}, v{2.0, -1.0};
    const double base = family_member(fam, 1).at(x, v);
    CHECK(base == fam.profile.at(x, v));
    CHECK(family_member(fam, 6).at(x, v) == doctest::Approx(6.0 * base).epsilon(1e-15));
    CHECK_THROWS_AS(family_member(fam, 0), ValidationError);

    auto grid = unit_grid(8, 4, 6.0);
    const double pn = field_l2_norm(fam.profile, grid);
    auto m1 = sample_cells(family_member(fam, 1), grid);
    for (int eta = 2; eta <= 6; ++eta) {
      auto m = sample_cells(family_member(fam, eta), grid);
      std::vector<double> d(m.size());
      for (std::size_t i = 0; i < m.size(); ++i) d[i] = m[i] - m1[i];
      CHECK(std::sqrt(phase_norm_sq(grid, d)) == doctest::Approx((eta - 1) * pn).epsilon(1e-12));
    }
  }

  TEST_CASE("admissibility report") {
    auto grid = unit_grid(8, 4, 6.0);
    auto zeroE = FieldSpec::zero(Arity::VectorX);
    auto zh = FieldSpec::zero(Arity::ScalarTXV);
    auto zg = FieldSpec::zero(Arity::ScalarXV);
    auto r0 = check_admissibility(zeroE, zh, zg, grid);
    CHECK(r0.max_normal_force == 0.0);
    CHECK(r0.tangency_ok);
    CHECK(r0.compatibility_residual == 0.0);
    CHECK(r0.compatibility_ok);

    // on x = 0, |n.E| = |0.3 + 0.1 sin(4 pi y)| peaks at 0.4
    auto pE = FieldSpec::builtin(Arity::VectorX, "paper-E");
    auto r1 = check_admissibility(pE, zh, zg, grid, 1e-8, 16);
    CHECK_FALSE(r1.tangency_ok);
    CHECK(r1.max_normal_force <= 0.4 + 1e-12);
    CHECK(r1.max_normal_force == doctest::Approx(0.4).epsilon(1e-2));

    auto g1 = FieldSpec::expression(Arity::ScalarXV, "1");
    auto r2 = check_admissibility(zeroE, zh, g1, grid);
    CHECK(r2.compatibility_residual == doctest::Approx(1.0));
    CHECK_FALSE(r2.compatibility_ok);
  }

  TEST_CASE("tabulated field interpolates and refuses extrapolation") {
    const auto path = std::filesystem::temp_directory_path() / "kinlab_field_table.csv";
    {
      std::ofstream out(path);
      out << "x,y,value\n";
      for (double x : {0.0, 0.5, 1.0})
        for (double y : {0.0, 1.0}) out << x << ',' << y << ',' << (2 * x + 3 * y) << '\n';
    }
    auto f = FieldSpec::parse(Arity::ScalarX, "csv:" + path.string());
    CHECK(f.kind() == FieldKind::Tabulated);
    CHECK(f.value({std::nullopt, {0.25, 0.4}, std::nullopt}) == doctest::Approx(0.5 + 1.2));
    CHECK_THROWS_AS(f.value({std::nullopt, {1.5, 0.4}, std::nullopt}), ValidationError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(FieldSpec::parse(Arity::ScalarX, "csv:/nonexistent/table.csv"), IoError);
  }
}
