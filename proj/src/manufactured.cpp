#include "kinlab/manufactured.hpp"

#include <cmath>
#include <numbers>

#include <ceres/jet.h>

namespace kinlab {

namespace {

using Jet = ceres::Jet<double, 5>;

template <class F>
class JetFunction final : public PhaseFunction {
 public:
  JetFunction(std::string name, F f) : name_(std::move(name)), f_(std::move(f)) {}

  const std::string& name() const override { return name_; }

  double value(double t, Vec2 x, Vec2 v) const override { return f_(t, x.x, x.y, v.x, v.y); }

  std::array<double, 6> jet(double t, Vec2 x, Vec2 v) const override {
    const Jet r = f_(Jet(t, 0), Jet(x.x, 1), Jet(x.y, 2), Jet(v.x, 3), Jet(v.y, 4));
    return {r.a, r.v[0], r.v[1], r.v[2], r.v[3], r.v[4]};
  }

 private:
  std::string name_;
  F f_;
};

template <class F>
std::unique_ptr<PhaseFunction> make(std::string name, F f) {
  return std::make_unique<JetFunction<F>>(std::move(name), std::move(f));
}

/// exp(1 - 1/(1 - z^2)) on (-1, 1), zero elsewhere; z maps [lo, hi] to [-1, 1].
template <class T>
T bump(const T& s, double lo, double hi) {
  const T z = (2.0 * s - (lo + hi)) / (hi - lo);
  const T z2 = z * z;
  if (z2 >= 1.0) return T(0.0);
  using std::exp;
  return exp(1.0 - 1.0 / (1.0 - z2));
}

}  // namespace

double transport_derivative(const PhaseFunction& u, const FieldSpec& E, double t, Vec2 x, Vec2 v) {
  const auto d = u.jet(t, x, v);
  const Vec2 e = E.vector_at(x);
  return d[1] + v.x * d[2] + v.y * d[3] + e.x * d[4] + e.y * d[5];
}

std::unique_ptr<PhaseFunction> constant_function(double c) {
  return make("constant", [c](auto t, auto, auto, auto, auto) { return decltype(t)(c); });
}

std::unique_ptr<PhaseFunction> green_test_function() {
  return make("green", [](auto t, auto x, auto y, auto vx, auto vy) {
    using std::cos;
    using std::exp;
    using std::sin;
    constexpr double pi = std::numbers::pi;
    return (1.0 + 0.5 * sin(pi * x) * cos(pi * y)) * exp(-t) * exp(-(vx * vx + vy * vy));
  });
}

std::vector<std::unique_ptr<PhaseFunction>> carleman_catalog(const CarlemanSupport& sp) {
  const double T = sp.T;
  const double a = sp.v1_lo, b = sp.v1_hi, c = sp.v2_lo, d = sp.v2_hi;
  const double x0 = sp.space.lo.x, x1 = sp.space.hi.x, y0 = sp.space.lo.y, y1 = sp.space.hi.y;
  constexpr double pi = std::numbers::pi;
  std::vector<std::unique_ptr<PhaseFunction>> out;
  out.push_back(make("bump_linear", [=](auto t, auto x, auto y, auto vx, auto vy) {
    return bump(x, x0, x1) * bump(y, y0, y1) * bump(vx, a, b) * bump(vy, c, d) * (T - t);
  }));
  out.push_back(make("boundary_quadratic", [=](auto t, auto x, auto y, auto vx, auto vy) {
    using std::cos;
    return (1.0 + 0.5 * x) * cos(y) * bump(vx, a, b) * bump(vy, c, d) * (T - t) * (T - t);
  }));
  out.push_back(make("oscillating", [=](auto t, auto x, auto y, auto vx, auto vy) {
    using std::cos;
    using std::exp;
    using std::sin;
    return (1.0 + 0.5 * sin(3.0 * pi * x) * cos(2.0 * pi * y)) * bump(vx, a, b) * bump(vy, c, d) *
           (T - t) * exp(-t);
  }));
  out.push_back(make("velocity_coupled", [=](auto t, auto x, auto y, auto vx, auto vy) {
    using std::exp;
    return (T - t) * (1.0 + t) * exp(0.5 * x * y) * (1.0 + 0.3 * vx * vy) * bump(vx, a, b) *
           bump(vy, c, d);
  }));
  out.push_back(make("time_periodic", [=](auto t, auto x, auto y, auto vx, auto vy) {
    using std::sin;
    return sin(pi * t / T) * (2.0 + sin(pi * x)) * (1.0 + y * y) * bump(vx, a, b) * bump(vy, c, d);
  }));
  return out;
}

}  // namespace kinlab
