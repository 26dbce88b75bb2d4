#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/phase_geometry.hpp"

namespace kinlab {

/// Closed-form phase-space function u(t, x, v) with exact first derivatives.
class PhaseFunction {
 public:
  virtual ~PhaseFunction() = default;
  virtual const std::string& name() const = 0;
  virtual double value(double t, Vec2 x, Vec2 v) const = 0;
  /// Value followed by d/dt, d/dx, d/dy, d/dvx, d/dvy.
  virtual std::array<double, 6> jet(double t, Vec2 x, Vec2 v) const = 0;
};

/// P0 u = du/dt + v.grad_x u + E.grad_v u.
double transport_derivative(const PhaseFunction& u, const FieldSpec& E, double t, Vec2 x, Vec2 v);

std::unique_ptr<PhaseFunction> constant_function(double c);

/// (1 + 0.5 sin(pi x) cos(pi y)) e^{-t} e^{-|v|^2}: nonzero boundary values,
/// negligible mass at the edge of a wide velocity box.
std::unique_ptr<PhaseFunction> green_test_function();

/// Region the Carleman test functions live on: spatial box, v1 in
/// [v1_lo, v1_hi], v2 in [v2_lo, v2_hi], t in [0, T].
struct CarlemanSupport {
  Box space;
  double v1_lo = 1.0, v1_hi = 2.0;
  double v2_lo = -1.0, v2_hi = 1.0;
  double T = 6.0;
};

/// Five smooth functions with u(T) = 0 and compact support in (v1_lo, v1_hi)
/// x (v2_lo, v2_hi) in velocity; some have nonzero spatial boundary traces.
std::vector<std::unique_ptr<PhaseFunction>> carleman_catalog(const CarlemanSupport& support);

}  // namespace kinlab
