#include "kinlab/characteristics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "kinlab/error.hpp"

namespace kinlab {

namespace {

struct State {
  Vec2 x;
  Vec2 v;
};

/// One RK4 step of dX/ds = V, dV/ds = E(X) with signed step h.
State rk4(const FieldSpec& E, const Box& box, State y, double h) {
  auto force = [&](Vec2 x) { return E.vector_at(box.clamp(x)); };
  const Vec2 k1x = y.v, k1v = force(y.x);
  const Vec2 k2x = y.v + (0.5 * h) * k1v, k2v = force(y.x + (0.5 * h) * k1x);
  const Vec2 k3x = y.v + (0.5 * h) * k2v, k3v = force(y.x + (0.5 * h) * k2x);
  const Vec2 k4x = y.v + h * k3v, k4v = force(y.x + h * k3x);
  return {y.x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
          y.v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

/// Which face the point has crossed most: 0 x-lo, 1 x-hi, 2 y-lo, 3 y-hi.
int crossed_face(const Box& box, Vec2 p) {
  const double d[4] = {box.lo.x - p.x, p.x - box.hi.x, box.lo.y - p.y, p.y - box.hi.y};
  return int(std::max_element(d, d + 4) - d);
}

Vec2 face_normal(int face) {
  static constexpr Vec2 normals[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  return normals[face];
}

Vec2 snap_to_face(const Box& box, Vec2 p, int face) {
  p = box.clamp(p);
  switch (face) {
    case 0: p.x = box.lo.x; break;
    case 1: p.x = box.hi.x; break;
    case 2: p.y = box.lo.y; break;
    default: p.y = box.hi.y; break;
  }
  return p;
}

}  // namespace

Trajectory integrate_trajectory(const FieldSpec& E, const Box& domain, const PhasePoint& anchor,
                                double s_target, double dt, std::size_t max_steps) {
  if (!(dt > 0.0)) throw ValidationError(fmt::format("integrator step must be positive (got {})", dt));
  Trajectory tr;
  tr.anchor = anchor;
  const double span = s_target - anchor.t;
  const double n_real = std::ceil(std::abs(span) / dt);
  if (n_real > double(max_steps))
    throw NumericalError(fmt::format("trajectory needs {} steps, cap is {}", n_real, max_steps));
  const auto n = std::size_t(n_real);
  tr.samples.reserve(n + 1);
  tr.samples.push_back({anchor.t, anchor.x, anchor.v});
  if (n == 0) return tr;
  const double h = span / double(n);
  State y{anchor.x, anchor.v};
  for (std::size_t i = 1; i <= n; ++i) {
    y = rk4(E, domain, y, h);
    const double s = i == n ? s_target : anchor.t + double(i) * h;
    tr.samples.push_back({s, y.x, y.v});
  }
  return tr;
}

ExitRecord backward_exit(const FieldSpec& E, const Box& domain, const PhasePoint& anchor,
                         const ExitOptions& options) {
  ExitRecord rec;
  const double horizon = std::min(anchor.t, options.horizon_cap);
  const State start{anchor.x, anchor.v};
  auto never = [&] {
    rec.never = true;
    return rec;
  };
  if (!(horizon > 0.0)) return never();
  if (E.is_zero() && anchor.v == Vec2{}) return never();
  if (!(options.dt > 0.0))
    throw ValidationError(fmt::format("integrator step must be positive (got {})", options.dt));

  // tau is elapsed backward time; the state at tau is X(t - tau)
  auto finish = [&](double tau, State y) {
    const int face = crossed_face(domain, y.x);
    rec.never = false;
    rec.t_minus = tau;
    rec.normal = face_normal(face);
    rec.x_minus = snap_to_face(domain, y.x, face);
    rec.v_minus = y.v;
    rec.n_dot_v = dot(rec.normal, y.v);
    return rec;
  };
  if (domain.signed_distance(start.x) > 0.0) return finish(0.0, start);

  const double n_real = std::ceil(horizon / options.dt);
  if (n_real > double(options.max_steps))
    throw NumericalError(fmt::format("exit search needs {} steps, cap is {}", n_real, options.max_steps));
  const auto n = std::size_t(n_real);
  const double h = horizon / double(n);
  State y = start;
  double tau = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double tau_next = i == n ? horizon : double(i) * h;
    const State y_next = rk4(E, domain, y, -(tau_next - tau));
    if (domain.signed_distance(y_next.x) > 0.0) {
      // bracket [a, b]: inside at a, outside at b
      double a = 0.0, b = tau_next - tau;
      State outside = y_next;
      for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, tau + b); ++it) {
        const double mid = 0.5 * (a + b);
        const State ym = rk4(E, domain, y, -mid);
        const double d = domain.signed_distance(ym.x);
        if (d > 0.0) {
          b = mid;
          outside = ym;
        } else if (d < 0.0) {
          a = mid;
        } else {
          a = b = mid;
          outside = ym;
        }
      }
      return finish(tau + b, outside);
    }
    y = y_next;
    tau = tau_next;
  }
  return never();
}

double characteristic_oracle(const FieldSpec& E, const FieldSpec& q, const FieldSpec& S,
                             const FieldSpec& g, const FieldSpec& h, const Box& domain,
                             const PhasePoint& anchor, const ExitOptions& options) {
  if (!std::isfinite(anchor.t) || anchor.t < 0.0)
    throw ValidationError(fmt::format("oracle needs a finite time t >= 0 (got {})", anchor.t));
  const ExitRecord exit = backward_exit(E, domain, anchor, options);
  const bool inflow = !exit.never && exit.t_minus <= anchor.t;
  const double tau_end = inflow ? exit.t_minus : anchor.t;

  // augmented backward system: state (X, V), A = int q, I = int S e^{-A}
  struct Aug {
    Vec2 x, v;
    double a, i;
  };
  const double t = anchor.t;
  auto rhs = [&](double tau, const Aug& y) {
    const Vec2 xc = domain.clamp(y.x);
    const double qa = q.at(xc, y.v);
    const double sa = S.at(t - tau, xc, y.v);
    return Aug{-1.0 * y.v, -1.0 * E.vector_at(xc), qa, sa * std::exp(-y.a)};
  };
  auto axpy = [](const Aug& y, double c, const Aug& k) {
    return Aug{y.x + c * k.x, y.v + c * k.v, y.a + c * k.a, y.i + c * k.i};
  };
  Aug y{anchor.x, anchor.v, 0.0, 0.0};
  const auto n = std::size_t(std::ceil(tau_end / options.dt));
  if (n > options.max_steps)
    throw NumericalError(fmt::format("oracle needs {} steps, cap is {}", n, options.max_steps));
  if (n > 0) {
    const double hs = tau_end / double(n);
    for (std::size_t s = 0; s < n; ++s) {
      const double tau = double(s) * hs;
      const Aug k1 = rhs(tau, y);
      const Aug k2 = rhs(tau + 0.5 * hs, axpy(y, 0.5 * hs, k1));
      const Aug k3 = rhs(tau + 0.5 * hs, axpy(y, 0.5 * hs, k2));
      const Aug k4 = rhs(tau + hs, axpy(y, hs, k3));
      y.x = y.x + (hs / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      y.v = y.v + (hs / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
      y.a += (hs / 6.0) * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
      y.i += (hs / 6.0) * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i);
    }
  }
  double base = 0.0;
  if (inflow) {
    base = h.at(t - exit.t_minus, exit.x_minus, exit.v_minus);
  } else {
    base = g.at(domain.clamp(y.x), y.v);
  }
  return base * std::exp(-y.a) + y.i;
}

double singularity_diagnostic(const FieldSpec& E, const Box& domain, const PhasePoint& anchor,
                              const ExitOptions& options) {
  const ExitRecord exit = backward_exit(E, domain, anchor, options);
  if (exit.never) throw ValidationError("characteristic never exits; no singularity scale");
  return std::abs(exit.n_dot_v);
}

}  // namespace kinlab
