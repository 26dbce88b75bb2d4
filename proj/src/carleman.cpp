#include "kinlab/carleman.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

namespace {

using Point4 = std::array<double, 4>;  // x1, x2, v1, v2

struct Node {
  double x;
  double w;
};

constexpr double kGl3x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGl3w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

void gauss_cells(const std::vector<double>& breaks, std::vector<Node>& out) {
  for (std::size_t c = 0; c + 1 < breaks.size(); ++c) {
    const double a = breaks[c], b = breaks[c + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int k = 0; k < 3; ++k) out.push_back({mid + half * kGl3x[k], half * kGl3w[k]});
  }
}

std::vector<Node> flat_axis(double lo, double hi, int cells) {
  std::vector<double> br;
  for (int c = 0; c <= cells; ++c) br.push_back(lo + (hi - lo) * c / cells);
  br.back() = hi;
  std::vector<Node> out;
  gauss_cells(br, out);
  return out;
}

/// Uniform cells with the one at the peak end split geometrically.
std::vector<Node> graded_axis(double lo, double hi, int cells, int levels, bool toward_hi) {
  const double L = (hi - lo) / cells;
  std::vector<double> dist;  // distances from the peak end, increasing
  dist.push_back(0.0);
  for (int k = levels; k >= 1; --k) dist.push_back(L * std::ldexp(1.0, -k));
  for (int c = 1; c <= cells; ++c) dist.push_back(L * c);
  dist.back() = hi - lo;
  std::vector<double> br;
  for (double d : dist) br.push_back(toward_hi ? hi - d : lo + d);
  std::sort(br.begin(), br.end());
  br.front() = lo;
  br.back() = hi;
  std::vector<Node> out;
  gauss_cells(br, out);
  return out;
}

Vec2 force_at(const FieldSpec& E, const Box& domain, Vec2 x) {
  return E.kind() == FieldKind::Tabulated ? E.vector_at(domain.clamp(x)) : E.vector_at(x);
}

double golden_max(const std::function<double(double)>& f, double a, double b, double& best_x) {
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  best_x = fc >= fd ? c : d;
  return std::max(fc, fd);
}

/// Maximizes f over the 4-box by dense sampling then coordinate-wise golden
/// section around the best sample.
double dense_max(const std::function<double(const Point4&)>& f, const Point4& lo, const Point4& hi,
                 int n, int sweeps) {
  Point4 best{};
  double best_v = -std::numeric_limits<double>::infinity();
  Point4 p{};
  auto coord = [&](int axis, int i) {
    return i == n - 1 ? hi[axis] : lo[axis] + (hi[axis] - lo[axis]) * i / (n - 1);
  };
  for (int a = 0; a < n; ++a) {
    p[0] = coord(0, a);
    for (int b = 0; b < n; ++b) {
      p[1] = coord(1, b);
      for (int c = 0; c < n; ++c) {
        p[2] = coord(2, c);
        for (int d = 0; d < n; ++d) {
          p[3] = coord(3, d);
          const double v = f(p);
          if (v > best_v) {
            best_v = v;
            best = p;
          }
        }
      }
    }
  }
  for (int s = 0; s < sweeps; ++s) {
    for (int axis = 0; axis < 4; ++axis) {
      const double h = (hi[axis] - lo[axis]) / (n - 1);
      const double a = std::max(lo[axis], best[axis] - h), b = std::min(hi[axis], best[axis] + h);
      if (!(b > a)) continue;
      Point4 q = best;
      double x = best[axis];
      const double v = golden_max(
          [&](double t) {
            q[axis] = t;
            return f(q);
          },
          a, b, x);
      if (v > best_v) {
        best_v = v;
        best[axis] = x;
      }
    }
  }
  return best_v;
}

}  // namespace

double CarlemanWeight::psi(const FieldSpec& E, Vec2 x, Vec2 v) const {
  return -beta + v.x * v.x + E.vector_at(x).x * x.x;
}

double CarlemanWeight::v1_lo() const { return std::sqrt(a); }
double CarlemanWeight::v1_hi() const { return std::sqrt(b); }
Box CarlemanWeight::velocity_box() const { return {{v1_lo(), v2_lo}, {v1_hi(), v2_hi}}; }

CarlemanWeight canonical_weight(double beta, double a, double b, double d, double delta, double m,
                                double v2_lo, double v2_hi) {
  if (!(beta > 0.0)) throw ValidationError(fmt::format("beta > 0 violated (beta = {})", beta));
  if (!(a > 0.0)) throw ValidationError(fmt::format("0 < a violated (a = {})", a));
  if (!(a < b)) throw ValidationError(fmt::format("a < b violated (a = {}, b = {})", a, b));
  if (!(d > 0.0)) throw ValidationError(fmt::format("d > 0 violated (d = {})", d));
  if (!(delta > 0.0)) throw ValidationError(fmt::format("delta > 0 violated (delta = {})", delta));
  if (!(m >= 0.0)) throw ValidationError(fmt::format("m >= 0 violated (m = {})", m));
  if (!(beta + 2.0 * delta * m < a))
    throw ValidationError(fmt::format("beta + 2*delta*m < a violated ({} + 2*{}*{} = {} >= {})", beta,
                                      delta, m, beta + 2.0 * delta * m, a));
  if (!(v2_lo < v2_hi))
    throw ValidationError(fmt::format("v2 range must satisfy lo < hi (got [{}, {}])", v2_lo, v2_hi));
  CarlemanWeight w;
  w.beta = beta;
  w.a = a;
  w.b = b;
  w.d = d;
  w.delta = delta;
  w.m = m;
  w.v2_lo = v2_lo;
  w.v2_hi = v2_hi;
  return w;
}

std::string HypothesisReport::first_failure() const {
  if (!item1) return fmt::format("item (1): need R > r > 0 (R = {:.6g}, r = {:.6g})", R, r);
  if (!item2)
    return fmt::format("item (2): T = {:.6g} must exceed (R - r)/beta = {:.6g}", T, T_min);
  if (!item3) return fmt::format("item (3): gamma0 = inf Psi = {:.6g} must be positive", gamma0);
  if (!item4) return fmt::format("item (4): M0 = {:.6g}, M1 = {:.6g} must be finite", M0, M1);
  return {};
}

HypothesisReport validate_hypothesis(const CarlemanWeight& w, const Box& domain, const FieldSpec& E,
                                     double T, const HypothesisOptions& opt) {
  HypothesisReport rep;
  rep.T = T;
  const Point4 lo{domain.lo.x, domain.lo.y, w.v1_lo(), w.v2_lo};
  const Point4 hi{domain.hi.x, domain.hi.y, w.v1_hi(), w.v2_hi};
  const int n = std::max(2, opt.samples_per_axis);
  const int sweeps = opt.refinement_sweeps;

  auto psi = [&](Vec2 x, Vec2 v) { return -w.beta + v.x * v.x + force_at(E, domain, x).x * x.x; };
  auto phi0 = [&](const Point4& p) { return w.phi0({p[0], p[1]}, {p[2], p[3]}); };
  auto psi4 = [&](const Point4& p) { return psi({p[0], p[1]}, {p[2], p[3]}); };
  const double fd = 1e-5;
  auto transported_psi = [&](const Point4& p) {
    const Vec2 x{p[0], p[1]}, v{p[2], p[3]};
    const Vec2 e = force_at(E, domain, x);
    return (psi(x + fd * v, v + fd * e) - psi(x - fd * v, v - fd * e)) / (2.0 * fd);
  };

  rep.R = dense_max(phi0, lo, hi, n, sweeps);
  rep.r = -dense_max([&](const Point4& p) { return -phi0(p); }, lo, hi, n, sweeps);
  rep.gamma0 = -dense_max([&](const Point4& p) { return -psi4(p); }, lo, hi, n, sweeps);
  rep.M0 = dense_max([&](const Point4& p) { return std::abs(psi4(p)); }, lo, hi, n, sweeps);
  rep.M1 = dense_max([&](const Point4& p) { return std::abs(transported_psi(p)); }, lo, hi, n, sweeps);

  rep.item1 = rep.R > rep.r && rep.r > 0.0;
  rep.T_min = (rep.R - rep.r) / w.beta;
  const double gap = rep.r - (rep.R - w.beta * T);
  if (rep.item1 && gap > 0.0 && T > 0.0) {
    rep.epsilon = std::min({gap / (8.0 * w.beta), T / 4.0, rep.r / (2.0 * w.beta)});
    rep.alpha1 = rep.r - w.beta * rep.epsilon;
    rep.alpha0 = std::max(rep.R - w.beta * T + 2.0 * w.beta * rep.epsilon, 0.5 * rep.alpha1);
    const double sup_late = rep.R - w.beta * (T - 2.0 * rep.epsilon);
    const double sup_early = rep.R - w.beta * rep.epsilon;
    rep.item2 = 0.0 < rep.alpha0 && rep.alpha0 < rep.alpha1 && rep.alpha1 < rep.r &&
                sup_late <= rep.alpha0 && sup_early >= rep.alpha1;
  }
  rep.item3 = rep.gamma0 > 0.0;
  rep.item4 = std::isfinite(rep.M0) && std::isfinite(rep.M1);

  // curl and gradient of E on interior samples
  const int nc = n;
  const double hx = 1e-5 * std::max(1.0, domain.diameter());
  double grad_max = 0.0, sup_e = 0.0;
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < nc; ++j) {
      const Vec2 x{domain.lo.x + (domain.hi.x - domain.lo.x) * (i + 0.5) / nc,
                   domain.lo.y + (domain.hi.y - domain.lo.y) * (j + 0.5) / nc};
      const Vec2 ex = (1.0 / (2 * hx)) * (E.vector_at(x + Vec2{hx, 0}) - E.vector_at(x - Vec2{hx, 0}));
      const Vec2 ey = (1.0 / (2 * hx)) * (E.vector_at(x + Vec2{0, hx}) - E.vector_at(x - Vec2{0, hx}));
      const Vec2 e = E.vector_at(x);
      rep.curl_max = std::max(rep.curl_max, std::abs(ex.y - ey.x));
      grad_max = std::max({grad_max, std::abs(ex.x), std::abs(ex.y), std::abs(ey.x), std::abs(ey.y)});
      sup_e = std::max({sup_e, std::abs(e.x), std::abs(e.y)});
    }
  }
  rep.conservative_field = rep.curl_max <= opt.curl_tolerance * (1.0 + grad_max);
  if (rep.conservative_field) {
    // b(x) = -int E.dl along lo -> (x1, lo2) -> x, Simpson per leg
    auto line = [&](Vec2 a, Vec2 b) {
      constexpr int m = 64;
      CompensatedSum s;
      const Vec2 dl = b - a;
      for (int k = 0; k <= m; ++k) {
        const double wgt = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s.add(wgt * dot(E.vector_at(a + (double(k) / m) * dl), dl));
      }
      return s.value() / (3.0 * m);
    };
    auto potential = [&](Vec2 x) {
      const Vec2 corner{x.x, domain.lo.y};
      return -(line(domain.lo, corner) + line(corner, x));
    };
    const double hb = 1e-4 * std::max(1.0, domain.diameter());
    for (int i = 1; i <= 5; ++i) {
      for (int j = 1; j <= 5; ++j) {
        const Vec2 x{domain.lo.x + (domain.hi.x - domain.lo.x) * i / 6.0,
                     domain.lo.y + (domain.hi.y - domain.lo.y) * j / 6.0};
        const double bx = (potential(x + Vec2{hb, 0}) - potential(x - Vec2{hb, 0})) / (2 * hb);
        const double by = (potential(x + Vec2{0, hb}) - potential(x - Vec2{0, hb})) / (2 * hb);
        const Vec2 e = E.vector_at(x);
        rep.potential_residual = std::max({rep.potential_residual, std::abs(bx + e.x), std::abs(by + e.y)});
      }
    }
  }
  rep.domain_offset_ok = domain.lo.x >= w.d;
  rep.diameter_ok = domain.diameter() <= w.delta * (1.0 + 1e-12);
  rep.force_bound_ok = sup_e + grad_max <= w.m * (1.0 + 1e-9) + 1e-12;
  return rep;
}

CarlemanReport carleman_residual(const PhaseFunction& u, const CarlemanWeight& w, const Box& domain,
                                 const FieldSpec& E, const FieldSpec& q, double T, double gamma0,
                                 double M1, std::span<const double> s_list,
                                 const CarlemanQuadrature& quad) {
  CarlemanReport rep;
  rep.function = u.name();
  const std::size_t ns = s_list.size();
  const double v1a = w.v1_lo(), v1b = w.v1_hi();

  const auto tn = graded_axis(0.0, T, quad.uniform_cells, quad.graded_levels, false);
  const auto x1n = graded_axis(domain.lo.x, domain.hi.x, quad.uniform_cells, quad.graded_levels, true);
  const auto x2n = flat_axis(domain.lo.y, domain.hi.y, quad.flat_cells);
  const auto v1n = graded_axis(v1a, v1b, quad.uniform_cells, quad.graded_levels, true);
  const auto v2n = flat_axis(w.v2_lo, w.v2_hi, quad.flat_cells);

  // velocity support: |u| outside V must be negligible against sup |u| inside
  double sup_in = 0.0, sup_out = 0.0;
  {
    const double pad1 = 0.5 * (v1b - v1a), pad2 = 0.5 * (w.v2_hi - w.v2_lo);
    for (int it = 0; it <= 4; ++it) {
      const double t = T * it / 4.0;
      for (int i = 0; i <= 4; ++i) {
        const double x1 = domain.lo.x + (domain.hi.x - domain.lo.x) * i / 4.0;
        for (int j = 0; j <= 4; ++j) {
          const double x2 = domain.lo.y + (domain.hi.y - domain.lo.y) * j / 4.0;
          for (int k = 0; k <= 8; ++k) {
            for (int l = 0; l <= 8; ++l) {
              const double v1 = v1a - pad1 + (v1b - v1a + 2 * pad1) * k / 8.0;
              const double v2 = w.v2_lo - pad2 + (w.v2_hi - w.v2_lo + 2 * pad2) * l / 8.0;
              const double val = std::abs(u.value(t, {x1, x2}, {v1, v2}));
              const bool inside = v1 > v1a && v1 < v1b && v2 > w.v2_lo && v2 < w.v2_hi;
              (inside ? sup_in : sup_out) = std::max(inside ? sup_in : sup_out, val);
            }
          }
        }
      }
    }
    for (const auto& a : tn)
      for (const auto& b : v1n) sup_in = std::max(sup_in, std::abs(u.value(a.x, {domain.hi.x, 0.5 * (domain.lo.y + domain.hi.y)}, {b.x, 0.5 * (w.v2_lo + w.v2_hi)})));
    if (sup_out > quad.support_tolerance * sup_in)
      throw ValidationError(fmt::format(
          "test function '{}' is not supported in the velocity set: |u| = {:.3e} outside vs {:.3e} inside",
          u.name(), sup_out, sup_in));
  }

  const double R = std::max({domain.lo.x * v1a, domain.lo.x * v1b, domain.hi.x * v1a, domain.hi.x * v1b});
  std::vector<CompensatedSum> init(ns), bulk(ns), fin(ns), outf(ns), inf(ns), forc(ns);
  std::vector<double> expo(ns);
  auto weights = [&](double phi) {
    for (std::size_t k = 0; k < ns; ++k) expo[k] = std::exp(2.0 * s_list[k] * (phi - R));
  };

  // interior integrals over [0,T] x Omega x V
  for (const auto& tt : tn) {
    for (const auto& a : x1n) {
      for (const auto& b : x2n) {
        const Vec2 x{a.x, b.x};
        const Vec2 e = E.vector_at(x);
        for (const auto& c : v1n) {
          for (const auto& d : v2n) {
            const Vec2 v{c.x, d.x};
            const double wq = tt.w * a.w * b.w * c.w * d.w;
            const auto j = u.jet(tt.x, x, v);
            const double pu = j[1] + v.x * j[2] + v.y * j[3] + e.x * j[4] + e.y * j[5] + q.at(x, v) * j[0];
            if (j[0] == 0.0 && pu == 0.0) continue;
            weights(w.phi(tt.x, x, v));
            for (std::size_t k = 0; k < ns; ++k) {
              bulk[k].add(wq * j[0] * j[0] * expo[k]);
              forc[k].add(wq * pu * pu * expo[k]);
            }
          }
        }
      }
    }
  }
  // time slices t = 0 and t = T
  for (double tt : {0.0, T}) {
    auto& target = tt == 0.0 ? init : fin;
    for (const auto& a : x1n) {
      for (const auto& b : x2n) {
        const Vec2 x{a.x, b.x};
        for (const auto& c : v1n) {
          for (const auto& d : v2n) {
            const Vec2 v{c.x, d.x};
            const double val = u.value(tt, x, v);
            if (val == 0.0) continue;
            const double wq = a.w * b.w * c.w * d.w * w.psi(E, x, v) * val * val;
            weights(w.phi(tt, x, v));
            for (std::size_t k = 0; k < ns; ++k) target[k].add(wq * expo[k]);
          }
        }
      }
    }
  }
  // lateral boundary: x1 faces over (t, x2, v), x2 faces over (t, x1, v)
  auto face = [&](Vec2 x, Vec2 n, double wspace) {
    const Vec2 e_unused{};
    (void)e_unused;
    for (const auto& tt : tn) {
      for (const auto& c : v1n) {
        for (const auto& d : v2n) {
          const Vec2 v{c.x, d.x};
          const double ndv = dot(n, v);
          if (ndv == 0.0) continue;
          const double val = u.value(tt.x, x, v);
          if (val == 0.0) continue;
          const double wq = tt.w * wspace * c.w * d.w * std::abs(ndv) * w.psi(E, x, v) * val * val;
          weights(w.phi(tt.x, x, v));
          auto& target = ndv > 0.0 ? outf : inf;
          for (std::size_t k = 0; k < ns; ++k) target[k].add(wq * expo[k]);
        }
      }
    }
  };
  for (const auto& b : x2n) {
    face({domain.lo.x, b.x}, {-1.0, 0.0}, b.w);
    face({domain.hi.x, b.x}, {1.0, 0.0}, b.w);
  }
  for (const auto& a : x1n) {
    face({a.x, domain.lo.y}, {0.0, -1.0}, a.w);
    face({a.x, domain.hi.y}, {0.0, 1.0}, a.w);
  }

  const double q_sup = [&] {
    double m = 0.0;
    for (const auto& a : x1n)
      for (const auto& b : x2n)
        for (const auto& c : v1n)
          for (const auto& d : v2n) m = std::max(m, std::abs(q.at({a.x, b.x}, {c.x, d.x})));
    return m;
  }();

  for (std::size_t k = 0; k < ns; ++k) {
    const double s = s_list[k];
    CarlemanSample cs;
    cs.s = s;
    cs.c0 = std::max(quad.c0_floor, s * gamma0 * gamma0 - M1 - 2.0 * q_sup * q_sup / s);
    cs.initial = s * init[k].value();
    cs.bulk = bulk[k].value();
    cs.final = s * fin[k].value();
    cs.outflow = s * outf[k].value();
    cs.inflow = s * inf[k].value();
    cs.forcing = 2.0 * forc[k].value();
    cs.lhs = cs.initial + cs.c0 * s * cs.bulk;
    cs.rhs = cs.final + cs.outflow - cs.inflow + cs.forcing;
    cs.hold = cs.lhs <= cs.rhs;
    rep.samples.push_back(cs);
  }
  for (std::size_t k = ns; k-- > 0;) {
    if (!rep.samples[k].hold) break;
    rep.s_star = rep.samples[k].s;
  }
  return rep;
}

WeightedOperatorValue weighted_operator_apply(const PhaseFunction& u, const CarlemanWeight& w,
                                              const FieldSpec& E, double s, double t, Vec2 x,
                                              Vec2 v, double h) {
  const Vec2 e = E.vector_at(x);
  auto at = [&](double eps, bool conjugate) {
    const double te = t + eps;
    const Vec2 xe = x + eps * v, ve = v + eps * e;
    const double val = u.value(te, xe, ve);
    return conjugate ? std::exp(-s * w.phi(te, xe, ve)) * val : val;
  };
  WeightedOperatorValue out;
  out.lw = std::exp(s * w.phi(t, x, v)) * (at(h, true) - at(-h, true)) / (2.0 * h);
  out.p0u = (at(h, false) - at(-h, false)) / (2.0 * h);
  out.identity = out.p0u - s * w.psi(E, x, v) * u.value(t, x, v);
  return out;
}

}  // namespace kinlab
