#include "kinlab/phase_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "kinlab/error.hpp"
#include "kinlab/summation.hpp"

namespace kinlab {

double Box::signed_distance(Vec2 p) const {
  return std::max({lo.x - p.x, p.x - hi.x, lo.y - p.y, p.y - hi.y});
}

Vec2 Box::clamp(Vec2 p) const {
  return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
}

double Box::diameter() const { return std::hypot(hi.x - lo.x, hi.y - lo.y); }

std::array<int, 4> PhaseGrid::unravel(std::size_t c) const {
  const int l = int(c % nvy_);
  c /= nvy_;
  const int k = int(c % nvx_);
  c /= nvx_;
  const int j = int(c % ny_);
  const int i = int(c / ny_);
  return {i, j, k, l};
}

Vec2 PhaseGrid::speed_bound() const {
  return {std::max(std::abs(velocity_.lo.x), std::abs(velocity_.hi.x)),
          std::max(std::abs(velocity_.lo.y), std::abs(velocity_.hi.y))};
}

PhaseGrid build_grid(const GridConfig& config) {
  std::vector<std::string> errors;
  auto check_count = [&](const char* name, int n) {
    if (n < 2) errors.push_back(fmt::format("grid.{} must be >= 2 (got {})", name, n));
  };
  auto check_range = [&](const char* name, double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      errors.push_back(fmt::format("grid.{} extent must satisfy lo < hi (got [{}, {}])", name, lo, hi));
  };
  check_count("nx", config.nx);
  check_count("ny", config.ny);
  check_count("nvx", config.nvx);
  check_count("nvy", config.nvy);
  check_range("x", config.space.lo.x, config.space.hi.x);
  check_range("y", config.space.lo.y, config.space.hi.y);
  check_range("vx", config.velocity.lo.x, config.velocity.hi.x);
  check_range("vy", config.velocity.lo.y, config.velocity.hi.y);
  if (!errors.empty()) throw ConfigError(std::move(errors));

  PhaseGrid g;
  g.space_ = config.space;
  g.velocity_ = config.velocity;
  g.nx_ = config.nx;
  g.ny_ = config.ny;
  g.nvx_ = config.nvx;
  g.nvy_ = config.nvy;
  g.dx_ = (config.space.hi.x - config.space.lo.x) / config.nx;
  g.dy_ = (config.space.hi.y - config.space.lo.y) / config.ny;
  g.dvx_ = (config.velocity.hi.x - config.velocity.lo.x) / config.nvx;
  g.dvy_ = (config.velocity.hi.y - config.velocity.lo.y) / config.nvy;
  return g;
}

std::vector<BoundaryFacet> enumerate_facets(const PhaseGrid& grid) {
  std::vector<BoundaryFacet> out;
  const double dv_area = grid.dvx() * grid.dvy();
  out.reserve(2 * std::size_t(grid.nx() + grid.ny()) * grid.velocity_cells());
  for (Axis axis : {Axis::X, Axis::Y}) {
    const int tangential_count = axis == Axis::X ? grid.ny() : grid.nx();
    const double face_length = axis == Axis::X ? grid.dy() : grid.dx();
    for (Side side : {Side::Lo, Side::Hi}) {
      const double sign = side == Side::Lo ? -1.0 : 1.0;
      const Vec2 normal = axis == Axis::X ? Vec2{sign, 0.0} : Vec2{0.0, sign};
      for (int t = 0; t < tangential_count; ++t) {
        Vec2 point;
        if (axis == Axis::X) {
          point = {side == Side::Lo ? grid.space().lo.x : grid.space().hi.x, grid.y(t)};
        } else {
          point = {grid.x(t), side == Side::Lo ? grid.space().lo.y : grid.space().hi.y};
        }
        for (int k = 0; k < grid.nvx(); ++k) {
          for (int l = 0; l < grid.nvy(); ++l) {
            BoundaryFacet f;
            f.id = out.size();
            f.axis = axis;
            f.side = side;
            f.tangential = t;
            f.k = k;
            f.l = l;
            f.normal = normal;
            f.point = point;
            f.velocity = {grid.vx(k), grid.vy(l)};
            f.n_dot_v = dot(normal, f.velocity);
            f.sigma_weight = std::abs(f.n_dot_v) * face_length * dv_area;
            out.push_back(f);
          }
        }
      }
    }
  }
  return out;
}

FacetPartition classify_boundary(const PhaseGrid& grid, double tolerance) {
  FacetPartition p;
  for (auto& f : enumerate_facets(grid)) {
    if (f.n_dot_v > tolerance) {
      p.outgoing.push_back(f);
    } else if (f.n_dot_v < -tolerance) {
      p.incoming.push_back(f);
    } else {
      p.glancing.push_back(f);
    }
  }
  return p;
}

std::size_t adjacent_cell(const PhaseGrid& grid, const BoundaryFacet& f) {
  if (f.axis == Axis::X) {
    const int i = f.side == Side::Lo ? 0 : grid.nx() - 1;
    return grid.index(i, f.tangential, f.k, f.l);
  }
  const int j = f.side == Side::Lo ? 0 : grid.ny() - 1;
  return grid.index(f.tangential, j, f.k, f.l);
}

void TraceMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_)
    throw ValidationError(fmt::format("trace row has {} entries, expected {}", values.size(), cols_));
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

double surface_norm_sq(const TraceMatrix& trace, std::span<const BoundaryFacet> facets,
                       std::span<const double> time_weights) {
  if (trace.cols() != facets.size())
    throw ValidationError(fmt::format("trace has {} columns but the facet list has {} entries",
                                      trace.cols(), facets.size()));
  if (trace.rows() != time_weights.size())
    throw ValidationError(fmt::format("trace has {} time samples but {} time weights were given",
                                      trace.rows(), time_weights.size()));
  CompensatedSum total;
  for (std::size_t r = 0; r < trace.rows(); ++r) {
    if (time_weights[r] == 0.0) continue;  // e.g. the undefined dudt at level 0
    CompensatedSum row;
    const auto values = trace.row(r);
    for (std::size_t c = 0; c < values.size(); ++c)
      row.add(values[c] * values[c] * facets[c].sigma_weight);
    total.add(time_weights[r] * row.value());
  }
  return total.value();
}

double phase_norm_sq(const PhaseGrid& grid, std::span<const double> values) {
  if (values.size() != grid.cell_count())
    throw ValidationError(fmt::format("cell array has {} entries, grid has {} cells", values.size(),
                                      grid.cell_count()));
  CompensatedSum s;
  for (double v : values) s.add(v * v);
  return s.value() * grid.cell_volume();
}

}  // namespace kinlab
