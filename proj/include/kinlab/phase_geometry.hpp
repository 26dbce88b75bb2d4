#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace kinlab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Axis-aligned spatial box [lo.x, hi.x] x [lo.y, hi.y].
struct Box {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  /// Negative inside, zero on the boundary, positive outside.
  double signed_distance(Vec2 p) const;
  Vec2 clamp(Vec2 p) const;
  double diameter() const;
  friend bool operator==(const Box&, const Box&) = default;
};

struct GridConfig {
  Box space{{0.0, 0.0}, {1.0, 1.0}};
  Box velocity{{-6.0, -6.0}, {6.0, 6.0}};
  int nx = 64;
  int ny = 64;
  int nvx = 32;
  int nvy = 32;
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// Uniform cell-centered discretization of Omega x V_box. Cell (i, j, k, l)
/// holds x index i, y index j, vx index k, vy index l; storage is row-major
/// with vy fastest.
class PhaseGrid {
 public:
  const Box& space() const { return space_; }
  const Box& velocity() const { return velocity_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nvx() const { return nvx_; }
  int nvy() const { return nvy_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double dvx() const { return dvx_; }
  double dvy() const { return dvy_; }

  double x(int i) const { return space_.lo.x + (i + 0.5) * dx_; }
  double y(int j) const { return space_.lo.y + (j + 0.5) * dy_; }
  double vx(int k) const { return velocity_.lo.x + (k + 0.5) * dvx_; }
  double vy(int l) const { return velocity_.lo.y + (l + 0.5) * dvy_; }

  std::size_t spatial_cells() const { return std::size_t(nx_) * ny_; }
  std::size_t velocity_cells() const { return std::size_t(nvx_) * nvy_; }
  std::size_t cell_count() const { return spatial_cells() * velocity_cells(); }
  double cell_volume() const { return dx_ * dy_ * dvx_ * dvy_; }

  std::size_t index(int i, int j, int k, int l) const {
    return ((std::size_t(i) * ny_ + j) * nvx_ + k) * nvy_ + l;
  }
  std::array<int, 4> unravel(std::size_t c) const;

  /// Largest |v| component bound of the truncation box, per axis.
  Vec2 speed_bound() const;

  friend PhaseGrid build_grid(const GridConfig& config);
  friend bool operator==(const PhaseGrid&, const PhaseGrid&) = default;

 private:
  Box space_;
  Box velocity_;
  int nx_ = 0, ny_ = 0, nvx_ = 0, nvy_ = 0;
  double dx_ = 0, dy_ = 0, dvx_ = 0, dvy_ = 0;
};

/// Throws ConfigError on non-positive/too-small counts or inverted extents.
PhaseGrid build_grid(const GridConfig& config);

enum class Axis : int { X = 0, Y = 1 };
enum class Side : int { Lo = 0, Hi = 1 };

/// One (spatial face, velocity cell) pair on the boundary of the phase box.
struct BoundaryFacet {
  std::size_t id = 0;  // position in the full enumeration
  Axis axis = Axis::X;
  Side side = Side::Lo;
  int tangential = 0;  // y index on x faces, x index on y faces
  int k = 0;           // vx cell
  int l = 0;           // vy cell
  Vec2 normal;
  Vec2 point;  // face center
  Vec2 velocity;
  double n_dot_v = 0.0;
  double sigma_weight = 0.0;  // |n.v| * face length * dvx * dvy
};

struct FacetPartition {
  std::vector<BoundaryFacet> outgoing;  // Gamma_+
  std::vector<BoundaryFacet> incoming;  // Gamma_-
  std::vector<BoundaryFacet> glancing;
  std::size_t total() const { return outgoing.size() + incoming.size() + glancing.size(); }
};

/// Every boundary facet in enumeration order: x faces (lo, hi) then y faces,
/// tangential index, vx cell, vy cell.
std::vector<BoundaryFacet> enumerate_facets(const PhaseGrid& grid);

FacetPartition classify_boundary(const PhaseGrid& grid, double tolerance = 0.0);

/// Interior cell adjacent to a facet.
std::size_t adjacent_cell(const PhaseGrid& grid, const BoundaryFacet& facet);

/// Dense row-major (time sample x facet) table.
class TraceMatrix {
 public:
  TraceMatrix() = default;
  TraceMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  void append_row(std::span<const double> values);
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// sum_k time_weights[k] * sum_f |trace(k, f)|^2 * sigma_f.
/// Throws ValidationError when the trace shape does not match.
double surface_norm_sq(const TraceMatrix& trace, std::span<const BoundaryFacet> facets,
                       std::span<const double> time_weights);

/// Midpoint-rule L2(Omega x V) norm squared of a cell array.
double phase_norm_sq(const PhaseGrid& grid, std::span<const double> values);

}  // namespace kinlab
