#pragma once

// Meshed study area: cells, demand densities, straight-line routing and the
// order-prospect / opportunity-cost fields derived from them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "senseauction/error.hpp"

namespace senseauction {

/// Planar coordinates in km. The world spans [0, cols*cell] x [0, rows*cell].
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

using CellId = std::size_t;

class GridWorld {
 public:
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t cell_count() const { return rows_ * cols_; }
  double cell_size() const { return cell_size_; }
  double width() const { return static_cast<double>(cols_) * cell_size_; }
  double height() const { return static_cast<double>(rows_) * cell_size_; }

  double density(CellId g) const { return densities_.at(g); }
  std::span<const double> densities() const { return densities_; }

  /// Largest centroid-to-centroid distance M (cell_size for a 1x1 grid).
  double max_centroid_dist() const { return max_centroid_dist_; }

  std::size_t row_of(CellId g) const { return g / cols_; }
  std::size_t col_of(CellId g) const { return g % cols_; }
  CellId cell_at(std::size_t row, std::size_t col) const { return row * cols_ + col; }

  Point centroid(CellId g) const {
    return {(static_cast<double>(col_of(g)) + 0.5) * cell_size_,
            (static_cast<double>(row_of(g)) + 0.5) * cell_size_};
  }

  double centroid_distance(CellId a, CellId b) const { return distance(centroid(a), centroid(b)); }

  bool contains(Point p) const {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
           p.x <= width() && p.y <= height();
  }

  /// Cell holding `p`; points on the far edges belong to the last row/column.
  CellId cell_of(Point p) const {
    if (!contains(p)) {
      throw GeometryError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                          ") lies outside the world");
    }
    const auto col = std::min(cols_ - 1, static_cast<std::size_t>(p.x / cell_size_));
    const auto row = std::min(rows_ - 1, static_cast<std::size_t>(p.y / cell_size_));
    return cell_at(row, col);
  }

 private:
  friend GridWorld build_grid(std::size_t, std::size_t, double, std::vector<double>);

  GridWorld() = default;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double cell_size_ = 1.0;
  std::vector<double> densities_;
  double max_centroid_dist_ = 1.0;
};

/// Builds a grid and normalizes `densities` (given row-major, row 0 south) to sum 1.
inline GridWorld build_grid(std::size_t rows, std::size_t cols, double cell_size,
                            std::vector<double> densities) {
  if (rows == 0 || cols == 0) throw ConfigError("grid needs at least one row and one column");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw ConfigError("cell size must be positive");
  if (densities.size() != rows * cols) {
    throw ConfigError("expected " + std::to_string(rows * cols) + " densities, got " +
                      std::to_string(densities.size()));
  }
  for (double n : densities) {
    if (!std::isfinite(n) || n < 0.0) throw ConfigError("densities must be finite and non-negative");
  }
  const double total = std::accumulate(densities.begin(), densities.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("total demand density is zero");
  for (double& n : densities) n /= total;

  GridWorld world;
  world.rows_ = rows;
  world.cols_ = cols;
  world.cell_size_ = cell_size;
  world.densities_ = std::move(densities);
  // Opposite corner centroids are the farthest pair.
  world.max_centroid_dist_ =
      rows * cols == 1
          ? cell_size
          : cell_size * std::hypot(static_cast<double>(cols - 1), static_cast<double>(rows - 1));
  return world;
}

/// Cells traversed by a trip plus its length.
struct CellRoute {
  std::vector<CellId> cells;
  double length = 0.0;
};

namespace detail {

// Parameter at which segment o->o+dir first meets the closed box, or -1 when
// it misses. Box edges are widened by `eps` so exact corner passes register.
inline double clip_entry(Point o, Point dir, double x0, double x1, double y0, double y1, double eps) {
  double t_in = 0.0;
  double t_out = 1.0;
  const double p[4] = {-dir.x, dir.x, -dir.y, dir.y};
  const double q[4] = {o.x - (x0 - eps), (x1 + eps) - o.x, o.y - (y0 - eps), (y1 + eps) - o.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return -1.0;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t_in = std::max(t_in, t);
    } else {
      t_out = std::min(t_out, t);
    }
    if (t_in > t_out) return -1.0;
  }
  return t_in;
}

}  // namespace detail

/// Straight-line route: every cell whose closed square the segment touches
/// (supercover), ordered by first contact, ties by cell id.
inline CellRoute route(const GridWorld& world, Point origin, Point dest) {
  if (!world.contains(origin) || !world.contains(dest)) {
    throw GeometryError("route endpoint lies outside the world");
  }
  CellRoute out;
  out.length = distance(origin, dest);
  if (origin == dest) {
    out.cells.push_back(world.cell_of(origin));
    return out;
  }

  const double cs = world.cell_size();
  const double eps = 1e-9 * cs;
  auto index_range = [cs, eps](double lo, double hi, std::size_t n) {
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor((lo - eps) / cs)));
    const auto last = std::min(n - 1, static_cast<std::size_t>(std::max(0.0, std::floor((hi + eps) / cs))));
    return std::pair{std::min(first, n - 1), last};
  };
  const auto [c0, c1] = index_range(std::min(origin.x, dest.x), std::max(origin.x, dest.x), world.cols());
  const auto [r0, r1] = index_range(std::min(origin.y, dest.y), std::max(origin.y, dest.y), world.rows());

  const Point dir{dest.x - origin.x, dest.y - origin.y};
  std::vector<std::pair<double, CellId>> touched;
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      const double x0 = static_cast<double>(c) * cs;
      const double y0 = static_cast<double>(r) * cs;
      const double t = detail::clip_entry(origin, dir, x0, x0 + cs, y0, y0 + cs, eps);
      if (t >= 0.0) touched.emplace_back(t, world.cell_at(r, c));
    }
  }
  std::sort(touched.begin(), touched.end());
  out.cells.reserve(touched.size());
  for (const auto& [t, g] : touched) out.cells.push_back(g);
  return out;
}

/// Decay weight w_{g,t} = 1 - d(g, t) / M between two cell centroids.
inline double prospect_weight(const GridWorld& world, CellId g, CellId dest) {
  return 1.0 - world.centroid_distance(g, dest) / world.max_centroid_dist();
}

/// Order prospect of a destination cell: density-weighted sum of decay weights.
inline double order_prospect(const GridWorld& world, CellId dest_cell) {
  if (dest_cell >= world.cell_count()) throw ContractViolation("destination cell out of range");
  double p = 0.0;
  for (CellId g = 0; g < world.cell_count(); ++g) p += prospect_weight(world, g, dest_cell) * world.density(g);
  return p;
}

/// Piecewise-linear opportunity cost on top of the per-cell prospect field.
struct ProspectModel {
  double xi = 50.0;          // CNY per unit prospect shortfall
  double p_star_frac = 0.9;  // p* = p_star_frac * p_max
  double p_min = 0.0;
  double p_max = 0.0;
  double p_star = 0.0;
  std::vector<double> field;  // prospect per cell

  double prospect(CellId g) const { return field.at(g); }
};

inline ProspectModel build_prospect_model(const GridWorld& world, double xi = 50.0, double p_star_frac = 0.9) {
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw ConfigError("xi must be finite and non-negative");
  if (!(p_star_frac >= 0.0 && p_star_frac <= 1.0)) throw ConfigError("p_star_frac must lie in [0, 1]");
  ProspectModel model;
  model.xi = xi;
  model.p_star_frac = p_star_frac;
  model.field.resize(world.cell_count());
  for (CellId g = 0; g < world.cell_count(); ++g) model.field[g] = order_prospect(world, g);
  const auto [lo, hi] = std::minmax_element(model.field.begin(), model.field.end());
  model.p_min = *lo;
  model.p_max = *hi;
  model.p_star = p_star_frac * model.p_max;
  return model;
}

inline double order_prospect(const GridWorld& world, const ProspectModel& model, CellId dest_cell) {
  if (dest_cell < model.field.size()) return model.field[dest_cell];
  return order_prospect(world, dest_cell);
}

/// f(p) = xi (p* - p) below the critical prospect, zero at or above it.
inline double opportunity_cost(const ProspectModel& model, double p) {
  return p < model.p_star ? model.xi * (model.p_star - p) : 0.0;
}

}  // namespace senseauction
