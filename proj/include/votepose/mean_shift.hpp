#pragma once

// Flat-kernel mean shift over 3D points. Every input point is iterated:
// it repeatedly moves to the mean of all input points within `bandwidth`
// of its current position until the shift drops below `tol` or `max_iter`
// is hit. Converged modes closer than bandwidth/2 are merged, keeping the
// lowest-index mode as the cluster center, and every input point is
// assigned to the cluster its own mode merged into.
//
// Neighbor queries run against a uniform grid with cell size bandwidth/2.
// Each occupied cell stores its points plus a precomputed (sum, count)
// aggregate; a query ball either skips a candidate cell, consumes its
// aggregate whole (cell fully inside the ball), or falls back to
// per-point distance checks on the boundary. Cells are visited in fixed
// ascending order and points in index order, so the floating-point
// accumulation, and with it the whole result, is a pure function of the
// input bits. No randomness, no thread-order dependence.

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"
#include "votepose/random.hpp"

namespace votepose {

struct MeanShiftParams {
  double bandwidth = 0.05;
  double tol = 1e-4;
  int max_iter = 300;
};

struct MeanShiftResult {
  std::vector<Vec3> centers;              // one representative mode per cluster
  std::vector<std::size_t> assignment;    // input index -> cluster index
};

namespace detail {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey& o) const {
    return x == o.x && y == o.y && z == o.z;
  }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(k.x));
    h = mix64(h ^ static_cast<std::uint64_t>(k.y));
    h = mix64(h ^ static_cast<std::uint64_t>(k.z));
    return static_cast<std::size_t>(h);
  }
};

struct Cell {
  std::vector<std::size_t> indices;
  Vec3 sum{};
};

class UniformGrid {
 public:
  UniformGrid(const std::vector<Vec3>& points, double cell_size)
      : points_(points), h_(cell_size) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      Cell& c = cells_[key_of(points[i])];
      c.indices.push_back(i);
      c.sum += points[i];
    }
  }

  /// Sum and count of all points within `radius` of q.
  void ball_sum(const Vec3& q, double radius, Vec3& sum,
                std::size_t& count) const {
    sum = Vec3{};
    count = 0;
    const double r2 = radius * radius;
    const std::int64_t x0 = coord(q.x - radius), x1 = coord(q.x + radius);
    const std::int64_t y0 = coord(q.y - radius), y1 = coord(q.y + radius);
    const std::int64_t z0 = coord(q.z - radius), z1 = coord(q.z + radius);
    for (std::int64_t cx = x0; cx <= x1; ++cx) {
      for (std::int64_t cy = y0; cy <= y1; ++cy) {
        for (std::int64_t cz = z0; cz <= z1; ++cz) {
          auto it = cells_.find(CellKey{cx, cy, cz});
          if (it == cells_.end()) continue;
          const Cell& cell = it->second;
          double lo2, hi2;
          box_distance2(q, cx, cy, cz, lo2, hi2);
          if (lo2 > r2) continue;
          if (hi2 <= r2) {  // cell fully inside the ball
            sum += cell.sum;
            count += cell.indices.size();
          } else {
            for (std::size_t i : cell.indices) {
              if (squared_distance(points_[i], q) <= r2) {
                sum += points_[i];
                ++count;
              }
            }
          }
        }
      }
    }
  }

 private:
  std::int64_t coord(double v) const {
    return static_cast<std::int64_t>(std::floor(v / h_));
  }

  CellKey key_of(const Vec3& p) const {
    return CellKey{coord(p.x), coord(p.y), coord(p.z)};
  }

  // Squared distance from q to the nearest / farthest point of cell
  // (cx, cy, cz)'s axis-aligned box.
  void box_distance2(const Vec3& q, std::int64_t cx, std::int64_t cy,
                     std::int64_t cz, double& lo2, double& hi2) const {
    lo2 = 0.0;
    hi2 = 0.0;
    const double mins[3] = {static_cast<double>(cx) * h_,
                            static_cast<double>(cy) * h_,
                            static_cast<double>(cz) * h_};
    const double qs[3] = {q.x, q.y, q.z};
    for (int a = 0; a < 3; ++a) {
      const double lo = mins[a];
      const double hi = lo + h_;
      double d_lo = 0.0;
      if (qs[a] < lo) d_lo = lo - qs[a];
      else if (qs[a] > hi) d_lo = qs[a] - hi;
      const double d_hi = std::max(qs[a] - lo, hi - qs[a]);
      lo2 += d_lo * d_lo;
      hi2 += d_hi * d_hi;
    }
  }

  const std::vector<Vec3>& points_;
  double h_;
  std::unordered_map<CellKey, Cell, CellKeyHash> cells_;
};

}  // namespace detail

inline MeanShiftResult mean_shift(const std::vector<Vec3>& points,
                                  const MeanShiftParams& params) {
  if (points.empty()) throw InvalidArgument("mean_shift needs >= 1 point");
  if (!(params.bandwidth > 0.0)) {
    throw InvalidArgument("mean_shift bandwidth must be > 0");
  }
  if (!(params.tol > 0.0)) throw InvalidArgument("mean_shift tol must be > 0");
  if (params.max_iter < 1) {
    throw InvalidArgument("mean_shift max_iter must be >= 1");
  }

  const std::size_t n = points.size();
  detail::UniformGrid grid(points, params.bandwidth / 2.0);

  std::vector<Vec3> modes = points;
  std::vector<char> done(n, 0);
  const double tol2 = params.tol * params.tol;
  for (int iter = 0; iter < params.max_iter; ++iter) {
    bool all_done = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      Vec3 sum;
      std::size_t count = 0;
      grid.ball_sum(modes[i], params.bandwidth, sum, count);
      if (count == 0) {  // wandered into empty space; stop where it is
        done[i] = 1;
        continue;
      }
      Vec3 mean = sum / static_cast<double>(count);
      double shift2 = squared_distance(mean, modes[i]);
      modes[i] = mean;
      if (shift2 < tol2) {
        done[i] = 1;
      } else {
        all_done = false;
      }
    }
    if (all_done) break;
  }

  // Merge modes within bandwidth/2; the earliest mode of each cluster is
  // its representative center.
  MeanShiftResult result;
  result.assignment.resize(n);
  const double merge2 = (params.bandwidth / 2.0) * (params.bandwidth / 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cluster = result.centers.size();
    for (std::size_t c = 0; c < result.centers.size(); ++c) {
      if (squared_distance(modes[i], result.centers[c]) <= merge2) {
        cluster = c;
        break;
      }
    }
    if (cluster == result.centers.size()) {
      result.centers.push_back(modes[i]);
    }
    result.assignment[i] = cluster;
  }
  return result;
}

}  // namespace votepose
