#pragma once

// Static 3D kd-tree for nearest-neighbor queries (the spatial index
// behind the closest-point metric). Median split, axes cycled by depth,
// with (coordinate, index) ordering so the tree layout is deterministic
// even with duplicate coordinates. Queries return the exact nearest
// squared distance; the fast path must agree with a brute-force scan to
// the last bit, which holds because both take a min over the same set of
// identically-computed squared distances.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"

namespace votepose {

class KdTree3 {
 public:
  explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidArgument("kd-tree needs >= 1 point");
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    build(0, order_.size(), 0);
  }

  /// Squared distance from q to the closest stored point.
  double nearest_squared_distance(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(0, order_.size(), 0, q, best);
    return best;
  }

  double nearest_distance(const Vec3& q) const {
    return std::sqrt(nearest_squared_distance(q));
  }

  std::size_t size() const { return points_.size(); }

 private:
  static double axis_value(const Vec3& p, int axis) {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  }

  // The subtree over order_[lo, hi) is rooted at the median position
  // mid = (lo + hi) / 2; left and right children are the sub-ranges.
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid,
                     order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       const double va = axis_value(points_[a], axis);
                       const double vb = axis_value(points_[b], axis);
                       if (va != vb) return va < vb;
                       return a < b;
                     });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q,
              double& best) const {
    if (lo >= hi) return;
    const std::size_t mid = (lo + hi) / 2;
    const Vec3& p = points_[order_[mid]];
    best = std::min(best, squared_distance(p, q));
    if (hi - lo == 1) return;
    const double delta = axis_value(q, axis) - axis_value(p, axis);
    const int next = (axis + 1) % 3;
    if (delta < 0.0) {
      search(lo, mid, next, q, best);
      if (delta * delta <= best) search(mid + 1, hi, next, q, best);
    } else {
      search(mid + 1, hi, next, q, best);
      if (delta * delta <= best) search(lo, mid, next, q, best);
    }
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
};

}  // namespace votepose
