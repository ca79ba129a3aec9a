#pragma once

// Object models and offline keypoint selection. Two selectors are
// provided: farthest point sampling seeded at the model center (the
// default; spreads keypoints over the surface) and the 8 axis-aligned
// bounding-box corners (a baseline whose virtual corners sit far from the
// surface and therefore collect noisier votes downstream).

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"

namespace votepose {

struct ObjectModel {
  int class_id = 0;
  std::vector<Vec3> points;      // object-frame surface samples
  Vec3 center{};                 // centroid of points
  double diameter = 0.0;         // max pairwise distance
  std::vector<Vec3> keypoints;   // object-frame, filled by selection
};

/// Builds a model from a point cloud: centroid and exact max-pairwise
/// diameter are computed here once (selection is offline; the quadratic
/// scan is deliberate). Throws InvalidArgument on an empty or non-finite
/// cloud.
inline ObjectModel make_object_model(int class_id, std::vector<Vec3> points) {
  if (points.empty()) {
    throw InvalidArgument("object model needs at least one point");
  }
  Vec3 sum{};
  for (const Vec3& p : points) {
    if (!is_finite(p)) {
      throw InvalidArgument("object model contains a non-finite point");
    }
    sum += p;
  }
  ObjectModel model;
  model.class_id = class_id;
  model.center = sum / static_cast<double>(points.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      d2 = std::max(d2, squared_distance(points[i], points[j]));
    }
  }
  model.diameter = std::sqrt(d2);
  model.points = std::move(points);
  return model;
}

namespace detail {

inline std::size_t count_distinct_points(std::vector<Vec3> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
  });
  return static_cast<std::size_t>(
      std::unique(pts.begin(), pts.end()) - pts.begin());
}

}  // namespace detail

/// Farthest point sampling. result[0] is the model center; each further
/// keypoint is the model point maximizing the minimum distance to all
/// previously selected keypoints, with exact-distance ties broken toward
/// the lowest point index. Every result after the first is an element of
/// model.points.
///
/// Throws InvalidArgument for m == 0 and KeypointCountExceedsModel when m
/// exceeds 1 + the number of distinct model points (a point index is never
/// selected twice).
inline std::vector<Vec3> fps_select(const ObjectModel& model, std::size_t m) {
  if (m == 0) throw InvalidArgument("fps_select needs m >= 1");
  const std::vector<Vec3>& pts = model.points;
  if (pts.empty()) throw InvalidArgument("fps_select needs a non-empty model");
  if (m > 1 + detail::count_distinct_points(pts)) {
    throw KeypointCountExceedsModel(
        "fps_select: m exceeds 1 + distinct model point count");
  }

  std::vector<Vec3> result;
  result.reserve(m);
  result.push_back(model.center);

  const std::size_t n = pts.size();
  std::vector<double> min_d2(n);
  std::vector<char> taken(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    min_d2[i] = squared_distance(pts[i], model.center);
  }
  while (result.size() < m) {
    std::size_t best = n;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i] && min_d2[i] > best_d2) {  // strict: first index wins ties
        best_d2 = min_d2[i];
        best = i;
      }
    }
    taken[best] = 1;
    result.push_back(pts[best]);
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) {
        min_d2[i] = std::min(min_d2[i], squared_distance(pts[i], pts[best]));
      }
    }
  }
  return result;
}

/// The 8 corners of the axis-aligned bounding box, in a fixed binary
/// order: corner index c uses min (bit clear) or max (bit set) per axis,
/// with bit 0 = x, bit 1 = y, bit 2 = z. So c=0 is (min,min,min), c=1 is
/// (max,min,min), c=2 is (min,max,min), ..., c=7 is (max,max,max).
inline std::vector<Vec3> bbox8_select(const ObjectModel& model) {
  if (model.points.empty()) {
    throw InvalidArgument("bbox8_select needs a non-empty model");
  }
  Vec3 lo = model.points.front();
  Vec3 hi = lo;
  for (const Vec3& p : model.points) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
    hi.z = std::max(hi.z, p.z);
  }
  std::vector<Vec3> corners;
  corners.reserve(8);
  for (int c = 0; c < 8; ++c) {
    corners.push_back({(c & 1) ? hi.x : lo.x,
                       (c & 2) ? hi.y : lo.y,
                       (c & 4) ? hi.z : lo.z});
  }
  return corners;
}

/// Mean distance from each keypoint to its nearest model point. Zero iff
/// every keypoint lies on the sampled surface; virtual keypoints (center,
/// box corners) contribute their true offset from the surface.
inline double mean_keypoint_distance(const ObjectModel& model,
                                     const std::vector<Vec3>& keypoints) {
  if (model.points.empty()) {
    throw InvalidArgument("mean_keypoint_distance needs a non-empty model");
  }
  if (keypoints.empty()) {
    throw InvalidArgument("mean_keypoint_distance needs >= 1 keypoint");
  }
  double sum = 0.0;
  for (const Vec3& k : keypoints) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : model.points) {
      best = std::min(best, squared_distance(k, p));
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(keypoints.size());
}

}  // namespace votepose
