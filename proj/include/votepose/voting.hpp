#pragma once

// Scene/prediction containers and the Hough-voting stages: turning
// per-point offsets into keypoint votes, splitting a scene into object
// instances by clustering voted centers, and condensing per-instance
// keypoint votes into one position estimate per keypoint.

#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"
#include "votepose/mean_shift.hpp"

namespace votepose {

struct SceneInstance {
  int class_id = 0;
  Pose gt_pose{};
  // How many points the generator emitted for this instance before
  // occlusion removal; the baseline for invisible_fraction.
  std::size_t expected_points = 0;
};

/// A camera-frame point cloud with ground-truth labels. gt_class 0 is
/// background; gt_instance indexes into `instances` (-1 for background
/// points).
struct Scene {
  int frame_id = 0;
  std::vector<Vec3> points;
  std::vector<int> gt_class;
  std::vector<int> gt_instance;
  std::vector<SceneInstance> instances;
};

/// Dense per-point network-style output: M keypoint offsets and one
/// center offset per point, plus a per-class confidence row. Offsets
/// point from the scene point toward the target, so the vote for
/// keypoint j from point i is points[i] + kp_offset(i, j).
struct Prediction {
  std::size_t num_points = 0;
  std::size_t num_keypoints = 0;
  std::size_t num_classes = 0;            // includes background class 0
  std::vector<Vec3> kp_offsets;           // num_points * num_keypoints, row-major
  std::vector<Vec3> center_offsets;       // num_points
  std::vector<double> class_scores;       // num_points * num_classes, row-major

  const Vec3& kp_offset(std::size_t i, std::size_t j) const {
    return kp_offsets[i * num_keypoints + j];
  }
  Vec3& kp_offset(std::size_t i, std::size_t j) {
    return kp_offsets[i * num_keypoints + j];
  }
  double score(std::size_t i, std::size_t c) const {
    return class_scores[i * num_classes + c];
  }

  /// Argmax class for point i; equal scores resolve to the lowest class id.
  int predicted_class(std::size_t i) const {
    int best = 0;
    double best_score = class_scores[i * num_classes];
    for (std::size_t c = 1; c < num_classes; ++c) {
      double s = class_scores[i * num_classes + c];
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    return best;
  }

  /// Shape consistency check; throws InvalidArgument on any mismatch.
  void validate() const {
    if (num_classes == 0) {
      throw InvalidArgument("prediction needs >= 1 class (background)");
    }
    if (kp_offsets.size() != num_points * num_keypoints ||
        center_offsets.size() != num_points ||
        class_scores.size() != num_points * num_classes) {
      throw InvalidArgument("prediction array sizes disagree with header");
    }
  }
};

/// vote[j][i] = points[i] + offsets[i * num_keypoints + j]; plain
/// elementwise addition, nothing else. `offsets` holds num_keypoints
/// entries per point, grouped by point.
inline std::vector<std::vector<Vec3>> apply_offsets(
    const std::vector<Vec3>& points, const std::vector<Vec3>& offsets,
    std::size_t num_keypoints) {
  if (num_keypoints == 0) {
    throw InvalidArgument("apply_offsets: need at least one keypoint");
  }
  if (offsets.size() != points.size() * num_keypoints) {
    throw InvalidArgument("apply_offsets: offsets size must be points * M");
  }
  std::vector<std::vector<Vec3>> votes(num_keypoints);
  for (std::size_t j = 0; j < num_keypoints; ++j) {
    votes[j].resize(points.size());
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < num_keypoints; ++j) {
      votes[j][i] = points[i] + offsets[i * num_keypoints + j];
    }
  }
  return votes;
}

/// One hypothesized object instance: the scene points claiming it and the
/// clustered center their votes agreed on.
struct InstanceCluster {
  int class_id = 0;
  std::vector<std::size_t> point_indices;
  Vec3 voted_center{};
};

struct SegmentationParams {
  double bandwidth = 0.05;
  double tol = 1e-4;
  int max_iter = 300;
  std::size_t min_cluster_points = 10;  // noise floor
};

/// Splits a scene into instance clusters: each point gets its argmax
/// class, background (class 0) is dropped, and per class the voted
/// centers (point + center offset) are clustered by mean shift. Clusters
/// smaller than min_cluster_points are discarded. Output order is
/// ascending class id, then cluster discovery order; point_indices are
/// ascending scene indices.
inline std::vector<InstanceCluster> segment_instances(
    const Scene& scene, const Prediction& pred,
    const SegmentationParams& params = {}) {
  pred.validate();
  if (pred.num_points != scene.points.size()) {
    throw InvalidArgument("prediction point count disagrees with scene");
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    int c = pred.predicted_class(i);
    if (c != 0) by_class[c].push_back(i);
  }

  std::vector<InstanceCluster> out;
  for (const auto& [class_id, indices] : by_class) {
    std::vector<Vec3> voted(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      voted[k] = scene.points[indices[k]] + pred.center_offsets[indices[k]];
    }
    MeanShiftResult ms = mean_shift(
        voted, MeanShiftParams{params.bandwidth, params.tol, params.max_iter});
    std::vector<InstanceCluster> clusters(ms.centers.size());
    for (std::size_t c = 0; c < ms.centers.size(); ++c) {
      clusters[c].class_id = class_id;
      clusters[c].voted_center = ms.centers[c];
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
      clusters[ms.assignment[k]].point_indices.push_back(indices[k]);
    }
    for (InstanceCluster& cluster : clusters) {
      if (cluster.point_indices.size() >= params.min_cluster_points) {
        out.push_back(std::move(cluster));
      }
    }
  }
  return out;
}

/// Clustered per-keypoint estimates for one instance. support[j] counts
/// the votes that landed in the winning cluster for keypoint j.
struct KeypointEstimate {
  std::vector<Vec3> positions;
  std::vector<std::size_t> support;
};

struct AggregationParams {
  double bandwidth = 0.02;
  double tol = 1e-4;
  int max_iter = 300;
  // Ablation switch: skip mean shift and take the plain vote mean. The
  // default mode takes the most-populated mean-shift cluster, which is
  // what buys outlier robustness.
  bool use_mean = false;
};

inline KeypointEstimate aggregate_keypoints(const InstanceCluster& cluster,
                                            const Scene& scene,
                                            const Prediction& pred,
                                            const AggregationParams& params = {}) {
  pred.validate();
  if (pred.num_points != scene.points.size()) {
    throw InvalidArgument("prediction point count disagrees with scene");
  }
  if (cluster.point_indices.empty()) {
    throw InvalidArgument("aggregate_keypoints: cluster has no points");
  }
  for (std::size_t idx : cluster.point_indices) {
    if (idx >= scene.points.size()) {
      throw InvalidArgument("aggregate_keypoints: cluster index out of range");
    }
  }

  const std::size_t m = pred.num_keypoints;
  std::vector<Vec3> member_points(cluster.point_indices.size());
  std::vector<Vec3> member_offsets(cluster.point_indices.size() * m);
  for (std::size_t k = 0; k < cluster.point_indices.size(); ++k) {
    const std::size_t idx = cluster.point_indices[k];
    member_points[k] = scene.points[idx];
    for (std::size_t j = 0; j < m; ++j) {
      member_offsets[k * m + j] = pred.kp_offset(idx, j);
    }
  }
  std::vector<std::vector<Vec3>> votes =
      apply_offsets(member_points, member_offsets, m);

  KeypointEstimate est;
  est.positions.resize(m);
  est.support.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (params.use_mean) {
      Vec3 sum{};
      for (const Vec3& v : votes[j]) sum += v;
      est.positions[j] = sum / static_cast<double>(votes[j].size());
      est.support[j] = votes[j].size();
      continue;
    }
    MeanShiftResult ms = mean_shift(
        votes[j],
        MeanShiftParams{params.bandwidth, params.tol, params.max_iter});
    std::vector<std::size_t> population(ms.centers.size(), 0);
    for (std::size_t a : ms.assignment) ++population[a];
    std::size_t best = 0;
    for (std::size_t c = 1; c < ms.centers.size(); ++c) {
      if (population[c] > population[best]) best = c;  // ties: lowest index
    }
    est.positions[j] = ms.centers[best];
    est.support[j] = population[best];
  }
  return est;
}

}  // namespace votepose
