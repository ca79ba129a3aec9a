#pragma once

// Pose-accuracy metrics and training-style losses.
//
// add_distance:  mean over model points of the distance between the same
//                point under the estimated and ground-truth poses.
// adds_distance: mean over model points of the distance to the *closest*
//                ground-truth-transformed point; the symmetric-object
//                variant, never larger than add_distance.
// auc:           exact area under the accuracy-vs-threshold curve from 0
//                to max_threshold, normalized to [0, 1]:
//                (1 / (n * T)) * sum_i max(0, T - d_i).
// accuracy_at:   fraction of distances strictly below a threshold.
//
// Failed estimates are conventionally carried as d = +infinity: they count
// in n, never pass a threshold, and add nothing to the AUC sum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"
#include "votepose/kdtree.hpp"
#include "votepose/keypoints.hpp"
#include "votepose/voting.hpp"

namespace votepose {

/// One evaluated instance, as written to the results CSV.
struct EvalRecord {
  int frame_id = 0;
  int class_id = 0;
  int instance_id = 0;
  double add = 0.0;
  double adds = 0.0;
  bool symmetric = false;
  double invisible_fraction = 0.0;
};

inline double add_distance(const ObjectModel& model, const Pose& estimated,
                           const Pose& ground_truth) {
  if (model.points.empty()) {
    throw InvalidArgument("add_distance needs a non-empty model");
  }
  double sum = 0.0;
  for (const Vec3& p : model.points) {
    sum += distance(transform_point(estimated, p),
                    transform_point(ground_truth, p));
  }
  return sum / static_cast<double>(model.points.size());
}

inline double adds_distance(const ObjectModel& model, const Pose& estimated,
                            const Pose& ground_truth) {
  if (model.points.empty()) {
    throw InvalidArgument("adds_distance needs a non-empty model");
  }
  std::vector<Vec3> gt_points(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    gt_points[i] = transform_point(ground_truth, model.points[i]);
  }
  KdTree3 tree(std::move(gt_points));
  double sum = 0.0;
  for (const Vec3& p : model.points) {
    sum += tree.nearest_distance(transform_point(estimated, p));
  }
  return sum / static_cast<double>(model.points.size());
}

namespace detail {

inline void validate_distances(const std::vector<double>& distances,
                               const char* who) {
  if (distances.empty()) {
    throw InvalidArgument(std::string(who) + " needs >= 1 distance");
  }
  for (double d : distances) {
    if (std::isnan(d) || d < 0.0) {
      throw InvalidArgument(std::string(who) +
                            ": distances must be >= 0 and not NaN");
    }
  }
}

}  // namespace detail

/// Exact closed-form AUC; the grid-integration of the empirical accuracy
/// curve converges to this as the grid refines.
inline double auc(const std::vector<double>& distances,
                  double max_threshold = 0.1) {
  detail::validate_distances(distances, "auc");
  if (!(max_threshold > 0.0)) {
    throw InvalidArgument("auc max_threshold must be > 0");
  }
  double sum = 0.0;
  for (double d : distances) {
    sum += std::max(0.0, max_threshold - d);
  }
  return sum / (static_cast<double>(distances.size()) * max_threshold);
}

/// Fraction of distances strictly below `threshold`.
inline double accuracy_at(const std::vector<double>& distances,
                          double threshold) {
  detail::validate_distances(distances, "accuracy_at");
  if (!(threshold > 0.0)) {
    throw InvalidArgument("accuracy_at threshold must be > 0");
  }
  std::size_t hits = 0;
  for (double d : distances) {
    if (d < threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(distances.size());
}

/// Accuracy-threshold curve summary: the exact AUC over [0, max_threshold]
/// plus accuracies at named thresholds.
struct AccuracyCurve {
  double max_threshold = 0.1;
  double auc = 0.0;
  std::map<double, double> accuracy_at_threshold;
};

inline AccuracyCurve build_accuracy_curve(
    const std::vector<double>& distances, double max_threshold = 0.1,
    const std::vector<double>& named_thresholds = {0.02}) {
  AccuracyCurve curve;
  curve.max_threshold = max_threshold;
  curve.auc = auc(distances, max_threshold);
  for (double t : named_thresholds) {
    curve.accuracy_at_threshold[t] = accuracy_at(distances, t);
  }
  return curve;
}

/// Norm applied to each per-keypoint 3-vector error inside the offset
/// losses. Euclidean is the default; L1 sums absolute components.
enum class OffsetNorm { euclidean, l1 };

namespace detail {

inline double offset_error(const Vec3& e, OffsetNorm norm_kind) {
  if (norm_kind == OffsetNorm::l1) {
    return std::abs(e.x) + std::abs(e.y) + std::abs(e.z);
  }
  return norm(e);
}

}  // namespace detail

/// Mean keypoint-offset error over member points:
/// (1 / N_member) * sum_{i in members} sum_j |pred_ij - gt_ij|.
/// The divisor is the member point count, not members * keypoints.
/// `membership` flags which points belong to the object.
inline double keypoint_offset_loss(const Prediction& pred,
                                   const std::vector<Vec3>& gt_offsets,
                                   const std::vector<char>& membership,
                                   OffsetNorm norm_kind = OffsetNorm::euclidean) {
  pred.validate();
  if (gt_offsets.size() != pred.kp_offsets.size()) {
    throw InvalidArgument("gt offset count disagrees with prediction");
  }
  if (membership.size() != pred.num_points) {
    throw InvalidArgument("membership size disagrees with prediction");
  }
  std::size_t members = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.num_points; ++i) {
    if (!membership[i]) continue;
    ++members;
    for (std::size_t j = 0; j < pred.num_keypoints; ++j) {
      sum += detail::offset_error(
          pred.kp_offset(i, j) - gt_offsets[i * pred.num_keypoints + j],
          norm_kind);
    }
  }
  if (members == 0) {
    throw InvalidArgument("keypoint_offset_loss: no member points");
  }
  return sum / static_cast<double>(members);
}

/// Center-offset analogue of keypoint_offset_loss (one offset per point).
inline double center_offset_loss(const Prediction& pred,
                                 const std::vector<Vec3>& gt_offsets,
                                 const std::vector<char>& membership,
                                 OffsetNorm norm_kind = OffsetNorm::euclidean) {
  pred.validate();
  if (gt_offsets.size() != pred.num_points) {
    throw InvalidArgument("gt center offset count disagrees with prediction");
  }
  if (membership.size() != pred.num_points) {
    throw InvalidArgument("membership size disagrees with prediction");
  }
  std::size_t members = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.num_points; ++i) {
    if (!membership[i]) continue;
    ++members;
    sum += detail::offset_error(pred.center_offsets[i] - gt_offsets[i],
                                norm_kind);
  }
  if (members == 0) {
    throw InvalidArgument("center_offset_loss: no member points");
  }
  return sum / static_cast<double>(members);
}

/// Mean focal loss over points: -alpha * (1 - q_i)^gamma * log(q_i), with
/// q_i the predicted confidence of point i's true class. Confidences at or
/// below 1e-12 are clamped to 1e-12 (never NaN/inf); `clamped_count`, when
/// given, receives how many were clamped.
inline double focal_loss(const Prediction& pred,
                         const std::vector<int>& gt_labels, double alpha,
                         double gamma, std::size_t* clamped_count = nullptr) {
  pred.validate();
  if (gt_labels.size() != pred.num_points) {
    throw InvalidArgument("label count disagrees with prediction");
  }
  if (pred.num_points == 0) {
    throw InvalidArgument("focal_loss needs >= 1 point");
  }
  if (!(alpha >= 0.0) || !(gamma >= 0.0)) {
    throw InvalidArgument("focal_loss needs alpha >= 0 and gamma >= 0");
  }
  std::size_t clamped = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.num_points; ++i) {
    const int label = gt_labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= pred.num_classes) {
      throw InvalidArgument("gt label out of class range");
    }
    double row_sum = 0.0;
    for (std::size_t c = 0; c < pred.num_classes; ++c) {
      const double s = pred.score(i, c);
      if (std::isnan(s) || s < 0.0) {
        throw InvalidArgument("class scores must be >= 0 and not NaN");
      }
      row_sum += s;
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw InvalidArgument("class score row does not sum to 1");
    }
    double q = pred.score(i, static_cast<std::size_t>(label));
    if (q <= 1e-12) {
      q = 1e-12;
      ++clamped;
    }
    sum += -alpha * std::pow(1.0 - q, gamma) * std::log(q);
  }
  if (clamped_count != nullptr) *clamped_count = clamped;
  return sum / static_cast<double>(pred.num_points);
}

/// Weighted sum of the three task losses; all weights default to 1.
inline double multi_task_loss(double keypoint_loss, double semantic_loss,
                              double center_loss, double w_keypoint = 1.0,
                              double w_semantic = 1.0, double w_center = 1.0) {
  const double parts[] = {keypoint_loss, semantic_loss, center_loss,
                          w_keypoint, w_semantic, w_center};
  for (double v : parts) {
    if (!std::isfinite(v)) {
      throw InvalidArgument("multi_task_loss components must be finite");
    }
  }
  if (w_keypoint < 0.0 || w_semantic < 0.0 || w_center < 0.0) {
    throw InvalidArgument("multi_task_loss weights must be >= 0");
  }
  return w_keypoint * keypoint_loss + w_semantic * semantic_loss +
         w_center * center_loss;
}

/// Fraction of an instance's generated points that occlusion removed:
/// 1 - visible / expected, clamped to [0, 1]. `expected_points` on the
/// scene instance is the zero-occlusion emission count recorded by the
/// generator.
inline double invisible_fraction(const Scene& scene, int instance_id) {
  if (instance_id < 0 ||
      static_cast<std::size_t>(instance_id) >= scene.instances.size()) {
    throw InvalidArgument("invisible_fraction: unknown instance id");
  }
  const std::size_t expected =
      scene.instances[static_cast<std::size_t>(instance_id)].expected_points;
  if (expected == 0) {
    throw InvalidArgument(
        "invisible_fraction: instance has no recorded expected point count");
  }
  std::size_t visible = 0;
  for (int gi : scene.gt_instance) {
    if (gi == instance_id) ++visible;
  }
  if (visible >= expected) return 0.0;
  // Integer subtraction first: one rounding, so e.g. 30/100 compares
  // equal to the literal 0.3.
  return static_cast<double>(expected - visible) /
         static_cast<double>(expected);
}

}  // namespace votepose
