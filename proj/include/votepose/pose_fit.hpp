#pragma once

// Closed-form least-squares rigid alignment of corresponding 3D point
// sets (the classic SVD method): given object-frame keypoints kp'_i and
// their camera-frame estimates kp_i, find R, t minimizing
// sum_i w_i ||kp_i - (R kp'_i + t)||^2. Centroids are subtracted, the
// 3x3 covariance H = sum w_i (kp'_i - c̄')(kp_i - c̄)^T is decomposed as
// U S V^T, and R = V diag(1, 1, det(V U^T)) U^T, the determinant factor
// forcing a proper rotation even for planar configurations where the
// unconstrained optimum is a reflection. t = c̄ - R c̄'.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"

namespace votepose {

struct Correspondences {
  std::vector<Vec3> camera_kps;  // measured positions in the camera frame
  std::vector<Vec3> object_kps;  // matching object-frame keypoints
};

/// Weighted rigid fit. Weights default to uniform; when given they must
/// match the correspondence count, be non-negative, and not all be zero.
///
/// Throws InsufficientCorrespondences for fewer than 3 pairs,
/// InvalidArgument for size mismatches or bad weights, and
/// DegenerateConfiguration when the two smallest singular values of H
/// fall below 1e-12 times the largest (collinear or coincident
/// keypoints; the rotation would be unconstrained).
inline Pose least_squares_fit(const Correspondences& c,
                              std::span<const double> weights = {}) {
  const std::size_t n = c.camera_kps.size();
  if (n != c.object_kps.size()) {
    throw InvalidArgument("correspondence lists differ in length");
  }
  if (n < 3) {
    throw InsufficientCorrespondences(
        "pose fit needs >= 3 correspondences, got " + std::to_string(n));
  }
  std::vector<double> uniform;
  if (weights.empty()) {
    uniform.assign(n, 1.0);
    weights = uniform;
  } else if (weights.size() != n) {
    throw InvalidArgument("weight count disagrees with correspondences");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("weights must be finite and >= 0");
    }
    wsum += w;
  }
  if (!(wsum > 0.0)) throw InvalidArgument("weights sum to zero");

  Vec3 cam_centroid{};
  Vec3 obj_centroid{};
  for (std::size_t i = 0; i < n; ++i) {
    cam_centroid += weights[i] * c.camera_kps[i];
    obj_centroid += weights[i] * c.object_kps[i];
  }
  cam_centroid = cam_centroid / wsum;
  obj_centroid = obj_centroid / wsum;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 o = c.object_kps[i] - obj_centroid;
    const Vec3 p = c.camera_kps[i] - cam_centroid;
    const Eigen::Vector3d oe(o.x, o.y, o.z);
    const Eigen::Vector3d pe(p.x, p.y, p.z);
    h += weights[i] * oe * pe.transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();  // descending
  if (s(1) < 1e-12 * s(0) || !(s(0) > 0.0)) {
    throw DegenerateConfiguration(
        "object keypoints are collinear or coincident; rotation is "
        "unconstrained");
  }
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((v * u.transpose()).determinant() < 0.0) {
    u.col(2) *= -1.0;
  }
  const Eigen::Matrix3d r = v * u.transpose();

  Pose pose;
  pose.rotation = detail::from_eigen(r);
  pose.translation = cam_centroid - pose.rotation * obj_centroid;
  return pose;
}

/// Sum of squared alignment errors of `pose` over the correspondences;
/// the quantity least_squares_fit minimizes (with unit weights).
inline double fit_residual(const Correspondences& c, const Pose& pose) {
  if (c.camera_kps.size() != c.object_kps.size()) {
    throw InvalidArgument("correspondence lists differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < c.camera_kps.size(); ++i) {
    sum += squared_distance(c.camera_kps[i],
                            transform_point(pose, c.object_kps[i]));
  }
  return sum;
}

}  // namespace votepose
