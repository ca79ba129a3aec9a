#pragma once

// Rigid-transform primitives shared by every other module. Conventions,
// fixed once and relied on throughout:
//
//   * all quantities are double precision, distances in meters, angles in
//     radians;
//   * rotation matrices are row-major 3x3, applied as p' = R * p + t;
//   * compose(a, b) applies b first, then a;
//   * a pose is serialized as 12 whitespace-separated numbers: the 9
//     rotation entries in row-major order followed by the 3 translation
//     components, written losslessly (see number_io.hpp).

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "votepose/errors.hpp"
#include "votepose/number_io.hpp"

namespace votepose {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Vec3 operator*(double s, const Vec3& v) {
    return {s * v.x, s * v.y, s * v.z};
  }
  friend Vec3 operator*(const Vec3& v, double s) { return s * v; }
  friend Vec3 operator/(const Vec3& v, double s) {
    return {v.x / s, v.y / s, v.z / s};
  }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }

  /// Exact component-wise comparison; used for duplicate detection and
  /// bitwise round-trip tests, never for geometric tolerance checks.
  friend bool operator==(const Vec3& a, const Vec3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
  }
  friend bool operator!=(const Vec3& a, const Vec3& b) { return !(a == b); }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
          a.x * b.y - a.y * b.x};
}

inline double squared_norm(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(squared_norm(v)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }
inline double squared_distance(const Vec3& a, const Vec3& b) {
  return squared_norm(a - b);
}

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Row-major 3x3 matrix. Entry (r, c) lives at m[3 * r + c].
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }

  double& operator()(int r, int c) { return m[3 * r + c]; }
  double operator()(int r, int c) const { return m[3 * r + c]; }

  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }

  double determinant() const {
    const auto& a = m;
    return a[0] * (a[4] * a[8] - a[5] * a[7]) -
           a[1] * (a[3] * a[8] - a[5] * a[6]) +
           a[2] * (a[3] * a[7] - a[4] * a[6]);
  }

  friend Vec3 operator*(const Mat3& a, const Vec3& v) {
    return {a.m[0] * v.x + a.m[1] * v.y + a.m[2] * v.z,
            a.m[3] * v.x + a.m[4] * v.y + a.m[5] * v.z,
            a.m[6] * v.x + a.m[7] * v.y + a.m[8] * v.z};
  }

  friend Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
        r(i, j) = s;
      }
    return r;
  }

  friend bool operator==(const Mat3& a, const Mat3& b) { return a.m == b.m; }
};

/// Frobenius norm of (R^T R - I); zero for a perfectly orthonormal matrix.
inline double orthonormality_error(const Mat3& r) {
  Mat3 g = r.transposed() * r;
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double d = g(i, j) - (i == j ? 1.0 : 0.0);
      s += d * d;
    }
  return std::sqrt(s);
}

namespace detail {

inline Eigen::Matrix3d to_eigen(const Mat3& m) {
  Eigen::Matrix3d e;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) e(r, c) = m(r, c);
  return e;
}

inline Mat3 from_eigen(const Eigen::Matrix3d& e) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = e(r, c);
  return m;
}

}  // namespace detail

/// Projects a near-rotation matrix back onto SO(3) (closest rotation in
/// the Frobenius sense, via the polar decomposition U V^T of its SVD).
inline Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(detail::to_eigen(r),
                                        Eigen::ComputeFullU |
                                            Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d p = u * v.transpose();
  if (p.determinant() < 0.0) {
    u.col(2) *= -1.0;
    p = u * v.transpose();
  }
  return detail::from_eigen(p);
}

struct Pose {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{};

  static Pose identity() { return Pose{}; }
};

inline Vec3 transform_point(const Pose& pose, const Vec3& p) {
  return pose.rotation * p + pose.translation;
}

/// compose(a, b): the pose that applies b first, then a.
/// The multiplied rotation is re-orthonormalized whenever accumulated
/// round-off pushes it further than 1e-12 from SO(3), so arbitrarily long
/// compose/invert chains keep the pose invariants.
inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if (orthonormality_error(out.rotation) > 1e-12) {
    out.rotation = orthonormalize(out.rotation);
  }
  return out;
}

inline Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transposed();
  out.translation = -(out.rotation * p.translation);
  return out;
}

/// True when rotation is orthonormal with determinant +1 within tol and the
/// translation is finite. Tol matches the library-wide pose invariant.
inline bool satisfies_pose_invariants(const Pose& p, double tol = 1e-9) {
  return orthonormality_error(p.rotation) <= tol &&
         std::abs(p.rotation.determinant() - 1.0) <= tol &&
         is_finite(p.translation);
}

/// Rotation by `angle` radians about `axis` (need not be unit length).
inline Mat3 rotation_about_axis(const Vec3& axis, double angle) {
  double n = norm(axis);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidArgument("rotation axis must be a finite nonzero vector");
  }
  Vec3 u = axis / n;
  double c = std::cos(angle);
  double s = std::sin(angle);
  double ic = 1.0 - c;
  Mat3 r;
  r.m = {c + u.x * u.x * ic,       u.x * u.y * ic - u.z * s, u.x * u.z * ic + u.y * s,
         u.y * u.x * ic + u.z * s, c + u.y * u.y * ic,       u.y * u.z * ic - u.x * s,
         u.z * u.x * ic - u.y * s, u.z * u.y * ic + u.x * s, c + u.z * u.z * ic};
  return r;
}

/// Rotation angle in [0, pi] of a rotation matrix. Uses atan2 of the
/// skew-part norm against the trace: acos((tr - 1) / 2) alone loses half
/// the working precision near zero angle, where cos is flat.
inline double rotation_angle(const Mat3& r) {
  const double c = (r(0, 0) + r(1, 1) + r(2, 2) - 1.0) / 2.0;
  const Vec3 skew{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
  const double s = 0.5 * norm(skew);
  return std::atan2(s, c);
}

/// Angle of the relative rotation between two rotation matrices.
inline double rotation_distance(const Mat3& a, const Mat3& b) {
  return rotation_angle(a.transposed() * b);
}

inline std::string format_pose(const Pose& p) {
  std::string out;
  for (int i = 0; i < 9; ++i) {
    out += format_double(p.rotation.m[i]);
    out += ' ';
  }
  out += format_double(p.translation.x);
  out += ' ';
  out += format_double(p.translation.y);
  out += ' ';
  out += format_double(p.translation.z);
  return out;
}

/// Parses the 12-number pose serialization. Throws InvalidArgument unless
/// the string holds exactly 12 parseable numbers.
inline Pose parse_pose(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> vals;
  std::string tok;
  while (in >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v)) {
      throw InvalidArgument("pose literal holds a malformed number: " + tok);
    }
    vals.push_back(v);
  }
  if (vals.size() != 12) {
    throw InvalidArgument("pose literal must hold exactly 12 numbers, got " +
                          std::to_string(vals.size()));
  }
  Pose p;
  for (int i = 0; i < 9; ++i) p.rotation.m[i] = vals[i];
  p.translation = {vals[9], vals[10], vals[11]};
  return p;
}

}  // namespace votepose
