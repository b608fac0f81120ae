#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "poselab/errors.hpp"

namespace poselab {

template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3 = Eigen::Matrix<S, 3, 3>;
/// First two columns of a rotation matrix, stored as [a; b] (6 values).
template <typename S>
using Rot6 = Eigen::Matrix<S, 6, 1>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Rot6d = Rot6<double>;

template <typename S>
inline Mat3<S> skew(const Vec3<S>& v) {
  Mat3<S> m;
  m << S(0), -v.z(), v.y(), v.z(), S(0), -v.x(), -v.y(), v.x(), S(0);
  return m;
}

/// Rodrigues formula with a 2nd-order Taylor branch below an angle of 1e-7,
/// so the map is continuous through the identity.
template <typename S>
Mat3<S> aa_to_rotmat(const Vec3<S>& aa) {
  if (!aa.allFinite()) throw std::invalid_argument("aa_to_rotmat: non-finite axis-angle input");
  const S theta2 = aa.squaredNorm();
  const S theta = std::sqrt(theta2);
  S sinc, cosc;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < S(1e-7)) {
    sinc = S(1) - theta2 / S(6);
    cosc = S(0.5) - theta2 / S(24);
  } else {
    sinc = std::sin(theta) / theta;
    cosc = (S(1) - std::cos(theta)) / theta2;
  }
  const Mat3<S> k = skew(aa);
  return Mat3<S>::Identity() + sinc * k + cosc * (k * k);
}

/// Max-norm deviation of m from orthonormality; also requires det(m) > 0.
template <typename S>
S rotmat_defect(const Mat3<S>& m) {
  const S ortho = (m.transpose() * m - Mat3<S>::Identity()).cwiseAbs().maxCoeff();
  const S det = std::abs(m.determinant() - S(1));
  return std::max(ortho, det);
}

template <typename S>
bool is_rotmat(const Mat3<S>& m, S tol = S(1e-9)) {
  return m.allFinite() && rotmat_defect(m) <= tol;
}

/// Logarithm map. Returns the canonical axis-angle with angle in [0, pi].
/// At exactly pi, the axis sign is fixed so its first nonzero component is
/// positive. Input must be orthonormal within `tol` (default 1e-6).
template <typename S>
Vec3<S> rotmat_to_aa(const Mat3<S>& r, S tol = S(1e-6)) {
  if (!r.allFinite() || rotmat_defect(r) > tol)
    throw std::invalid_argument("rotmat_to_aa: input is not a rotation matrix within tolerance");

  // w = vee(R - R^T)/2 has magnitude sin(theta); trace gives cos(theta).
  const Vec3<S> w(S(0.5) * (r(2, 1) - r(1, 2)), S(0.5) * (r(0, 2) - r(2, 0)),
                  S(0.5) * (r(1, 0) - r(0, 1)));
  const S s = w.norm();
  const S c = std::clamp((r.trace() - S(1)) * S(0.5), S(-1), S(1));
  const S theta = std::atan2(s, c);

  if (s >= S(1e-5)) return (theta / s) * w;
  if (c > S(0)) return w;  // theta ~ s, so theta/s ~ 1 to O(s^2)

  // Near pi: recover the axis from the symmetrized (R + R^T + 2I)/4, which
  // equals ((1+cos)I + (1-cos) axis*axis^T)/2 exactly (the sin term cancels).
  const Mat3<S> b = S(0.25) * (r + r.transpose() + S(2) * Mat3<S>::Identity());
  int imax;
  b.diagonal().maxCoeff(&imax);
  Vec3<S> axis;
  const S d = std::sqrt(std::max(b(imax, imax), S(0)));
  axis[imax] = d;
  for (int i = 0; i < 3; ++i)
    if (i != imax) axis[i] = b(imax, i) / d;
  axis.normalize();
  if (s > S(1e-11) && axis.dot(w) < S(0)) {
    axis = -axis;
  } else if (s <= S(1e-11)) {
    // At pi the sign is a convention: first nonzero component positive.
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > S(1e-7)) {
        if (axis[i] < S(0)) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

/// Wraps an axis-angle into the canonical range (magnitude in [0, pi]).
template <typename S>
Vec3<S> canonicalize_aa(const Vec3<S>& aa) {
  constexpr S two_pi = S(2) * std::numbers::pi_v<S>;
  S theta = aa.norm();
  if (theta == S(0)) return aa;
  const Vec3<S> axis = aa / theta;
  theta = std::fmod(theta, two_pi);
  if (theta > std::numbers::pi_v<S>) return (two_pi - theta) * -axis;
  return theta * axis;
}

/// Gram-Schmidt decode of a 6D rotation: c1 = a/|a|, c2 = normalized rejection
/// of b from c1, c3 = c1 x c2. Invariant to positive scaling of a and b.
template <typename S>
Mat3<S> rot6d_to_rotmat(const Rot6<S>& r6) {
  const Vec3<S> a = r6.template head<3>();
  const Vec3<S> b = r6.template tail<3>();
  const S an = a.norm();
  if (!(an > S(1e-8)))
    throw DegenerateRotationError("rot6d_to_rotmat: first column has near-zero norm");
  const Vec3<S> c1 = a / an;
  const Vec3<S> rej = b - c1.dot(b) * c1;
  const S rn = rej.norm();
  if (!(rn > S(1e-8) * std::max(S(1), b.norm())))
    throw DegenerateRotationError("rot6d_to_rotmat: columns are parallel");
  const Vec3<S> c2 = rej / rn;
  Mat3<S> r;
  r.col(0) = c1;
  r.col(1) = c2;
  r.col(2) = c1.cross(c2);
  return r;
}

/// Encode as the first two columns, exactly.
template <typename S>
Rot6<S> rotmat_to_rot6d(const Mat3<S>& r) {
  Rot6<S> r6;
  r6.template head<3>() = r.col(0);
  r6.template tail<3>() = r.col(1);
  return r6;
}

/// Angle of the relative rotation r1^T r2, in [0, pi]. Equals
/// arccos(clamp((trace(r1^T r2) - 1)/2, -1, 1)); evaluated through atan2 so
/// it stays accurate near 0 and pi.
template <typename S>
S geodesic_distance(const Mat3<S>& r1, const Mat3<S>& r2) {
  const Mat3<S> d = r1.transpose() * r2;
  const Vec3<S> w(S(0.5) * (d(2, 1) - d(1, 2)), S(0.5) * (d(0, 2) - d(2, 0)),
                  S(0.5) * (d(1, 0) - d(0, 1)));
  const S c = std::clamp((d.trace() - S(1)) * S(0.5), S(-1), S(1));
  return std::atan2(w.norm(), c);
}

}  // namespace poselab
