#pragma once

#include <Eigen/Core>

#include "poselab/camera.hpp"
#include "poselab/rotations.hpp"
#include "poselab/skeleton.hpp"

namespace poselab {

/// Similarity transform p -> scale * rotation * p + translation.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3d rotation = Mat3d::Identity();
  Vec3d translation = Vec3d::Zero();

  Joints3D apply(const Joints3D& p) const {
    return (scale * (rotation * p)).colwise() + translation;
  }
};

/// Mean per-joint position error in millimeters, after centering both sets
/// on their root joint (column 0).
double mpjpe(const Joints3D& pred, const Joints3D& gt);

/// Least-squares similarity alignment of pred onto gt (cross-covariance SVD
/// with determinant correction, so the rotation is always proper). Throws
/// DegenerateConfigurationError for fewer than 3 or collinear joints.
SimilarityTransform procrustes_align(const Joints3D& pred, const Joints3D& gt);

/// mpjpe after optimally aligning pred onto gt.
double pa_mpjpe(const Joints3D& pred, const Joints3D& gt);

/// Fraction of joints whose 2D error is under threshold_factor times the
/// reference size, where the reference is 10% of the diagonal of the ground
/// truth keypoint bounding box.
double pck(const Keypoints2D& pred2d, const Keypoints2D& gt2d, double threshold_factor);

}  // namespace poselab
