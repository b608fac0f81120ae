#pragma once

#include <Eigen/Core>

#include <string>

#include "poselab/rotations.hpp"
#include "poselab/skeleton.hpp"

namespace poselab {

/// 2D keypoints, one column per joint, with per-joint confidences in [0,1].
struct Keypoints2D {
  Eigen::Matrix<double, 2, Eigen::Dynamic> points;
  Eigen::VectorXd confidence;

  int count() const { return static_cast<int>(points.cols()); }
  static Keypoints2D with_unit_confidence(Eigen::Matrix<double, 2, Eigen::Dynamic> pts);
};

/// Pinhole camera with a single shared focal length and zero skew.
/// Camera-frame coordinates are p_cam = rotation * p_world + translation,
/// x right, y down, z forward (depth must be positive to project).
struct PerspectiveCamera {
  double focal = 1000.0;                    // pixels, fx = fy
  Eigen::Vector2d principal{0.0, 0.0};      // pixels
  Mat3d rotation = Mat3d::Identity();
  Vec3d translation = Vec3d::Zero();        // meters
};

/// Scaled orthographic projection: p = scale * (x, y) + offset; depth ignored.
struct WeakPerspectiveCamera {
  double scale = 1.0;
  Eigen::Vector2d offset{0.0, 0.0};
};

/// Projects joints through a perspective camera. Throws BehindCameraError
/// (listing the offending joint indices) if any depth is <= 1e-6 m.
Keypoints2D project_perspective(const Joints3D& j3d, const PerspectiveCamera& cam);

Keypoints2D project_weak_perspective(const Joints3D& j3d, const WeakPerspectiveCamera& cam);

/// Maps pixels into width-normalized coordinates: p' = (p - (w/2, h/2)) / w.
/// Both axes are divided by the image width, so a full-width image spans
/// [-0.5, 0.5] horizontally.
Keypoints2D normalize_keypoints(const Keypoints2D& kp, double image_width, double image_height);

/// Inverse of normalize_keypoints.
Keypoints2D denormalize_keypoints(const Keypoints2D& kp, double image_width, double image_height);

/// Camera JSON:
///   {"type": "perspective", "focal": f, "principal": [cx,cy], "translation": [tx,ty,tz]}
///   {"type": "weak", "scale": s, "offset": [ox,oy]}
std::string perspective_camera_to_json(const PerspectiveCamera& cam);
std::string weak_camera_to_json(const WeakPerspectiveCamera& cam);
PerspectiveCamera parse_perspective_camera_json(const std::string& text);
WeakPerspectiveCamera parse_weak_camera_json(const std::string& text);

}  // namespace poselab
