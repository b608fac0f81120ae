#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poselab/camera.hpp"
#include "poselab/skeleton.hpp"

namespace poselab {

/// Per-joint effective error thresholds plus the below-threshold scale
/// factors. 2D thresholds are in width-normalized image units, pose
/// thresholds in radians.
struct TalsThresholds {
  double alpha_pose = 0.01;
  double alpha_2d = 0.01;
  std::map<std::string, double> eps_2d;
  std::map<std::string, double> eps_pose;

  std::string to_json() const;
  static TalsThresholds from_json(const std::string& text);
  static TalsThresholds load(const std::string& path);
  void save(const std::string& path) const;
};

/// Maps a skeleton joint name onto the 2D threshold-table name it
/// corresponds to (e.g. Jaw -> "OP Nose"); empty when no table entry
/// applies. Used when thresholds come from the shipped table rather than a
/// recomputation keyed by skeleton names.
std::string default_2d_threshold_alias(const std::string& skeleton_joint);

/// Per-joint 2D epsilon lookup for a skeleton: exact name match first, then
/// the alias table. Joints without an entry come back empty and are counted.
struct Resolved2dThresholds {
  std::vector<std::optional<double>> eps;  // one per skeleton joint
  int unmatched = 0;
};
Resolved2dThresholds resolve_2d_thresholds(const TalsThresholds& th, const Skeleton& skel);

/// A camera factory builds the mismatched camera used to compute effective
/// thresholds or mismatch reports for one scene (ground-truth joints plus
/// the true camera are supplied).
using WrongCameraFactory =
    std::function<PerspectiveCamera(const Joints3D& gt_j3d, const PerspectiveCamera& gt_cam,
                                    double image_width, double image_height)>;

/// Mean per-joint absolute projection gap between the true and mismatched
/// cameras, in width-normalized units, averaged per axis and over scenes.
/// Scenes whose mismatched projection puts joints behind the camera are
/// skipped and counted.
struct Thresholds2dReport {
  std::vector<double> eps;  // one per skeleton joint
  int scenes_used = 0;
  int scenes_skipped = 0;
};
Thresholds2dReport estimate_thresholds_2d(const std::vector<BodyPose>& gt_poses,
                                          const std::vector<PerspectiveCamera>& gt_cams,
                                          double image_width, double image_height,
                                          const WrongCameraFactory& wrong_cam_factory,
                                          const Skeleton& skel);

/// Mean geodesic distance (radians) per joint over paired pose lists.
std::vector<double> estimate_thresholds_pose(const std::vector<BodyPose>& pred_poses,
                                             const std::vector<BodyPose>& gt_poses);

/// Piecewise pose loss: per joint, squared distance between the 6D rotation
/// parameters, downscaled by alpha_pose when the geodesic error is within
/// that joint's threshold. The branch condition uses the geodesic error, not
/// the loss value.
struct TalsLossResult {
  double total = 0.0;
  std::vector<double> per_joint;
  std::vector<bool> above_threshold;
  int skipped = 0;  // joints without a threshold (2D loss only)
};
TalsLossResult tals_pose_loss(const BodyPose& pred, const BodyPose& pgt,
                              const std::vector<std::string>& joint_names,
                              const TalsThresholds& th);

/// Piecewise 2D keypoint loss on width-normalized coordinates: per joint, the
/// per-axis mean absolute error, confidence-weighted, downscaled by alpha_2d
/// when within the joint's threshold. Joints without a threshold entry are
/// skipped and counted.
TalsLossResult tals_2d_loss(const Keypoints2D& pred2d, const Keypoints2D& pgt2d,
                            const std::vector<std::string>& joint_names,
                            const TalsThresholds& th);

}  // namespace poselab
