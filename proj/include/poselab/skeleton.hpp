#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "poselab/rotations.hpp"

namespace poselab {

/// One joint of a kinematic tree. `parent < 0` marks the root; offsets are
/// rest-pose displacements from the parent, in meters.
struct Joint {
  std::string name;
  int parent = -1;
  Vec3d offset = Vec3d::Zero();
};

/// Topologically sorted kinematic tree with exactly one root at index 0.
struct Skeleton {
  std::vector<Joint> joints;

  int size() const { return static_cast<int>(joints.size()); }
  int root() const { return 0; }
  std::optional<int> find(const std::string& name) const;

  /// The 22-joint humanoid this project ships as `assets/skeleton_humanoid22.json`.
  static Skeleton default_humanoid();
};

/// Parses and validates a skeleton JSON file
/// (`{"joints": [{"name", "parent", "offset": [x,y,z]}]}`). Joints are
/// re-sorted topologically if needed; cycles, multiple roots, missing roots
/// and out-of-range parents raise InvalidSkeletonError.
Skeleton load_skeleton(const std::string& path);
Skeleton parse_skeleton_json(const std::string& json_text);
std::string skeleton_to_json(const Skeleton& skel);

/// Body pose: one 6D rotation per non-root joint (row j pairs with skeleton
/// joint j+1), plus a global orientation and root translation.
struct BodyPose {
  Eigen::Matrix<double, Eigen::Dynamic, 6> rotations;  // J-1 rows of [a;b]
  Mat3d global_orient = Mat3d::Identity();
  Vec3d root_translation = Vec3d::Zero();

  int joint_count() const { return static_cast<int>(rotations.rows()); }

  static BodyPose rest(int body_joints = 21);
  /// Converts per-joint axis-angle rows (J-1 x 3) into the 6D storage form.
  static BodyPose from_axis_angle(const Eigen::Matrix<double, Eigen::Dynamic, 3>& aa,
                                  const Vec3d& global_orient_aa = Vec3d::Zero(),
                                  const Vec3d& root_translation = Vec3d::Zero());
  Eigen::Matrix<double, Eigen::Dynamic, 3> to_axis_angle() const;

  Mat3d joint_rotation(int body_index) const;
  void set_joint_rotation(int body_index, const Mat3d& r);
};

/// 3D joint positions, one column per skeleton joint, meters.
using Joints3D = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Rigid forward kinematics:
///   pos(root)  = root_translation,  R(root) = global_orient
///   pos(child) = pos(parent) + R(parent) * offset(child)
///   R(child)   = R(parent) * R_local(child)
Joints3D forward_kinematics(const BodyPose& pose, const Skeleton& skel);

/// World rotations of every joint, composed the same way as forward_kinematics.
std::vector<Mat3d> fk_world_rotations(const BodyPose& pose, const Skeleton& skel);

}  // namespace poselab
