#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "poselab/skeleton.hpp"

namespace poselab {

/// A set of body poses stored as per-joint axis-angle rows (J x 3 each).
struct PoseDataset {
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> poses;
  int joint_count = 21;

  size_t size() const { return poses.size(); }
  BodyPose body_pose(size_t i) const { return BodyPose::from_axis_angle(poses[i]); }
};

/// Binary pose container: magic "PTK1", u32 LE pose count, u32 LE joint
/// count, then count*joints*3 f32 axis-angle values.
void save_ptk(const PoseDataset& ds, const std::string& path);
PoseDataset load_ptk(const std::string& path);

/// JSON-lines alternative: one {"pose": [[x,y,z], ...]} object per line.
void save_jsonl(const PoseDataset& ds, const std::string& path);
PoseDataset load_jsonl(const std::string& path);

/// Loads by extension: ".ptk"/".bin" binary, anything else JSON-lines.
PoseDataset load_pose_dataset(const std::string& path);

/// Smooth synthetic pose manifold: a low-dimensional latent is pushed
/// through fixed random tanh maps into bounded per-joint axis-angle
/// vectors, so nearby latents give nearby poses. Deterministic per seed.
PoseDataset synthesize_pose_manifold(int count, std::uint64_t seed, int joint_count = 21,
                                     int latent_dim = 8);

}  // namespace poselab
