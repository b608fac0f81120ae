#pragma once

#include <cstdint>
#include <vector>

#include "poselab/camera.hpp"
#include "poselab/skeleton.hpp"
#include "poselab/tals.hpp"

namespace poselab {

/// One synthetic evaluation scene: a posed body observed by an eye-height
/// camera that tilts slightly downward. All joints project with positive
/// depth under gt_cam.
struct SyntheticScene {
  BodyPose gt_pose;
  PerspectiveCamera gt_cam;
  Eigen::Vector2d image_size{1024.0, 1024.0};
};

/// Deterministic scene generator: standing/walking-like poses, cameras at
/// ~1.6 m height with pitch in [-15, 0] degrees and focals in [800, 1500] px.
std::vector<SyntheticScene> generate_scenes(int n, std::uint64_t seed, const Skeleton& skel);

/// The fixed-focal camera convention of HPS crop pipelines: focal is
/// 5000/256 of the crop size regardless of the true lens.
double fixed_crop_focal(double crop_size);

/// Fits camera translation (only) to minimize squared 2D error against
/// reference pixels via `iterations` optimizer steps from an analytic
/// similar-triangles initialization.
PerspectiveCamera fit_translation(const Joints3D& j3d, const Keypoints2D& ref_pixels,
                                  const PerspectiveCamera& start, int iterations = 100,
                                  double lr = 0.1);

/// Wrong-camera factory for the threshold/mismatch pipelines: keeps the GT
/// viewing rotation, swaps in the fixed crop focal and refits translation.
WrongCameraFactory fixed_focal_wrong_camera(int fit_iterations = 100);

/// Wrong-camera factory scaling the true focal by `factor` (translation
/// refit as above); used for mismatch-severity sweeps.
WrongCameraFactory focal_scaled_wrong_camera(double factor, int fit_iterations = 100);

struct MismatchReport {
  double pck05 = 0.0;
  double pck10 = 0.0;
  double mean_err2d_norm = 0.0;            // width-normalized mean joint error
  std::vector<double> per_joint_err_norm;  // per skeleton joint
  int scenes_used = 0;
  int scenes_excluded = 0;
};

/// Projects every scene's GT body under its true camera (reference) and
/// under the factory's mismatched camera, then scores PCK of the mismatched
/// projections against the reference.
MismatchReport camera_mismatch_experiment(const std::vector<SyntheticScene>& scenes,
                                          const WrongCameraFactory& wrong_cam_factory,
                                          const Skeleton& skel);

/// Configuration of the 2D-anchored 3D-divergence optimization.
struct AttackConfig {
  double w_2d = 4.0;
  double w_3d = 40.5;
  double margin = 20.0;
  int iterations = 200;
  double step_size = 1e-2;     // Adam learning rate on pose/translation
  double step_decay = 0.999;   // multiplicative per iteration
  bool hinged = true;          // floor the objective at zero (margin form)
  int fit_iterations = 100;
};

struct AttackTrajectoryRow {
  int iter = 0;
  double err2d = 0.0;  // width-normalized mean per-joint 2D error
  double mpjpe = 0.0;  // millimeters
};

struct AttackResult {
  std::vector<AttackTrajectoryRow> trajectory;
  double initial_err2d = 0.0;  // after the translation fit, before attacking
  double initial_mpjpe = 0.0;
  bool aborted = false;  // non-finite loss or joints driven behind the camera
};

/// Runs the margin objective on one scene: pose parameters (body rotations
/// plus global orientation in 6D form) and the camera translation descend on
/// w2d*|proj - ref|_2 - w3d*|J3D - J3D_gt|_2 + margin (both norms over the
/// stacked joint residuals; the 3D term is root-relative, pixels for 2D).
AttackResult adversarial_attack(const SyntheticScene& scene, const AttackConfig& cfg,
                                const Skeleton& skel);

}  // namespace poselab
