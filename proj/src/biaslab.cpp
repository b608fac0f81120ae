#include "poselab/biaslab.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "poselab/adam.hpp"
#include "poselab/errors.hpp"
#include "poselab/fk_graph.hpp"
#include "poselab/metrics.hpp"
#include "poselab/tape.hpp"

namespace poselab {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Per-joint axis-angle standard deviations for the walking/standing pose
// sampler, indexed by the default humanoid's body joints (1..21). Legs and
// arms swing in the sagittal plane; knees and elbows flex one-sided.
struct JointNoise {
  Vec3d sigma;
  Vec3d lo, hi;
};

JointNoise joint_noise(const std::string& name) {
  auto sym = [](double x, double y, double z) {
    return JointNoise{Vec3d(x, y, z), Vec3d(-2.0 * x, -2.0 * y, -2.0 * z),
                      Vec3d(2.0 * x, 2.0 * y, 2.0 * z)};
  };
  if (name == "LHip" || name == "RHip") return sym(0.40, 0.12, 0.10);
  if (name == "LKnee" || name == "RKnee")
    return JointNoise{Vec3d(0.45, 0.02, 0.02), Vec3d(0.0, -0.05, -0.05), Vec3d(1.1, 0.05, 0.05)};
  if (name == "LAnkle" || name == "RAnkle") return sym(0.18, 0.05, 0.05);
  if (name == "LToe" || name == "RToe") return sym(0.08, 0.02, 0.02);
  if (name == "Spine" || name == "Thorax" || name == "Chest") return sym(0.08, 0.08, 0.05);
  if (name == "Neck" || name == "Jaw") return sym(0.12, 0.12, 0.06);
  if (name == "LCollar" || name == "RCollar") return sym(0.04, 0.04, 0.04);
  if (name == "LShoulder" || name == "RShoulder") return sym(0.35, 0.25, 0.40);
  if (name == "LElbow" || name == "RElbow")
    return JointNoise{Vec3d(0.10, 0.55, 0.10), Vec3d(-0.2, -1.3, -0.2), Vec3d(0.2, 1.3, 0.2)};
  if (name == "LWrist" || name == "RWrist") return sym(0.15, 0.15, 0.15);
  return sym(0.05, 0.05, 0.05);
}

Vec3d clamp3(const Vec3d& v, const Vec3d& lo, const Vec3d& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

// Camera basis looking along `forward` (world, unit-ish) with image y down.
Mat3d camera_rotation(const Vec3d& forward) {
  const Vec3d z = forward.normalized();
  Vec3d x = z.cross(Vec3d::UnitY());
  if (x.norm() < 1e-9) x = Vec3d::UnitX();
  x.normalize();
  const Vec3d y = z.cross(x);
  Mat3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return r;
}

}  // namespace

std::vector<SyntheticScene> generate_scenes(int n, std::uint64_t seed, const Skeleton& skel) {
  if (n < 1) throw std::invalid_argument("generate_scenes: n must be >= 1");
  std::mt19937_64 rng(seed * 2862933555777941757ULL + 3037000493ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<size_t>(n));
  while (static_cast<int>(scenes.size()) < n) {
    SyntheticScene sc;

    // Pose: bounded sagittal-heavy perturbations around rest.
    Eigen::Matrix<double, Eigen::Dynamic, 3> aa(skel.size() - 1, 3);
    for (int j = 1; j < skel.size(); ++j) {
      const JointNoise jn = joint_noise(skel.joints[j].name);
      Vec3d v;
      for (int c = 0; c < 3; ++c) v(c) = jn.sigma(c) * gauss(rng);
      aa.row(j - 1) = clamp3(v, jn.lo, jn.hi).transpose();
    }
    const double body_yaw = (u01(rng) - 0.5) * 50.0 * kDeg;  // mostly frontal
    const Vec3d root(0.3 * (u01(rng) - 0.5), 0.93 + 0.04 * (u01(rng) - 0.5),
                     0.3 * (u01(rng) - 0.5));
    sc.gt_pose = BodyPose::from_axis_angle(aa, Vec3d(0, body_yaw, 0), root);

    // Camera: eye height, slight downward pitch, looking at the body along
    // +z. Distance scales with focal so the body spans ~60-75% of the frame.
    const double focal = 800.0 + 700.0 * u01(rng);
    const double pitch = -(2.0 + 13.0 * u01(rng)) * kDeg;  // within [-15, 0]
    const double yaw = 6.0 * kDeg * (u01(rng) - 0.5);
    const double dist = focal / sc.image_size.y() * 1.7 * (1.35 + 0.65 * u01(rng));
    const double height = 1.55 + 0.1 * u01(rng);
    const Vec3d position(0.25 * (u01(rng) - 0.5), height, -dist);
    Vec3d forward(std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw));
    sc.gt_cam.rotation = camera_rotation(forward);
    sc.gt_cam.translation = -(sc.gt_cam.rotation * position);
    sc.gt_cam.focal = focal;
    sc.gt_cam.principal = {sc.image_size.x() / 2.0, sc.image_size.y() / 2.0};

    try {
      (void)project_perspective(forward_kinematics(sc.gt_pose, skel), sc.gt_cam);
    } catch (const BehindCameraError&) {
      continue;  // replacement draw keeps the invariant without partial scenes
    }
    scenes.push_back(std::move(sc));
  }
  return scenes;
}

double fixed_crop_focal(double crop_size) { return 5000.0 / 256.0 * crop_size; }

PerspectiveCamera fit_translation(const Joints3D& j3d, const Keypoints2D& ref_pixels,
                                  const PerspectiveCamera& start, int iterations, double lr) {
  PerspectiveCamera cam = start;

  // Similar-triangles initialization: match the projected extent and center.
  const Eigen::Matrix3Xd pc = (cam.rotation * j3d).colwise() + cam.translation;
  const double spread3d =
      (pc.row(1).maxCoeff() - pc.row(1).minCoeff() + pc.row(0).maxCoeff() - pc.row(0).minCoeff()) /
      2.0;
  const double spread2d = ((ref_pixels.points.row(1).maxCoeff() - ref_pixels.points.row(1).minCoeff()) +
                           (ref_pixels.points.row(0).maxCoeff() - ref_pixels.points.row(0).minCoeff())) /
                          2.0;
  if (spread2d > 1e-9 && spread3d > 1e-9) {
    const double z_target = cam.focal * spread3d / spread2d;
    const Vec3d centroid = pc.rowwise().mean();
    const double u_mean = ref_pixels.points.row(0).mean();
    const double v_mean = ref_pixels.points.row(1).mean();
    Vec3d t = cam.translation;
    t.z() += z_target - centroid.z();
    const double z_new = centroid.z() + (z_target - centroid.z());
    t.x() += (u_mean - cam.principal.x()) * z_new / cam.focal - centroid.x();
    t.y() += (v_mean - cam.principal.y()) * z_new / cam.focal - centroid.y();
    cam.translation = t;
  }

  Eigen::MatrixXd t_param = cam.translation;
  Adam<double> adam({&t_param}, lr);
  for (int it = 0; it < iterations; ++it) {
    Tape<double> tape;
    Var<double> tv = tape.input(t_param);
    Var<double> proj = project_perspective_graph<double>(
        tape, tape.constant(Eigen::MatrixXd(j3d)), cam.rotation, tv, cam.focal,
        cam.principal.x(), cam.principal.y());
    Var<double> loss = tape.sum(tape.square(tape.sub(proj, tape.constant(ref_pixels.points))));
    tape.backward(loss);
    adam.step({tape.grad(tv)});
    adam.learning_rate *= 0.95;
    // keep depth positive; the telephoto regime never needs to cross zero
    const Eigen::Matrix3Xd depth_check = (cam.rotation * j3d).colwise() + Vec3d(t_param);
    if (depth_check.row(2).minCoeff() < 0.05) break;
  }
  cam.translation = Vec3d(t_param);
  return cam;
}

WrongCameraFactory fixed_focal_wrong_camera(int fit_iterations) {
  return [fit_iterations](const Joints3D& gt_j3d, const PerspectiveCamera& gt_cam,
                          double image_width, double image_height) {
    (void)image_height;
    PerspectiveCamera wrong = gt_cam;
    wrong.focal = fixed_crop_focal(image_width);
    const Keypoints2D ref = project_perspective(gt_j3d, gt_cam);
    return fit_translation(gt_j3d, ref, wrong, fit_iterations);
  };
}

WrongCameraFactory focal_scaled_wrong_camera(double factor, int fit_iterations) {
  return [factor, fit_iterations](const Joints3D& gt_j3d, const PerspectiveCamera& gt_cam,
                                  double image_width, double image_height) {
    (void)image_width;
    (void)image_height;
    PerspectiveCamera wrong = gt_cam;
    wrong.focal = gt_cam.focal * factor;
    const Keypoints2D ref = project_perspective(gt_j3d, gt_cam);
    return fit_translation(gt_j3d, ref, wrong, fit_iterations);
  };
}

MismatchReport camera_mismatch_experiment(const std::vector<SyntheticScene>& scenes,
                                          const WrongCameraFactory& wrong_cam_factory,
                                          const Skeleton& skel) {
  if (scenes.empty()) throw std::invalid_argument("camera_mismatch_experiment: no scenes");
  MismatchReport report;
  report.per_joint_err_norm.assign(static_cast<size_t>(skel.size()), 0.0);
  double pck05_sum = 0.0, pck10_sum = 0.0, err_sum = 0.0;
  for (const SyntheticScene& sc : scenes) {
    const Joints3D j3d = forward_kinematics(sc.gt_pose, skel);
    Keypoints2D ref, wrong;
    try {
      ref = project_perspective(j3d, sc.gt_cam);
      const PerspectiveCamera wc =
          wrong_cam_factory(j3d, sc.gt_cam, sc.image_size.x(), sc.image_size.y());
      wrong = project_perspective(j3d, wc);
    } catch (const BehindCameraError&) {
      ++report.scenes_excluded;
      continue;
    }
    pck05_sum += pck(wrong, ref, 0.5);
    pck10_sum += pck(wrong, ref, 1.0);
    const Keypoints2D refn = normalize_keypoints(ref, sc.image_size.x(), sc.image_size.y());
    const Keypoints2D wrongn = normalize_keypoints(wrong, sc.image_size.x(), sc.image_size.y());
    double scene_err = 0.0;
    for (int j = 0; j < skel.size(); ++j) {
      const double e = (wrongn.points.col(j) - refn.points.col(j)).norm();
      report.per_joint_err_norm[static_cast<size_t>(j)] += e;
      scene_err += e;
    }
    err_sum += scene_err / skel.size();
    ++report.scenes_used;
  }
  if (report.scenes_used > 0) {
    pck05_sum /= report.scenes_used;
    pck10_sum /= report.scenes_used;
    err_sum /= report.scenes_used;
    for (double& e : report.per_joint_err_norm) e /= report.scenes_used;
  }
  report.pck05 = pck05_sum;
  report.pck10 = pck10_sum;
  report.mean_err2d_norm = err_sum;
  return report;
}

AttackResult adversarial_attack(const SyntheticScene& scene, const AttackConfig& cfg,
                                const Skeleton& skel) {
  if (!(cfg.w_2d > 0) || !(cfg.w_3d >= 0))
    throw std::invalid_argument("adversarial_attack: weights must be positive");
  AttackResult result;

  const Joints3D gt_j3d = forward_kinematics(scene.gt_pose, skel);
  const Keypoints2D gt_px = project_perspective(gt_j3d, scene.gt_cam);

  // The mismatched camera lives in its native 256-pixel crop convention
  // (fixed focal 5000); the 2D term of the objective is measured in those
  // crop pixels, which is what the margin and weights are calibrated to.
  const double kCrop = 256.0;
  PerspectiveCamera wrong = scene.gt_cam;
  wrong.focal = fixed_crop_focal(kCrop);
  wrong.principal = {kCrop / 2.0, kCrop / 2.0};
  Keypoints2D gt_crop = gt_px;
  gt_crop.points *= kCrop / scene.image_size.x();
  wrong = fit_translation(gt_j3d, gt_crop, wrong, cfg.fit_iterations);

  auto err2d_of = [&](const Keypoints2D& crop_px) {
    return (crop_px.points - gt_crop.points).colwise().norm().mean() / kCrop;
  };
  result.initial_err2d = err2d_of(project_perspective(gt_j3d, wrong));
  result.initial_mpjpe = 0.0;

  // Optimization variables: body pose (6D), global orientation (6D), camera
  // translation. Root translation stays inside the (fitted) camera term.
  Eigen::MatrixXd pose_param = scene.gt_pose.rotations.transpose();  // 6 x 21
  Eigen::MatrixXd orient_param = rotmat_to_rot6d<double>(scene.gt_pose.global_orient);
  Eigen::MatrixXd trans_param = wrong.translation;

  Adam<double> adam({&pose_param, &orient_param, &trans_param}, cfg.step_size);

  const Eigen::MatrixXd root_const = scene.gt_pose.root_translation;
  Joints3D gt_rel = gt_j3d.colwise() - gt_j3d.col(0);

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    Tape<double> t;
    Var<double> pose_v = t.input(pose_param);
    Var<double> orient6_v = t.input(orient_param);
    Var<double> trans_v = t.input(trans_param);

    Var<double> orient_v = rot6d_to_rotmat_graph(t, orient6_v);
    Var<double> j3d = forward_kinematics_graph(t, skel, pose_v, orient_v,
                                               t.constant(root_const));
    // Root-relative 3D divergence (translation alone cannot inflate it).
    Var<double> root_col = t.block(j3d, 0, 0, 3, 1);
    Var<double> rep = t.matmul(root_col, t.constant(Eigen::MatrixXd::Ones(1, skel.size())));
    Var<double> rel = t.sub(j3d, rep);
    Var<double> e3 = t.norm2(t.sub(rel, t.constant(Eigen::MatrixXd(gt_rel))));

    Var<double> proj = project_perspective_graph<double>(t, j3d, wrong.rotation, trans_v,
                                                         wrong.focal, wrong.principal.x(),
                                                         wrong.principal.y());
    Var<double> e2 = t.norm2(t.sub(proj, t.constant(gt_crop.points)));

    Var<double> obj = t.add_const(
        t.sub(t.scale(e2, cfg.w_2d), t.scale(e3, cfg.w_3d)), cfg.margin);
    if (cfg.hinged) obj = t.relu(obj);

    const double obj_value = t.val(obj)(0, 0);
    if (!std::isfinite(obj_value)) {
      result.aborted = true;
      break;
    }

    t.backward(obj);
    adam.step({t.grad(pose_v), t.grad(orient6_v), t.grad(trans_v)});
    adam.learning_rate *= cfg.step_decay;

    // Score the updated state.
    BodyPose current = scene.gt_pose;
    current.rotations = pose_param.transpose();
    bool valid = true;
    for (int j = 0; j < current.joint_count(); ++j) {
      Rot6d r6 = current.rotations.row(j).transpose();
      try {
        current.set_joint_rotation(j, rot6d_to_rotmat<double>(r6));
      } catch (const DegenerateRotationError&) {
        valid = false;
        break;
      }
    }
    Mat3d orient_now = Mat3d::Identity();
    try {
      orient_now = rot6d_to_rotmat<double>(Rot6d(orient_param));
    } catch (const DegenerateRotationError&) {
      valid = false;
    }
    if (!valid) {
      result.aborted = true;
      break;
    }
    current.global_orient = orient_now;

    const Joints3D now = forward_kinematics(current, skel);
    PerspectiveCamera cam_now = wrong;
    cam_now.translation = Vec3d(trans_param);
    AttackTrajectoryRow row;
    row.iter = iter;
    row.mpjpe = mpjpe(now, gt_j3d);
    try {
      row.err2d = err2d_of(project_perspective(now, cam_now));
    } catch (const BehindCameraError&) {
      result.aborted = true;
      break;
    }
    result.trajectory.push_back(row);
  }
  return result;
}

}  // namespace poselab
