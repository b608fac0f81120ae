#include <doctest.h>

#include <Eigen/Geometry>
#include <fstream>
#include <numbers>

#include "poselab/fk_graph.hpp"
#include "poselab/skeleton.hpp"
#include "test_util.hpp"

using namespace poselab;
namespace tu = poselab::testutil;

namespace {

BodyPose random_pose(std::mt19937_64& g, int joints = 21, double max_angle = 1.2) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> aa(joints, 3);
  for (int i = 0; i < joints; ++i) aa.row(i) = tu::random_axis_angle(g, max_angle).transpose();
  std::normal_distribution<double> n(0.0, 0.4);
  return BodyPose::from_axis_angle(aa, tu::random_axis_angle(g, 2.0), Vec3d(n(g), n(g), n(g)));
}

// World transforms through explicit 4x4 homogeneous products.
Joints3D fk_homogeneous_oracle(const BodyPose& pose, const Skeleton& skel) {
  std::vector<Eigen::Matrix4d> world(skel.size());
  Eigen::Matrix4d root = Eigen::Matrix4d::Identity();
  root.topLeftCorner<3, 3>() = pose.global_orient;
  root.topRightCorner<3, 1>() = pose.root_translation;
  world[0] = root;
  for (int j = 1; j < skel.size(); ++j) {
    Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
    local.topLeftCorner<3, 3>() = pose.joint_rotation(j - 1);
    local.topRightCorner<3, 1>() = skel.joints[j].offset;
    world[j] = world[skel.joints[j].parent] * local;
  }
  Joints3D out(3, skel.size());
  for (int j = 0; j < skel.size(); ++j) out.col(j) = world[j].topRightCorner<3, 1>();
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("kinematics");

TEST_CASE("two joint chain from JSON") {
  const std::string text = R"({"joints": [
    {"name": "root", "parent": -1, "offset": [0, 0, 0]},
    {"name": "tip", "parent": 0, "offset": [0, 1, 0]}
  ]})";
  const Skeleton s = parse_skeleton_json(text);
  REQUIRE(s.size() == 2);
  CHECK(s.joints[0].parent == -1);
  CHECK(s.joints[1].parent == 0);
}

TEST_CASE("default humanoid asset matches the built-in skeleton") {
  const Skeleton file = load_skeleton(std::string(POSELAB_ASSETS_DIR) + "/skeleton_humanoid22.json");
  const Skeleton builtin = Skeleton::default_humanoid();
  REQUIRE(file.size() == 22);
  CHECK(file.joints[0].name == "Pelvis");
  CHECK(file.joints[0].parent == -1);
  REQUIRE(builtin.size() == file.size());
  for (int i = 0; i < file.size(); ++i) {
    CHECK(file.joints[i].name == builtin.joints[i].name);
    CHECK(file.joints[i].parent == builtin.joints[i].parent);
    CHECK((file.joints[i].offset - builtin.joints[i].offset).norm() == 0.0);
  }
  // FK smoke test: rest pose spans a plausible standing body.
  const Joints3D j = forward_kinematics(BodyPose::rest(21), file);
  const double height = j.row(1).maxCoeff() - j.row(1).minCoeff();
  CHECK(height > 1.2);
  CHECK(height < 2.0);
}

TEST_CASE("invalid skeletons are rejected") {
  CHECK_THROWS_AS((void)parse_skeleton_json(R"({"joints": [
    {"name": "a", "parent": 0, "offset": [0,0,0]}
  ]})"),
                  InvalidSkeletonError);  // self-parented
  CHECK_THROWS_AS((void)parse_skeleton_json(R"({"joints": [
    {"name": "a", "parent": -1, "offset": [0,0,0]},
    {"name": "b", "parent": -1, "offset": [0,0,0]}
  ]})"),
                  InvalidSkeletonError);  // two roots
  CHECK_THROWS_AS((void)parse_skeleton_json(R"({"joints": [
    {"name": "a", "parent": 1, "offset": [0,0,0]},
    {"name": "b", "parent": 0, "offset": [0,0,0]}
  ]})"),
                  InvalidSkeletonError);  // cycle, no root
}

TEST_CASE("unsorted skeletons are re-sorted topologically") {
  const std::string text = R"({"joints": [
    {"name": "tip", "parent": 1, "offset": [0, 0.5, 0]},
    {"name": "root", "parent": -1, "offset": [0, 0, 0]},
    {"name": "mid", "parent": 1, "offset": [0, 1, 0]}
  ]})";
  const Skeleton s = parse_skeleton_json(text);
  REQUIRE(s.size() == 3);
  CHECK(s.joints[0].name == "root");
  for (int i = 1; i < s.size(); ++i) CHECK(s.joints[i].parent < i);
}

TEST_CASE("identity pose lands on cumulative rest offsets") {
  const Skeleton s = Skeleton::default_humanoid();
  const Joints3D j = forward_kinematics(BodyPose::rest(21), s);
  for (int k = 1; k < s.size(); ++k) {
    const Vec3d expect = j.col(s.joints[k].parent) + s.joints[k].offset;
    CHECK((j.col(k) - expect).norm() < 1e-15);
  }
}

TEST_CASE("global orientation mirrors joints about the root") {
  const Skeleton s = Skeleton::default_humanoid();
  BodyPose pose = BodyPose::rest(21);
  const Joints3D base = forward_kinematics(pose, s);
  pose.global_orient = aa_to_rotmat<double>(Vec3d(0, 0, std::numbers::pi));
  const Joints3D flipped = forward_kinematics(pose, s);
  for (int k = 0; k < s.size(); ++k) {
    CHECK(flipped(0, k) == doctest::Approx(-base(0, k)).epsilon(1e-12));
    CHECK(flipped(1, k) == doctest::Approx(-base(1, k)).epsilon(1e-12));
    CHECK(flipped(2, k) == doctest::Approx(base(2, k)).epsilon(1e-12));
  }
}

TEST_CASE("fk matches the homogeneous-matrix oracle") {
  const Skeleton s = Skeleton::default_humanoid();
  auto g = tu::rng(510);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const BodyPose pose = random_pose(g);
    const Joints3D a = forward_kinematics(pose, s);
    const Joints3D b = fk_homogeneous_oracle(pose, s);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("fk count mismatch raises invalid-argument") {
  const Skeleton s = Skeleton::default_humanoid();
  CHECK_THROWS_AS((void)forward_kinematics(BodyPose::rest(20), s), std::invalid_argument);
}

TEST_CASE("rigidity: bone lengths equal rest offset norms") {
  const Skeleton s = Skeleton::default_humanoid();
  auto g = tu::rng(511);
  for (int i = 0; i < 25; ++i) {
    const Joints3D j = forward_kinematics(random_pose(g), s);
    for (int k = 1; k < s.size(); ++k) {
      const double bone = (j.col(k) - j.col(s.joints[k].parent)).norm();
      CHECK(std::abs(bone - s.joints[k].offset.norm()) < 1e-9);
    }
  }
}

TEST_CASE("equivariance under a global rotation about the root") {
  const Skeleton s = Skeleton::default_humanoid();
  auto g = tu::rng(512);
  for (int i = 0; i < 25; ++i) {
    BodyPose pose = random_pose(g);
    pose.root_translation.setZero();
    const Mat3d r = tu::random_rotation(g);
    const Joints3D base = forward_kinematics(pose, s);
    BodyPose rotated = pose;
    rotated.global_orient = r * pose.global_orient;
    const Joints3D lhs = forward_kinematics(rotated, s);
    const Joints3D rhs = r * base;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("graph fk equals value fk and its jacobian matches finite differences") {
  const Skeleton s = Skeleton::default_humanoid();
  auto g = tu::rng(513);
  const BodyPose pose = random_pose(g);

  Eigen::MatrixXd feats = pose.rotations.transpose();  // 6 x 21
  Tape<double> tape;
  Var<double> feats_v = tape.input(feats);
  Var<double> orient_v = tape.constant(pose.global_orient);
  Var<double> root_v = tape.constant(pose.root_translation);
  Var<double> j3d = forward_kinematics_graph(tape, s, feats_v, orient_v, root_v);

  CHECK((tape.val(j3d) - forward_kinematics(pose, s)).cwiseAbs().maxCoeff() < 1e-12);

  // Jacobian rows via reverse mode with one-hot seeds, vs central differences.
  const double h = 1e-6;
  auto fk_flat = [&](const Eigen::MatrixXd& f) {
    BodyPose p = pose;
    p.rotations = f.transpose();
    return forward_kinematics(p, s);
  };
  std::uniform_int_distribution<int> pick_out(0, 3 * s.size() - 1);
  std::uniform_int_distribution<int> pick_in(0, static_cast<int>(feats.size()) - 1);
  for (int trial = 0; trial < 12; ++trial) {
    const int out = pick_out(g);
    Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(3, s.size());
    seed(out % 3, out / 3) = 1.0;
    tape.backward(j3d, seed);
    const Eigen::MatrixXd analytic = tape.grad(feats_v);
    for (int rep = 0; rep < 8; ++rep) {
      const int in = pick_in(g);
      Eigen::MatrixXd fp = feats, fm = feats;
      fp.data()[in] += h;
      fm.data()[in] -= h;
      const double fd =
          (fk_flat(fp)(out % 3, out / 3) - fk_flat(fm)(out % 3, out / 3)) / (2.0 * h);
      const double an = analytic.data()[in];
      CHECK(std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}) < 1e-4);
    }
  }
}

TEST_CASE("skeleton json round trip") {
  const Skeleton s = Skeleton::default_humanoid();
  const Skeleton back = parse_skeleton_json(skeleton_to_json(s));
  REQUIRE(back.size() == s.size());
  for (int i = 0; i < s.size(); ++i) {
    CHECK(back.joints[i].name == s.joints[i].name);
    CHECK((back.joints[i].offset - s.joints[i].offset).norm() == 0.0);
  }
}

TEST_SUITE_END();
