#include <doctest.h>

#include <Eigen/Geometry>

#include "poselab/camera.hpp"
#include "poselab/errors.hpp"
#include "test_util.hpp"

using namespace poselab;
namespace tu = poselab::testutil;

namespace {

Joints3D random_front_points(std::mt19937_64& g, int n) {
  std::uniform_real_distribution<double> xy(-1.0, 1.0), z(1.5, 6.0);
  Joints3D j(3, n);
  for (int i = 0; i < n; ++i) j.col(i) = Vec3d(xy(g), xy(g), z(g));
  return j;
}

// Full homogeneous pipeline: K [R|t] then dehomogenize.
Eigen::Matrix2Xd homogeneous_oracle(const Joints3D& j3d, const PerspectiveCamera& cam) {
  Eigen::Matrix4d rt = Eigen::Matrix4d::Identity();
  rt.topLeftCorner<3, 3>() = cam.rotation;
  rt.topRightCorner<3, 1>() = cam.translation;
  Eigen::Matrix4d k = Eigen::Matrix4d::Identity();
  k(0, 0) = k(1, 1) = cam.focal;
  k(0, 2) = cam.principal.x();
  k(1, 2) = cam.principal.y();
  const Eigen::Matrix4d p = k * rt;
  Eigen::Matrix2Xd out(2, j3d.cols());
  for (int i = 0; i < j3d.cols(); ++i) {
    const Eigen::Vector4d v = p * j3d.col(i).homogeneous();
    out.col(i) = v.head<2>() / v(2);
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("camera");

TEST_CASE("perspective projection of axis and off-axis points") {
  PerspectiveCamera cam;
  cam.focal = 1000;
  cam.principal = {500, 500};
  Joints3D j(3, 2);
  j.col(0) = Vec3d(0, 0, 2);
  j.col(1) = Vec3d(1, 0, 2);
  const Keypoints2D kp = project_perspective(j, cam);
  CHECK((kp.points.col(0) - Eigen::Vector2d(500, 500)).norm() == 0.0);
  CHECK((kp.points.col(1) - Eigen::Vector2d(1000, 500)).norm() == 0.0);
  CHECK(kp.confidence.minCoeff() == 1.0);
}

TEST_CASE("perspective projection matches the homogeneous oracle") {
  auto g = tu::rng(601);
  for (int trial = 0; trial < 30; ++trial) {
    PerspectiveCamera cam;
    cam.focal = 800 + 700 * std::generate_canonical<double, 53>(g);
    cam.principal = {512, 384};
    cam.rotation = aa_to_rotmat<double>(tu::random_axis_angle(g, 0.2));
    cam.translation = Vec3d(0.1, -0.2, 0.5);
    const Joints3D j = random_front_points(g, 16);
    const Keypoints2D kp = project_perspective(j, cam);
    CHECK((kp.points - homogeneous_oracle(j, cam)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("behind-camera points raise an error listing the joints") {
  PerspectiveCamera cam;
  Joints3D j(3, 3);
  j.col(0) = Vec3d(0, 0, 2);
  j.col(1) = Vec3d(0, 0, -1);
  j.col(2) = Vec3d(0, 0, 0);
  try {
    (void)project_perspective(j, cam);
    FAIL("expected BehindCameraError");
  } catch (const BehindCameraError& e) {
    REQUIRE(e.joint_indices.size() == 2);
    CHECK(e.joint_indices[0] == 1);
    CHECK(e.joint_indices[1] == 2);
  }
}

TEST_CASE("perspective projection is scale consistent") {
  auto g = tu::rng(602);
  PerspectiveCamera cam;
  cam.focal = 1200;
  cam.principal = {480, 270};
  cam.rotation = aa_to_rotmat<double>(tu::random_axis_angle(g, 0.3));
  cam.translation = Vec3d(0.2, 0.1, 1.0);
  const Joints3D j = random_front_points(g, 12);
  const Keypoints2D base = project_perspective(j, cam);
  for (double s : {0.5, 2.0, 7.5}) {
    PerspectiveCamera scaled = cam;
    scaled.translation *= s;
    const Keypoints2D kp = project_perspective(Joints3D(s * j), scaled);
    CHECK((kp.points - base.points).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("weak perspective drops depth") {
  WeakPerspectiveCamera cam;
  Joints3D j(3, 1);
  j.col(0) = Vec3d(0.3, -0.2, 5.0);
  const Keypoints2D kp = project_weak_perspective(j, cam);
  CHECK((kp.points.col(0) - Eigen::Vector2d(0.3, -0.2)).norm() == 0.0);

  WeakPerspectiveCamera cam2{2.0, {0.1, 0.0}};
  Joints3D j2(3, 1);
  j2.col(0) = Vec3d(0.1, 0.1, 1.0);
  const Keypoints2D kp2 = project_weak_perspective(j2, cam2);
  CHECK((kp2.points.col(0) - Eigen::Vector2d(0.3, 0.2)).norm() < 1e-15);
}

TEST_CASE("weak perspective is invariant to depth shifts") {
  auto g = tu::rng(603);
  WeakPerspectiveCamera cam{1.7, {0.05, -0.1}};
  const Joints3D j = random_front_points(g, 20);
  const Keypoints2D base = project_weak_perspective(j, cam);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    Joints3D moved = j;
    moved.row(2).array() += shift(g);
    const Keypoints2D kp = project_weak_perspective(moved, cam);
    CHECK((kp.points - base.points).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("normalize_keypoints formula") {
  Eigen::Matrix2Xd pts(2, 3);
  pts.col(0) = Eigen::Vector2d(500, 250);   // center of 1000x500
  pts.col(1) = Eigen::Vector2d(0, 0);
  pts.col(2) = Eigen::Vector2d(750, 250);
  Keypoints2D kp = Keypoints2D::with_unit_confidence(pts);

  const Keypoints2D n1 = normalize_keypoints(kp, 1000, 500);
  CHECK((n1.points.col(0) - Eigen::Vector2d(0, 0)).norm() == 0.0);
  CHECK((n1.points.col(2) - Eigen::Vector2d(0.25, 0.0)).norm() == 0.0);

  const Keypoints2D corner = normalize_keypoints(kp, 1000, 1000);
  CHECK((corner.points.col(1) - Eigen::Vector2d(-0.5, -0.5)).norm() == 0.0);

  CHECK_THROWS_AS((void)normalize_keypoints(kp, 0.0, 100.0), std::invalid_argument);
}

TEST_CASE("normalize_keypoints round trips") {
  auto g = tu::rng(604);
  std::uniform_real_distribution<double> u(-2000.0, 2000.0);
  Eigen::Matrix2Xd pts(2, 40);
  for (int i = 0; i < 40; ++i) pts.col(i) = Eigen::Vector2d(u(g), u(g));
  const Keypoints2D kp = Keypoints2D::with_unit_confidence(pts);
  const Keypoints2D back = denormalize_keypoints(normalize_keypoints(kp, 1920, 1080), 1920, 1080);
  CHECK((back.points - kp.points).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("camera json round trip") {
  PerspectiveCamera cam;
  cam.focal = 1234.5;
  cam.principal = {320, 240};
  cam.translation = Vec3d(0.1, 0.2, 3.5);
  const PerspectiveCamera back = parse_perspective_camera_json(perspective_camera_to_json(cam));
  CHECK(back.focal == cam.focal);
  CHECK((back.translation - cam.translation).norm() == 0.0);

  WeakPerspectiveCamera weak{2.5, {0.1, -0.2}};
  const WeakPerspectiveCamera wback = parse_weak_camera_json(weak_camera_to_json(weak));
  CHECK(wback.scale == weak.scale);
  CHECK((wback.offset - weak.offset).norm() == 0.0);
}

TEST_SUITE_END();
