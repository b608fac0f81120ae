#include <doctest.h>

#include <numbers>

#include "poselab/biaslab.hpp"
#include "poselab/tals.hpp"
#include "test_util.hpp"

using namespace poselab;
namespace tu = poselab::testutil;

namespace {

TalsThresholds table_s1() {
  return TalsThresholds::load(std::string(POSELAB_ASSETS_DIR) + "/tals_table_s1.json");
}

std::vector<std::string> body_names(const Skeleton& skel) {
  std::vector<std::string> names;
  for (int j = 1; j < skel.size(); ++j) names.push_back(skel.joints[j].name);
  return names;
}

}  // namespace

TEST_SUITE_BEGIN("tals");

TEST_CASE("shipped threshold table parses and carries the published values") {
  const TalsThresholds th = table_s1();
  CHECK(th.alpha_pose == 0.01);
  CHECK(th.alpha_2d == 0.01);
  CHECK(th.eps_2d.size() == 44);
  CHECK(th.eps_pose.size() == 24);
  CHECK(th.eps_2d.at("OP Nose") == 0.00850);
  CHECK(th.eps_2d.at("OP RKnee") == 0.01663);
  CHECK(th.eps_pose.at("Pelvis") == 0.46);
  CHECK(th.eps_pose.at("LWrist") == 0.62);
  CHECK(th.eps_pose.at("Spine") == 0.15);
  // Knees exceed the face thresholds (foreshortening lives in the legs).
  CHECK(th.eps_2d.at("OP RKnee") > th.eps_2d.at("OP Nose"));
  CHECK(th.eps_2d.at("OP LKnee") > th.eps_2d.at("OP Nose"));
  // Every default-skeleton body joint has a pose threshold.
  const Skeleton skel = Skeleton::default_humanoid();
  for (const std::string& n : body_names(skel)) CHECK(th.eps_pose.count(n) == 1);
}

TEST_CASE("threshold json rejects bad values") {
  CHECK_THROWS_AS((void)TalsThresholds::from_json(R"({"alpha_pose": 0.0})"), ConfigError);
  CHECK_THROWS_AS((void)TalsThresholds::from_json(R"({"alpha_pose": 1.5})"), ConfigError);
  CHECK_THROWS_AS((void)TalsThresholds::from_json(R"({"eps_2d": {"a": -0.1}})"), ConfigError);
  CHECK_THROWS_AS((void)TalsThresholds::from_json("not json"), ConfigError);
}

TEST_CASE("2d threshold resolution maps skeleton joints onto table names") {
  const TalsThresholds th = table_s1();
  const Skeleton skel = Skeleton::default_humanoid();
  const Resolved2dThresholds res = resolve_2d_thresholds(th, skel);
  REQUIRE(static_cast<int>(res.eps.size()) == skel.size());
  CHECK(*res.eps[*skel.find("Jaw")] == 0.00850);       // -> OP Nose
  CHECK(*res.eps[*skel.find("Pelvis")] == 0.00974);    // -> OP MidHip
  CHECK(*res.eps[*skel.find("LKnee")] == 0.01616);     // -> OP LKnee
  CHECK(!res.eps[*skel.find("Chest")].has_value());    // no table entry
  CHECK(res.unmatched == 3);                           // Chest, LCollar, RCollar
}

TEST_CASE("matched cameras give all-zero 2d thresholds") {
  const Skeleton skel = Skeleton::default_humanoid();
  const auto scenes = generate_scenes(6, 31, skel);
  std::vector<BodyPose> poses;
  std::vector<PerspectiveCamera> cams;
  for (const auto& s : scenes) {
    poses.push_back(s.gt_pose);
    cams.push_back(s.gt_cam);
  }
  const auto report = estimate_thresholds_2d(
      poses, cams, scenes[0].image_size.x(), scenes[0].image_size.y(),
      [](const Joints3D&, const PerspectiveCamera& c, double, double) { return c; }, skel);
  CHECK(report.scenes_used == 6);
  for (double e : report.eps) CHECK(e == 0.0);
}

TEST_CASE("eye-height scenes: leg thresholds exceed shoulder and nose thresholds") {
  const Skeleton skel = Skeleton::default_humanoid();
  const auto scenes = generate_scenes(40, 32, skel);
  std::vector<BodyPose> poses;
  std::vector<PerspectiveCamera> cams;
  for (const auto& s : scenes) {
    poses.push_back(s.gt_pose);
    cams.push_back(s.gt_cam);
  }
  const auto report =
      estimate_thresholds_2d(poses, cams, scenes[0].image_size.x(), scenes[0].image_size.y(),
                             fixed_focal_wrong_camera(), skel);
  CHECK(report.scenes_used > 30);

  // Independent recomputation of the per-joint means for a few joints.
  {
    std::vector<double> acc(static_cast<size_t>(skel.size()), 0.0);
    int used = 0;
    const auto factory = fixed_focal_wrong_camera();
    for (const auto& s : scenes) {
      const Joints3D j3d = forward_kinematics(s.gt_pose, skel);
      try {
        const Keypoints2D ref = normalize_keypoints(project_perspective(j3d, s.gt_cam),
                                                    s.image_size.x(), s.image_size.y());
        const PerspectiveCamera wc = factory(j3d, s.gt_cam, s.image_size.x(), s.image_size.y());
        const Keypoints2D wr = normalize_keypoints(project_perspective(j3d, wc),
                                                   s.image_size.x(), s.image_size.y());
        for (int j = 0; j < skel.size(); ++j)
          acc[static_cast<size_t>(j)] +=
              0.5 * (wr.points.col(j) - ref.points.col(j)).cwiseAbs().sum();
        ++used;
      } catch (const BehindCameraError&) {
      }
    }
    REQUIRE(used == report.scenes_used);
    for (int j = 0; j < skel.size(); ++j)
      CHECK(report.eps[static_cast<size_t>(j)] ==
            doctest::Approx(acc[static_cast<size_t>(j)] / used).epsilon(1e-12));
  }

  auto eps_of = [&](const char* name) { return report.eps[static_cast<size_t>(*skel.find(name))]; };
  const double shoulders = 0.5 * (eps_of("LShoulder") + eps_of("RShoulder"));
  const double knees = 0.5 * (eps_of("LKnee") + eps_of("RKnee"));
  const double ankles = 0.5 * (eps_of("LAnkle") + eps_of("RAnkle"));
  CHECK(knees > shoulders);
  CHECK(ankles > shoulders);
  CHECK(knees > eps_of("Jaw"));
}

TEST_CASE("pose thresholds: zero for identical poses, exact single-pair angle") {
  auto g = tu::rng(933);
  std::vector<BodyPose> gt;
  for (int i = 0; i < 5; ++i) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> aa(21, 3);
    for (int j = 0; j < 21; ++j) aa.row(j) = tu::random_axis_angle(g, 0.7).transpose();
    gt.push_back(BodyPose::from_axis_angle(aa));
  }
  const std::vector<double> zero = estimate_thresholds_pose(gt, gt);
  for (double e : zero) CHECK(e == 0.0);

  // Single pair with one joint rotated by a known angle.
  const double phi = 0.731;
  BodyPose pred = gt[0];
  pred.set_joint_rotation(4, Mat3d(pred.joint_rotation(4) *
                                   aa_to_rotmat<double>(Vec3d(0, phi, 0))));
  const std::vector<double> eps = estimate_thresholds_pose({pred}, {gt[0]});
  CHECK(eps[4] == doctest::Approx(phi).epsilon(1e-9));
  for (int j = 0; j < 21; ++j)
    if (j != 4) CHECK(eps[static_cast<size_t>(j)] < 1e-12);

  CHECK_THROWS_AS((void)estimate_thresholds_pose({pred}, gt), std::invalid_argument);
}

TEST_CASE("pose loss: zero error, branch ratio, alpha=1 reduction") {
  const Skeleton skel = Skeleton::default_humanoid();
  const std::vector<std::string> names = body_names(skel);
  TalsThresholds th = table_s1();

  auto g = tu::rng(934);
  Eigen::Matrix<double, Eigen::Dynamic, 3> aa(21, 3);
  for (int j = 0; j < 21; ++j) aa.row(j) = tu::random_axis_angle(g, 0.5).transpose();
  const BodyPose gt = BodyPose::from_axis_angle(aa);

  CHECK(tals_pose_loss(gt, gt, names, th).total == 0.0);

  // Right-multiplying by the same bump gives every joint exactly the same
  // geodesic error (0.4 rad) and the same 6D difference norm, since the
  // orthogonal base rotation preserves column-difference lengths. LHip's
  // threshold (0.22) sits below the error, LWrist's (0.62) above.
  BodyPose pred = gt;
  const Mat3d bump = aa_to_rotmat<double>(Vec3d(0.4, 0, 0));
  const int hip = *skel.find("LHip") - 1, wrist = *skel.find("LWrist") - 1;
  pred.set_joint_rotation(hip, Mat3d(gt.joint_rotation(hip) * bump));
  pred.set_joint_rotation(wrist, Mat3d(gt.joint_rotation(wrist) * bump));
  const TalsLossResult r = tals_pose_loss(pred, gt, names, th);
  CHECK(r.above_threshold[static_cast<size_t>(hip)]);
  CHECK(!r.above_threshold[static_cast<size_t>(wrist)]);
  const double base_hip = (pred.rotations.row(hip) - gt.rotations.row(hip)).squaredNorm();
  const double base_wrist = (pred.rotations.row(wrist) - gt.rotations.row(wrist)).squaredNorm();
  CHECK(r.per_joint[static_cast<size_t>(hip)] == base_hip);
  CHECK(r.per_joint[static_cast<size_t>(wrist)] == 0.01 * base_wrist);
  CHECK(base_hip == doctest::Approx(base_wrist).epsilon(1e-12));
  CHECK(r.per_joint[static_cast<size_t>(hip)] ==
        doctest::Approx(100.0 * r.per_joint[static_cast<size_t>(wrist)]).epsilon(1e-10));

  // Bitwise contract on one joint: with the threshold flipped from below to
  // above the error, the scaled term is exactly alpha times the full term.
  TalsThresholds lo = th, hi = th;
  lo.eps_pose["LHip"] = 0.2;   // error 0.4 -> full branch
  hi.eps_pose["LHip"] = 0.62;  // error 0.4 -> scaled branch
  const double full_term =
      tals_pose_loss(pred, gt, names, lo).per_joint[static_cast<size_t>(hip)];
  const double scaled_term =
      tals_pose_loss(pred, gt, names, hi).per_joint[static_cast<size_t>(hip)];
  CHECK(scaled_term == 0.01 * full_term);

  // alpha = 1 reduces to the plain loss bitwise.
  th.alpha_pose = 1.0;
  const TalsLossResult plain = tals_pose_loss(pred, gt, names, th);
  for (int j = 0; j < 21; ++j) {
    const double expect = (pred.rotations.row(j) - gt.rotations.row(j)).squaredNorm();
    CHECK(plain.per_joint[static_cast<size_t>(j)] == expect);
  }

  // Missing threshold -> configuration error.
  TalsThresholds partial = table_s1();
  partial.eps_pose.erase("LKnee");
  CHECK_THROWS_AS((void)tals_pose_loss(pred, gt, names, partial), ConfigError);
}

TEST_CASE("2d loss branches on the published thresholds") {
  TalsThresholds th = table_s1();
  const std::vector<std::string> names{"OP Nose", "OP LKnee"};

  Eigen::Matrix2Xd gt(2, 2);
  gt << 0.10, -0.20, 0.05, 0.30;
  const Keypoints2D kgt = Keypoints2D::with_unit_confidence(gt);

  // Joint error 0.02 vs OP Nose eps 0.00850: above threshold, full term.
  Eigen::Matrix2Xd p1 = gt;
  p1(0, 0) += 0.02;
  p1(1, 0) += 0.02;
  const TalsLossResult above =
      tals_2d_loss(Keypoints2D::with_unit_confidence(p1), kgt, names, th);
  CHECK(above.above_threshold[0]);
  CHECK(above.per_joint[0] == doctest::Approx(0.02).epsilon(1e-12));

  // Joint error 0.005 vs eps 0.00850: scaled by alpha = 0.01.
  Eigen::Matrix2Xd p2 = gt;
  p2(0, 0) += 0.005;
  p2(1, 0) += 0.005;
  const TalsLossResult below =
      tals_2d_loss(Keypoints2D::with_unit_confidence(p2), kgt, names, th);
  CHECK(!below.above_threshold[0]);
  CHECK(below.per_joint[0] == doctest::Approx(0.01 * 0.005).epsilon(1e-12));

  // Perfect prediction: zero.
  CHECK(tals_2d_loss(kgt, kgt, names, th).total == 0.0);

  // Confidence weighting scales terms.
  Keypoints2D weighted = kgt;
  weighted.confidence << 0.5, 1.0;
  const TalsLossResult conf =
      tals_2d_loss(Keypoints2D::with_unit_confidence(p1), weighted, names, th);
  CHECK(conf.per_joint[0] == doctest::Approx(0.5 * 0.02).epsilon(1e-12));

  // Unknown names are skipped with a count; unnormalized input is rejected.
  const TalsLossResult skip = tals_2d_loss(kgt, kgt, {"OP Nose", "NoSuchJoint"}, th);
  CHECK(skip.skipped == 1);
  Eigen::Matrix2Xd big = gt;
  big(0, 0) = 400.0;
  CHECK_THROWS_AS(
      (void)tals_2d_loss(Keypoints2D::with_unit_confidence(big), kgt, names, th),
      std::invalid_argument);
}

TEST_CASE("2d loss gradient contract: below-threshold slope is alpha times the full slope") {
  TalsThresholds th = table_s1();
  const std::vector<std::string> names{"OP Nose"};
  const double eps = th.eps_2d.at("OP Nose");
  Eigen::Matrix2Xd gt = Eigen::Matrix2Xd::Zero(2, 1);
  const Keypoints2D kgt = Keypoints2D::with_unit_confidence(gt);
  const double h = 1e-7;

  auto loss_at = [&](double e) {
    Eigen::Matrix2Xd p = gt;
    p(0, 0) = 2.0 * e;  // per-axis mean error = e
    return tals_2d_loss(Keypoints2D::with_unit_confidence(p), kgt, names, th).total;
  };
  const double slope_below = (loss_at(0.5 * eps + h) - loss_at(0.5 * eps - h)) / (2 * h);
  const double slope_above = (loss_at(2.0 * eps + h) - loss_at(2.0 * eps - h)) / (2 * h);
  CHECK(slope_below == doctest::Approx(0.01 * slope_above).epsilon(1e-6));
}

TEST_SUITE_END();
