#include <doctest.h>

#include <Eigen/SVD>

#include "poselab/metrics.hpp"
#include "test_util.hpp"

using namespace poselab;
namespace tu = poselab::testutil;

namespace {

Joints3D random_cloud(std::mt19937_64& g, int n, double spread = 1.0) {
  std::normal_distribution<double> d(0.0, spread);
  Joints3D j(3, n);
  for (int i = 0; i < n; ++i) j.col(i) = Vec3d(d(g), d(g), d(g));
  return j;
}

// Independent similarity-residual computation (Umeyama written out again,
// kept separate from the production code path).
double procrustes_residual_oracle(const Joints3D& pred, const Joints3D& gt) {
  const int n = static_cast<int>(pred.cols());
  const Vec3d mp = pred.rowwise().mean(), mg = gt.rowwise().mean();
  Eigen::Matrix3Xd x = pred.colwise() - mp, y = gt.colwise() - mg;
  const Mat3d cov = y * x.transpose() / n;
  Eigen::JacobiSVD<Mat3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3d d = Vec3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2) = -1;
  const Mat3d r = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  const double s = svd.singularValues().dot(d) / (x.squaredNorm() / n);
  const Vec3d t = mg - s * (r * mp);
  const Joints3D aligned = (s * (r * pred)).colwise() + t;
  return (aligned - gt).colwise().norm().mean() * 1000.0;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("mpjpe basics") {
  auto g = tu::rng(701);
  const Joints3D a = random_cloud(g, 10);
  CHECK(mpjpe(a, a) == 0.0);

  Joints3D shifted = a;
  shifted.colwise() += Vec3d(0.3, -0.7, 2.0);
  CHECK(mpjpe(shifted, a) < 1e-9);  // root-centering removes translation

  Joints3D b(3, 3), c(3, 3);
  b << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  c << 0, 1.1, 0, 0, 0, 1.2, 0, 0, 0;
  // Hand oracle: root-centered diffs are (0,0,0), (0.1,0,0), (0,0.2,0).
  const double expect = (0.0 + 0.1 + 0.2) / 3.0 * 1000.0;
  CHECK(mpjpe(b, c) == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS((void)mpjpe(random_cloud(g, 4), random_cloud(g, 5)), std::invalid_argument);
}

TEST_CASE("procrustes identity and exact recovery") {
  auto g = tu::rng(702);
  const Joints3D cloud = random_cloud(g, 9);
  const SimilarityTransform id = procrustes_align(cloud, cloud);
  CHECK(id.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((id.rotation - Mat3d::Identity()).norm() < 1e-9);
  CHECK(id.translation.norm() < 1e-9);

  const Mat3d r0 = tu::random_rotation(g);
  const Vec3d t0(0.4, -1.0, 2.2);
  const Joints3D pred = (2.0 * (r0 * cloud)).colwise() + t0;
  const SimilarityTransform t = procrustes_align(pred, cloud);
  CHECK(t.scale == doctest::Approx(0.5).epsilon(1e-9));
  CHECK((t.apply(pred) - cloud).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("procrustes rejects degenerate configurations") {
  Joints3D two(3, 2);
  two << 0, 1, 0, 0, 0, 0;
  CHECK_THROWS_AS((void)procrustes_align(two, two), DegenerateConfigurationError);

  Joints3D line(3, 5), target(3, 5);
  for (int i = 0; i < 5; ++i) {
    line.col(i) = Vec3d(i, 0, 0);
    target.col(i) = Vec3d(0, i, 0);
  }
  CHECK_THROWS_AS((void)procrustes_align(line, target), DegenerateConfigurationError);

  const Joints3D coincident = Joints3D::Zero(3, 6);
  CHECK_THROWS_AS((void)procrustes_align(coincident, coincident), DegenerateConfigurationError);
}

TEST_CASE("procrustes beats random similarity transforms") {
  auto g = tu::rng(703);
  const Joints3D gt = random_cloud(g, 14);
  Joints3D pred = random_cloud(g, 14);
  const SimilarityTransform best = procrustes_align(pred, gt);
  // the alignment objective: sum of squared residuals
  const double best_res = (best.apply(pred) - gt).squaredNorm();
  std::uniform_real_distribution<double> su(0.2, 3.0), tu_(-2.0, 2.0);
  bool all_above = true;
  for (int i = 0; i < 100000; ++i) {
    SimilarityTransform cand;
    cand.scale = su(g);
    cand.rotation = tu::random_rotation(g);
    cand.translation = Vec3d(tu_(g), tu_(g), tu_(g));
    if ((cand.apply(pred) - gt).squaredNorm() < best_res - 1e-9) all_above = false;
  }
  CHECK(all_above);
}

TEST_CASE("pa_mpjpe exact recovery, perturbation oracle and dominance") {
  auto g = tu::rng(704);
  const Joints3D gt = random_cloud(g, 17);
  const Mat3d r0 = tu::random_rotation(g);
  const Joints3D pred = (1.7 * (r0 * gt)).colwise() + Vec3d(0.1, 0.4, -0.2);
  CHECK(pa_mpjpe(pred, gt) < 1e-9);

  Joints3D bent = gt;
  bent(0, 5) += 0.030;  // 30mm along x
  CHECK(pa_mpjpe(bent, gt) ==
        doctest::Approx(procrustes_residual_oracle(bent, gt)).epsilon(1e-9));

  for (int i = 0; i < 1000; ++i) {
    const Joints3D a = random_cloud(g, 11), b = random_cloud(g, 11);
    CHECK(pa_mpjpe(a, b) <= mpjpe(a, b) + 1e-9);
  }
}

TEST_CASE("pa_mpjpe invariant under similarity transforms of predictions") {
  auto g = tu::rng(705);
  const Joints3D gt = random_cloud(g, 13);
  const Joints3D pred = random_cloud(g, 13);
  const double base = pa_mpjpe(pred, gt);
  std::uniform_real_distribution<double> su(0.3, 3.0), tu_(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    SimilarityTransform t;
    t.scale = su(g);
    t.rotation = tu::random_rotation(g);
    t.translation = Vec3d(tu_(g), tu_(g), tu_(g));
    CHECK(std::abs(pa_mpjpe(t.apply(pred), gt) - base) < 1e-9);
  }
}

TEST_CASE("procrustes rotation always has det +1") {
  auto g = tu::rng(706);
  for (int i = 0; i < 300; ++i) {
    const Joints3D a = random_cloud(g, 8), b = random_cloud(g, 8);
    const SimilarityTransform t = procrustes_align(a, b);
    CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.scale > 0.0);
  }
  // Reflected clouds still get a proper rotation.
  const Joints3D a = random_cloud(g, 8);
  Joints3D mirrored = a;
  mirrored.row(0) *= -1.0;
  const SimilarityTransform t = procrustes_align(mirrored, a);
  CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pck counting, extremes and monotonicity") {

  Eigen::Matrix2Xd gt(2, 4);
  gt << 0, 100, 0, 100, 0, 0, 100, 100;
  const Keypoints2D kgt = Keypoints2D::with_unit_confidence(gt);
  CHECK(pck(kgt, kgt, 0.5) == 1.0);

  // bbox diagonal = sqrt(2)*100, reference = 14.142; threshold@0.5 = 7.07.
  Eigen::Matrix2Xd pred = gt;
  pred.col(0) += Eigen::Vector2d(5, 0);    // inside
  pred.col(1) += Eigen::Vector2d(6, 0);    // inside
  pred.col(2) += Eigen::Vector2d(20, 0);   // outside
  pred.col(3) += Eigen::Vector2d(50, 50);  // outside
  const Keypoints2D kpred = Keypoints2D::with_unit_confidence(pred);
  CHECK(pck(kpred, kgt, 0.5) == 0.5);

  Eigen::Matrix2Xd far = gt.array() + 1e6;
  CHECK(pck(Keypoints2D::with_unit_confidence(far), kgt, 1.0) == 0.0);

  double prev = 0.0;
  for (double f : {0.1, 0.5, 1.0, 2.0, 8.0}) {
    const double v = pck(kpred, kgt, f);
    CHECK(v >= prev);
    prev = v;
  }

  Keypoints2D empty;
  empty.points.resize(2, 0);
  empty.confidence.resize(0);
  CHECK_THROWS_AS((void)pck(empty, empty, 0.5), std::invalid_argument);
}

TEST_SUITE_END();
