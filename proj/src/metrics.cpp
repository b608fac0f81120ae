#include "poselab/metrics.hpp"

#include <Eigen/SVD>

#include "poselab/errors.hpp"

namespace poselab {

double mpjpe(const Joints3D& pred, const Joints3D& gt) {
  if (pred.cols() != gt.cols() || pred.cols() == 0)
    throw std::invalid_argument("mpjpe: joint count mismatch (" + std::to_string(pred.cols()) +
                                " vs " + std::to_string(gt.cols()) + ")");
  const Eigen::Matrix3Xd dp = pred.colwise() - pred.col(0);
  const Eigen::Matrix3Xd dg = gt.colwise() - gt.col(0);
  return (dp - dg).colwise().norm().mean() * 1000.0;
}

SimilarityTransform procrustes_align(const Joints3D& pred, const Joints3D& gt) {
  const int n = static_cast<int>(pred.cols());
  if (n != gt.cols()) throw std::invalid_argument("procrustes_align: joint count mismatch");
  if (n < 3) throw DegenerateConfigurationError("procrustes_align: need at least 3 joints");

  const Vec3d mu_p = pred.rowwise().mean();
  const Vec3d mu_g = gt.rowwise().mean();
  const Eigen::Matrix3Xd x = pred.colwise() - mu_p;
  const Eigen::Matrix3Xd y = gt.colwise() - mu_g;

  const double var_p = x.squaredNorm() / n;
  const Mat3d sigma = y * x.transpose() / n;

  Eigen::JacobiSVD<Mat3d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3d sv = svd.singularValues();
  // Collinear or coincident clouds leave the rotation underdetermined.
  if (!(var_p > 1e-18) || sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
    throw DegenerateConfigurationError("procrustes_align: degenerate (collinear or coincident) joints");

  Vec3d d = Vec3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2) = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  t.scale = sv.dot(d) / var_p;
  t.translation = mu_g - t.scale * (t.rotation * mu_p);
  return t;
}

double pa_mpjpe(const Joints3D& pred, const Joints3D& gt) {
  // Mean residual of the aligned prediction. The alignment already solved
  // for translation, so no root-centering is applied on top of it (doing so
  // would discard the optimal translation and can exceed plain mpjpe).
  const Joints3D aligned = procrustes_align(pred, gt).apply(pred);
  return (aligned - gt).colwise().norm().mean() * 1000.0;
}

double pck(const Keypoints2D& pred2d, const Keypoints2D& gt2d, double threshold_factor) {
  const int n = pred2d.count();
  if (n == 0 || gt2d.count() == 0) throw std::invalid_argument("pck: empty keypoints");
  if (n != gt2d.count())
    throw std::invalid_argument("pck: keypoint count mismatch (" + std::to_string(n) + " vs " +
                                std::to_string(gt2d.count()) + ")");
  const Eigen::Vector2d lo = gt2d.points.rowwise().minCoeff();
  const Eigen::Vector2d hi = gt2d.points.rowwise().maxCoeff();
  const double reference = 0.1 * (hi - lo).norm();
  const double threshold = threshold_factor * reference;
  int correct = 0;
  for (int i = 0; i < n; ++i)
    if ((pred2d.points.col(i) - gt2d.points.col(i)).norm() < threshold) ++correct;
  return static_cast<double>(correct) / n;
}

}  // namespace poselab
