#include "poselab/tals.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "poselab/errors.hpp"

namespace poselab {

using json = nlohmann::ordered_json;

std::string TalsThresholds::to_json() const {
  json j;
  j["alpha_pose"] = alpha_pose;
  j["alpha_2d"] = alpha_2d;
  j["eps_2d"] = json::object();
  for (const auto& [name, eps] : eps_2d) j["eps_2d"][name] = eps;
  j["eps_pose"] = json::object();
  for (const auto& [name, eps] : eps_pose) j["eps_pose"][name] = eps;
  return j.dump(2);
}

TalsThresholds TalsThresholds::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("thresholds JSON parse failure: ") + e.what());
  }
  TalsThresholds th;
  th.alpha_pose = j.value("alpha_pose", 0.01);
  th.alpha_2d = j.value("alpha_2d", 0.01);
  if (!(th.alpha_pose > 0 && th.alpha_pose <= 1.0) || !(th.alpha_2d > 0 && th.alpha_2d <= 1.0))
    throw ConfigError("thresholds JSON: alpha values must lie in (0, 1]");
  if (j.contains("eps_2d"))
    for (auto& [name, eps] : j["eps_2d"].items()) {
      const double v = eps.get<double>();
      if (!(v >= 0)) throw ConfigError("thresholds JSON: eps_2d['" + name + "'] must be >= 0");
      th.eps_2d[name] = v;
    }
  if (j.contains("eps_pose"))
    for (auto& [name, eps] : j["eps_pose"].items()) {
      const double v = eps.get<double>();
      if (!(v >= 0)) throw ConfigError("thresholds JSON: eps_pose['" + name + "'] must be >= 0");
      th.eps_pose[name] = v;
    }
  return th;
}

TalsThresholds TalsThresholds::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open thresholds file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void TalsThresholds::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open thresholds file for writing: " + path);
  out << to_json() << "\n";
}

std::string default_2d_threshold_alias(const std::string& skeleton_joint) {
  static const std::map<std::string, std::string> aliases = {
      {"Pelvis", "OP MidHip"},      {"LHip", "OP LHip"},
      {"RHip", "OP RHip"},          {"LKnee", "OP LKnee"},
      {"RKnee", "OP RKnee"},        {"LAnkle", "OP LAnkle"},
      {"RAnkle", "OP RAnkle"},      {"LToe", "OP LBigToe"},
      {"RToe", "OP RBigToe"},       {"Neck", "OP Neck"},
      {"Jaw", "OP Nose"},           {"LShoulder", "OP LShoulder"},
      {"RShoulder", "OP RShoulder"},{"LElbow", "OP LElbow"},
      {"RElbow", "OP RElbow"},      {"LWrist", "OP LWrist"},
      {"RWrist", "OP RWrist"},      {"Spine", "H36M Spine"},
      {"Thorax", "MPII Thorax"},
  };
  const auto it = aliases.find(skeleton_joint);
  return it == aliases.end() ? std::string() : it->second;
}

Resolved2dThresholds resolve_2d_thresholds(const TalsThresholds& th, const Skeleton& skel) {
  Resolved2dThresholds out;
  out.eps.resize(static_cast<size_t>(skel.size()));
  for (int j = 0; j < skel.size(); ++j) {
    const std::string& name = skel.joints[j].name;
    auto it = th.eps_2d.find(name);
    if (it == th.eps_2d.end()) {
      const std::string alias = default_2d_threshold_alias(name);
      if (!alias.empty()) it = th.eps_2d.find(alias);
    }
    if (it != th.eps_2d.end())
      out.eps[static_cast<size_t>(j)] = it->second;
    else
      ++out.unmatched;
  }
  return out;
}

Thresholds2dReport estimate_thresholds_2d(const std::vector<BodyPose>& gt_poses,
                                          const std::vector<PerspectiveCamera>& gt_cams,
                                          double image_width, double image_height,
                                          const WrongCameraFactory& wrong_cam_factory,
                                          const Skeleton& skel) {
  if (gt_poses.empty() || gt_poses.size() != gt_cams.size())
    throw std::invalid_argument("estimate_thresholds_2d: need equally many poses and cameras");
  Thresholds2dReport report;
  report.eps.assign(static_cast<size_t>(skel.size()), 0.0);
  for (size_t s = 0; s < gt_poses.size(); ++s) {
    const Joints3D j3d = forward_kinematics(gt_poses[s], skel);
    Keypoints2D ref, wrong;
    try {
      ref = normalize_keypoints(project_perspective(j3d, gt_cams[s]), image_width, image_height);
      const PerspectiveCamera wc = wrong_cam_factory(j3d, gt_cams[s], image_width, image_height);
      wrong = normalize_keypoints(project_perspective(j3d, wc), image_width, image_height);
    } catch (const BehindCameraError&) {
      ++report.scenes_skipped;
      continue;
    }
    for (int j = 0; j < skel.size(); ++j) {
      const Eigen::Vector2d d = (wrong.points.col(j) - ref.points.col(j)).cwiseAbs();
      report.eps[static_cast<size_t>(j)] += 0.5 * (d.x() + d.y());
    }
    ++report.scenes_used;
  }
  if (report.scenes_used > 0)
    for (double& e : report.eps) e /= report.scenes_used;
  return report;
}

std::vector<double> estimate_thresholds_pose(const std::vector<BodyPose>& pred_poses,
                                             const std::vector<BodyPose>& gt_poses) {
  if (pred_poses.size() != gt_poses.size() || pred_poses.empty())
    throw std::invalid_argument("estimate_thresholds_pose: paired lists required");
  const int joints = pred_poses[0].joint_count();
  std::vector<double> eps(static_cast<size_t>(joints), 0.0);
  for (size_t i = 0; i < pred_poses.size(); ++i) {
    if (pred_poses[i].joint_count() != joints || gt_poses[i].joint_count() != joints)
      throw std::invalid_argument("estimate_thresholds_pose: inconsistent joint counts");
    for (int j = 0; j < joints; ++j)
      eps[static_cast<size_t>(j)] +=
          geodesic_distance(pred_poses[i].joint_rotation(j), gt_poses[i].joint_rotation(j));
  }
  for (double& e : eps) e /= static_cast<double>(pred_poses.size());
  return eps;
}

TalsLossResult tals_pose_loss(const BodyPose& pred, const BodyPose& pgt,
                              const std::vector<std::string>& joint_names,
                              const TalsThresholds& th) {
  const int joints = pred.joint_count();
  if (pgt.joint_count() != joints)
    throw std::invalid_argument("tals_pose_loss: joint count mismatch");
  if (static_cast<int>(joint_names.size()) != joints)
    throw std::invalid_argument("tals_pose_loss: need one name per joint");
  TalsLossResult out;
  out.per_joint.resize(static_cast<size_t>(joints));
  out.above_threshold.resize(static_cast<size_t>(joints));
  for (int j = 0; j < joints; ++j) {
    const auto it = th.eps_pose.find(joint_names[static_cast<size_t>(j)]);
    if (it == th.eps_pose.end())
      throw ConfigError("tals_pose_loss: no pose threshold for joint '" +
                        joint_names[static_cast<size_t>(j)] + "'");
    const double err = geodesic_distance(pred.joint_rotation(j), pgt.joint_rotation(j));
    const double base = (pred.rotations.row(j) - pgt.rotations.row(j)).squaredNorm();
    const bool above = err > it->second;
    const double term = above ? base : th.alpha_pose * base;
    out.per_joint[static_cast<size_t>(j)] = term;
    out.above_threshold[static_cast<size_t>(j)] = above;
    out.total += term;
  }
  return out;
}

TalsLossResult tals_2d_loss(const Keypoints2D& pred2d, const Keypoints2D& pgt2d,
                            const std::vector<std::string>& joint_names,
                            const TalsThresholds& th) {
  const int joints = pred2d.count();
  if (pgt2d.count() != joints) throw std::invalid_argument("tals_2d_loss: joint count mismatch");
  if (static_cast<int>(joint_names.size()) != joints)
    throw std::invalid_argument("tals_2d_loss: need one name per joint");
  const double bound = 0.75;  // anything larger cannot be width-normalized input
  if (pred2d.points.cwiseAbs().maxCoeff() > bound || pgt2d.points.cwiseAbs().maxCoeff() > bound)
    throw std::invalid_argument("tals_2d_loss: keypoints do not look width-normalized");
  TalsLossResult out;
  out.per_joint.resize(static_cast<size_t>(joints), 0.0);
  out.above_threshold.resize(static_cast<size_t>(joints), false);
  for (int j = 0; j < joints; ++j) {
    const auto it = th.eps_2d.find(joint_names[static_cast<size_t>(j)]);
    if (it == th.eps_2d.end()) {
      ++out.skipped;
      continue;
    }
    const Eigen::Vector2d d = (pred2d.points.col(j) - pgt2d.points.col(j)).cwiseAbs();
    const double err = 0.5 * (d.x() + d.y());
    const double conf = pgt2d.confidence.size() > j ? pgt2d.confidence(j) : 1.0;
    const bool above = err > it->second;
    const double term = (above ? err : th.alpha_2d * err) * conf;
    out.per_joint[static_cast<size_t>(j)] = term;
    out.above_threshold[static_cast<size_t>(j)] = above;
    out.total += term;
  }
  return out;
}

}  // namespace poselab
