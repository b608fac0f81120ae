#include "poselab/skeleton.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "poselab/errors.hpp"

namespace poselab {

using json = nlohmann::ordered_json;

std::optional<int> Skeleton::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (joints[i].name == name) return i;
  return std::nullopt;
}

Skeleton Skeleton::default_humanoid() {
  // 22 joints, ~1.7 m standing body, y up, facing +z, T-pose arms along x.
  static const struct {
    const char* name;
    int parent;
    double x, y, z;
  } table[] = {
      {"Pelvis", -1, 0.0, 0.0, 0.0},
      {"LHip", 0, 0.091, -0.060, 0.0},
      {"RHip", 0, -0.091, -0.060, 0.0},
      {"Spine", 0, 0.0, 0.115, -0.010},
      {"LKnee", 1, 0.004, -0.390, 0.0},
      {"RKnee", 2, -0.004, -0.390, 0.0},
      {"Thorax", 3, 0.0, 0.135, 0.005},
      {"LAnkle", 4, -0.010, -0.415, -0.020},
      {"RAnkle", 5, 0.010, -0.415, -0.020},
      {"Chest", 6, 0.0, 0.055, 0.003},
      {"LToe", 7, 0.020, -0.065, 0.125},
      {"RToe", 8, -0.020, -0.065, 0.125},
      {"Neck", 9, 0.0, 0.210, -0.010},
      {"LCollar", 9, 0.075, 0.120, -0.005},
      {"RCollar", 9, -0.075, 0.120, -0.005},
      {"Jaw", 12, 0.0, 0.085, 0.025},
      {"LShoulder", 13, 0.095, 0.015, -0.005},
      {"RShoulder", 14, -0.095, 0.015, -0.005},
      {"LElbow", 16, 0.260, 0.0, -0.005},
      {"RElbow", 17, -0.260, 0.0, -0.005},
      {"LWrist", 18, 0.250, 0.0, 0.0},
      {"RWrist", 19, -0.250, 0.0, 0.0},
  };
  Skeleton s;
  for (const auto& row : table)
    s.joints.push_back({row.name, row.parent, Vec3d(row.x, row.y, row.z)});
  return s;
}

namespace {

// Kahn topological sort; detects cycles. Returns old-index order.
std::vector<int> topo_order(const std::vector<Joint>& joints) {
  const int n = static_cast<int>(joints.size());
  std::vector<std::vector<int>> children(n);
  int root = -1;
  for (int i = 0; i < n; ++i) {
    const int p = joints[i].parent;
    if (p < 0) {
      if (root >= 0) throw InvalidSkeletonError("skeleton has multiple roots");
      root = i;
    } else {
      if (p >= n) throw InvalidSkeletonError("joint '" + joints[i].name + "' has out-of-range parent");
      if (p == i) throw InvalidSkeletonError("joint '" + joints[i].name + "' is parented to itself");
      children[p].push_back(i);
    }
  }
  if (root < 0) throw InvalidSkeletonError("skeleton has no root joint");
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[j].rbegin(); it != children[j].rend(); ++it) stack.push_back(*it);
  }
  if (static_cast<int>(order.size()) != n)
    throw InvalidSkeletonError("skeleton contains a cycle or unreachable joints");
  return order;
}

Skeleton finalize(std::vector<Joint> joints) {
  for (const auto& j : joints)
    if (!j.offset.allFinite())
      throw InvalidSkeletonError("joint '" + j.name + "' has a non-finite offset");
  const std::vector<int> order = topo_order(joints);  // also validates

  // Keep the author's order when it is already topological with the root
  // first; only re-sort when necessary.
  bool sorted = joints[0].parent < 0;
  for (size_t i = 0; sorted && i < joints.size(); ++i)
    if (joints[i].parent >= static_cast<int>(i)) sorted = false;
  Skeleton s;
  if (sorted) {
    s.joints = std::move(joints);
    return s;
  }
  std::vector<int> new_index(joints.size());
  for (size_t k = 0; k < order.size(); ++k) new_index[order[k]] = static_cast<int>(k);
  s.joints.reserve(joints.size());
  for (int old : order) {
    Joint j = joints[old];
    if (j.parent >= 0) j.parent = new_index[j.parent];
    s.joints.push_back(std::move(j));
  }
  return s;
}

}  // namespace

Skeleton parse_skeleton_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidSkeletonError(std::string("skeleton JSON parse failure: ") + e.what());
  }
  if (!doc.contains("joints") || !doc["joints"].is_array())
    throw InvalidSkeletonError("skeleton JSON missing 'joints' array");
  std::vector<Joint> joints;
  for (const auto& item : doc["joints"]) {
    Joint j;
    try {
      j.name = item.at("name").get<std::string>();
      j.parent = item.at("parent").get<int>();
      const auto& off = item.at("offset");
      if (!off.is_array() || off.size() != 3)
        throw InvalidSkeletonError("joint '" + j.name + "' offset must have 3 entries");
      for (int i = 0; i < 3; ++i) j.offset[i] = off[i].get<double>();
    } catch (const json::exception& e) {
      throw InvalidSkeletonError(std::string("malformed joint entry: ") + e.what());
    }
    joints.push_back(std::move(j));
  }
  return finalize(std::move(joints));
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSkeletonError("cannot open skeleton file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_skeleton_json(ss.str());
}

std::string skeleton_to_json(const Skeleton& skel) {
  json doc;
  doc["joints"] = json::array();
  for (const auto& j : skel.joints) {
    json item;
    item["name"] = j.name;
    item["parent"] = j.parent;
    item["offset"] = {j.offset.x(), j.offset.y(), j.offset.z()};
    doc["joints"].push_back(item);
  }
  return doc.dump(2);
}

BodyPose BodyPose::rest(int body_joints) {
  BodyPose p;
  p.rotations.resize(body_joints, 6);
  for (int i = 0; i < body_joints; ++i)
    p.rotations.row(i) = rotmat_to_rot6d<double>(Mat3d::Identity()).transpose();
  return p;
}

BodyPose BodyPose::from_axis_angle(const Eigen::Matrix<double, Eigen::Dynamic, 3>& aa,
                                   const Vec3d& global_orient_aa, const Vec3d& root_translation) {
  BodyPose p;
  p.rotations.resize(aa.rows(), 6);
  for (int i = 0; i < aa.rows(); ++i) {
    const Vec3d v = aa.row(i).transpose();
    p.rotations.row(i) = rotmat_to_rot6d<double>(aa_to_rotmat<double>(v)).transpose();
  }
  p.global_orient = aa_to_rotmat<double>(global_orient_aa);
  p.root_translation = root_translation;
  return p;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> BodyPose::to_axis_angle() const {
  Eigen::Matrix<double, Eigen::Dynamic, 3> aa(rotations.rows(), 3);
  for (int i = 0; i < rotations.rows(); ++i)
    aa.row(i) = rotmat_to_aa<double>(joint_rotation(i)).transpose();
  return aa;
}

Mat3d BodyPose::joint_rotation(int body_index) const {
  return rot6d_to_rotmat<double>(rotations.row(body_index).transpose());
}

void BodyPose::set_joint_rotation(int body_index, const Mat3d& r) {
  rotations.row(body_index) = rotmat_to_rot6d<double>(r).transpose();
}

std::vector<Mat3d> fk_world_rotations(const BodyPose& pose, const Skeleton& skel) {
  if (pose.joint_count() + 1 != skel.size())
    throw std::invalid_argument("forward_kinematics: pose has " +
                                std::to_string(pose.joint_count()) + " rotations but skeleton has " +
                                std::to_string(skel.size()) + " joints (need count+1)");
  std::vector<Mat3d> world(skel.size());
  world[0] = pose.global_orient;
  for (int j = 1; j < skel.size(); ++j)
    world[j] = world[skel.joints[j].parent] * pose.joint_rotation(j - 1);
  return world;
}

Joints3D forward_kinematics(const BodyPose& pose, const Skeleton& skel) {
  const std::vector<Mat3d> world = fk_world_rotations(pose, skel);
  Joints3D pos(3, skel.size());
  pos.col(0) = pose.root_translation;
  for (int j = 1; j < skel.size(); ++j) {
    const int p = skel.joints[j].parent;
    pos.col(j) = pos.col(p) + world[p] * skel.joints[j].offset;
  }
  return pos;
}

}  // namespace poselab
