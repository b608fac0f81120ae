#include "poselab/camera.hpp"

#include <nlohmann/json.hpp>

#include "poselab/errors.hpp"

namespace poselab {

using json = nlohmann::ordered_json;

Keypoints2D Keypoints2D::with_unit_confidence(Eigen::Matrix<double, 2, Eigen::Dynamic> pts) {
  Keypoints2D kp;
  kp.confidence = Eigen::VectorXd::Ones(pts.cols());
  kp.points = std::move(pts);
  return kp;
}

Keypoints2D project_perspective(const Joints3D& j3d, const PerspectiveCamera& cam) {
  if (!(cam.focal > 0)) throw std::invalid_argument("project_perspective: focal must be positive");
  const Eigen::Matrix3Xd pc = (cam.rotation * j3d).colwise() + cam.translation;
  std::vector<int> behind;
  for (int i = 0; i < pc.cols(); ++i)
    if (!(pc(2, i) > 1e-6)) behind.push_back(i);
  if (!behind.empty()) {
    std::string msg = "project_perspective: non-positive depth at joints";
    for (int i : behind) msg += " " + std::to_string(i);
    throw BehindCameraError(msg, behind);
  }
  Eigen::Matrix2Xd pts(2, pc.cols());
  pts.row(0) = cam.focal * (pc.row(0).array() / pc.row(2).array()) + cam.principal.x();
  pts.row(1) = cam.focal * (pc.row(1).array() / pc.row(2).array()) + cam.principal.y();
  return Keypoints2D::with_unit_confidence(std::move(pts));
}

Keypoints2D project_weak_perspective(const Joints3D& j3d, const WeakPerspectiveCamera& cam) {
  if (!(cam.scale > 0)) throw std::invalid_argument("project_weak_perspective: scale must be positive");
  if (!j3d.allFinite()) throw std::invalid_argument("project_weak_perspective: non-finite input");
  Eigen::Matrix2Xd pts = cam.scale * j3d.topRows<2>();
  pts.colwise() += cam.offset;
  return Keypoints2D::with_unit_confidence(std::move(pts));
}

Keypoints2D normalize_keypoints(const Keypoints2D& kp, double image_width, double image_height) {
  if (!(image_width > 0)) throw std::invalid_argument("normalize_keypoints: image width must be positive");
  Keypoints2D out = kp;
  out.points.row(0).array() -= image_width * 0.5;
  out.points.row(1).array() -= image_height * 0.5;
  out.points /= image_width;
  return out;
}

Keypoints2D denormalize_keypoints(const Keypoints2D& kp, double image_width, double image_height) {
  if (!(image_width > 0)) throw std::invalid_argument("denormalize_keypoints: image width must be positive");
  Keypoints2D out = kp;
  out.points *= image_width;
  out.points.row(0).array() += image_width * 0.5;
  out.points.row(1).array() += image_height * 0.5;
  return out;
}

std::string perspective_camera_to_json(const PerspectiveCamera& cam) {
  json doc;
  doc["type"] = "perspective";
  doc["focal"] = cam.focal;
  doc["principal"] = {cam.principal.x(), cam.principal.y()};
  doc["translation"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
  return doc.dump(2);
}

std::string weak_camera_to_json(const WeakPerspectiveCamera& cam) {
  json doc;
  doc["type"] = "weak";
  doc["scale"] = cam.scale;
  doc["offset"] = {cam.offset.x(), cam.offset.y()};
  return doc.dump(2);
}

PerspectiveCamera parse_perspective_camera_json(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.at("type").get<std::string>() != "perspective")
    throw ConfigError("camera JSON is not a perspective camera");
  PerspectiveCamera cam;
  cam.focal = doc.at("focal").get<double>();
  cam.principal = {doc.at("principal")[0].get<double>(), doc.at("principal")[1].get<double>()};
  const auto& t = doc.at("translation");
  cam.translation = Vec3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  if (!(cam.focal > 0)) throw ConfigError("camera JSON: focal must be positive");
  return cam;
}

WeakPerspectiveCamera parse_weak_camera_json(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.at("type").get<std::string>() != "weak")
    throw ConfigError("camera JSON is not a weak-perspective camera");
  WeakPerspectiveCamera cam;
  cam.scale = doc.at("scale").get<double>();
  cam.offset = {doc.at("offset")[0].get<double>(), doc.at("offset")[1].get<double>()};
  if (!(cam.scale > 0)) throw ConfigError("camera JSON: scale must be positive");
  return cam;
}

}  // namespace poselab
