#include "poselab/dataset.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "poselab/errors.hpp"

namespace poselab {

using json = nlohmann::ordered_json;

namespace {
constexpr char kMagic[4] = {'P', 'T', 'K', '1'};

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
}  // namespace

void save_ptk(const PoseDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open dataset file for writing: " + path);
  out.write(kMagic, 4);
  const std::uint32_t n = static_cast<std::uint32_t>(ds.size());
  const std::uint32_t j = static_cast<std::uint32_t>(ds.joint_count);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&j), 4);
  std::vector<float> row(static_cast<size_t>(ds.joint_count) * 3);
  for (const auto& pose : ds.poses) {
    for (int k = 0; k < ds.joint_count; ++k)
      for (int c = 0; c < 3; ++c) row[k * 3 + c] = static_cast<float>(pose(k, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

PoseDataset load_ptk(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("dataset file has wrong magic (expected PTK1): " + path, 0);
  const std::uint32_t n = read_u32(in);
  const std::uint32_t j = read_u32(in);
  if (!in || j == 0 || j > 1024) throw DataError("dataset header is malformed: " + path, 0);
  PoseDataset ds;
  ds.joint_count = static_cast<int>(j);
  ds.poses.reserve(n);
  std::vector<float> row(static_cast<size_t>(j) * 3);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw DataError("dataset truncated at record " + std::to_string(i), i);
    Eigen::Matrix<double, Eigen::Dynamic, 3> pose(j, 3);
    for (std::uint32_t k = 0; k < j; ++k)
      for (int c = 0; c < 3; ++c) pose(k, c) = row[k * 3 + c];
    if (!pose.allFinite()) throw DataError("non-finite pose at record " + std::to_string(i), i);
    ds.poses.push_back(std::move(pose));
  }
  return ds;
}

void save_jsonl(const PoseDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open dataset file for writing: " + path);
  for (const auto& pose : ds.poses) {
    json rec;
    rec["pose"] = json::array();
    for (int k = 0; k < pose.rows(); ++k)
      rec["pose"].push_back({pose(k, 0), pose(k, 1), pose(k, 2)});
    out << rec.dump() << "\n";
  }
}

PoseDataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path);
  PoseDataset ds;
  ds.joint_count = -1;
  std::string line;
  long index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      ++index;
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("bad JSON at record " + std::to_string(index) + ": " + e.what(), index);
    }
    if (!rec.contains("pose") || !rec["pose"].is_array())
      throw DataError("record " + std::to_string(index) + " missing 'pose' array", index);
    const auto& arr = rec["pose"];
    Eigen::Matrix<double, Eigen::Dynamic, 3> pose(arr.size(), 3);
    for (size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_array() || arr[k].size() != 3)
        throw DataError("record " + std::to_string(index) + " joint " + std::to_string(k) +
                            " is not a 3-vector",
                        index);
      for (int c = 0; c < 3; ++c) pose(static_cast<long>(k), c) = arr[k][c].get<double>();
    }
    if (ds.joint_count < 0) ds.joint_count = static_cast<int>(arr.size());
    if (static_cast<int>(arr.size()) != ds.joint_count)
      throw DataError("record " + std::to_string(index) + " has inconsistent joint count", index);
    ds.poses.push_back(std::move(pose));
    ++index;
  }
  if (ds.joint_count < 0) ds.joint_count = 21;
  return ds;
}

PoseDataset load_pose_dataset(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".ptk" || ext == ".bin") return load_ptk(path);
  return load_jsonl(path);
}

PoseDataset synthesize_pose_manifold(int count, std::uint64_t seed, int joint_count,
                                     int latent_dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Fixed random map per joint: aa_j = amp_j .* tanh(A_j u + b_j).
  std::vector<Eigen::MatrixXd> maps;
  std::vector<Vec3d> biases, amplitudes;
  std::uniform_real_distribution<double> amp(0.15, 0.85);
  for (int jnt = 0; jnt < joint_count; ++jnt) {
    Eigen::MatrixXd a(3, latent_dim);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < latent_dim; ++c) a(r, c) = normal(rng) / std::sqrt(latent_dim);
    maps.push_back(a);
    Vec3d bias, amps;
    for (int c = 0; c < 3; ++c) bias(c) = 0.3 * normal(rng);
    for (int c = 0; c < 3; ++c) amps(c) = amp(rng);
    biases.push_back(bias);
    amplitudes.push_back(amps);
  }

  PoseDataset ds;
  ds.joint_count = joint_count;
  ds.poses.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd u(latent_dim);
    for (int d = 0; d < latent_dim; ++d) u(d) = normal(rng);
    Eigen::Matrix<double, Eigen::Dynamic, 3> pose(joint_count, 3);
    for (int jnt = 0; jnt < joint_count; ++jnt) {
      const Vec3d raw = (maps[jnt] * u + biases[jnt]).array().tanh();
      pose.row(jnt) = raw.cwiseProduct(amplitudes[jnt]).transpose();
    }
    ds.poses.push_back(std::move(pose));
  }
  return ds;
}

}  // namespace poselab
