#include "poselab/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

#include "poselab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts are unsupported");

namespace poselab {

using json = nlohmann::ordered_json;

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

CheckpointTensor& Checkpoint::add(const std::string& name, const Eigen::MatrixXd& m,
                                  const std::string& dtype) {
  CheckpointTensor t;
  t.name = name;
  t.shape = {m.rows(), m.cols()};
  t.dtype = dtype;
  t.data = m;
  tensors.push_back(std::move(t));
  return tensors.back();
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path_stem) {
  json manifest;
  if (!ckpt.extra_json.empty()) manifest = json::parse(ckpt.extra_json);
  manifest["tensors"] = json::array();

  std::ofstream bin(path_stem + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot open checkpoint blob for writing: " + path_stem + ".bin");
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    const std::uint64_t count = static_cast<std::uint64_t>(t.data.size());
    std::uint64_t bytes;
    if (t.dtype == "f64") {
      bytes = count * 8;
      bin.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(bytes));
    } else if (t.dtype == "f32") {
      bytes = count * 4;
      const Eigen::MatrixXf f = t.data.cast<float>();
      bin.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(bytes));
    } else {
      throw Error("checkpoint tensor '" + t.name + "' has unsupported dtype " + t.dtype);
    }
    json entry;
    entry["name"] = t.name;
    entry["shape"] = t.shape;
    entry["dtype"] = t.dtype;
    entry["offset"] = offset;
    manifest["tensors"].push_back(entry);
    offset += bytes;
  }
  bin.close();

  std::ofstream out(path_stem + ".json", std::ios::binary);
  if (!out) throw Error("cannot open checkpoint manifest for writing: " + path_stem + ".json");
  out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path_stem) {
  std::ifstream in(path_stem + ".json", std::ios::binary);
  if (!in) throw Error("cannot open checkpoint manifest: " + path_stem + ".json");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint manifest parse failure: ") + e.what());
  }

  std::ifstream bin(path_stem + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot open checkpoint blob: " + path_stem + ".bin");

  Checkpoint ckpt;
  for (const auto& entry : manifest.at("tensors")) {
    CheckpointTensor t;
    t.name = entry.at("name").get<std::string>();
    t.dtype = entry.at("dtype").get<std::string>();
    for (const auto& s : entry.at("shape")) t.shape.push_back(s.get<long>());
    if (t.shape.size() != 2) throw Error("checkpoint tensor '" + t.name + "' is not 2D");
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    const long rows = t.shape[0], cols = t.shape[1];
    bin.seekg(static_cast<std::streamoff>(offset));
    if (t.dtype == "f64") {
      t.data.resize(rows, cols);
      bin.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(sizeof(double) * rows * cols));
    } else if (t.dtype == "f32") {
      Eigen::MatrixXf f(rows, cols);
      bin.read(reinterpret_cast<char*>(f.data()),
               static_cast<std::streamsize>(sizeof(float) * rows * cols));
      t.data = f.cast<double>();
    } else {
      throw Error("checkpoint tensor '" + t.name + "' has unsupported dtype " + t.dtype);
    }
    if (!bin) throw Error("checkpoint blob truncated while reading '" + t.name + "'");
    ckpt.tensors.push_back(std::move(t));
  }

  manifest.erase("tensors");
  if (!manifest.empty()) ckpt.extra_json = manifest.dump();
  return ckpt;
}

}  // namespace poselab
