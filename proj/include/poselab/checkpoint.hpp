#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace poselab {

/// One tensor inside a checkpoint: row-count/col-count shape plus raw data
/// held as doubles in memory regardless of the on-disk dtype.
struct CheckpointTensor {
  std::string name;
  std::vector<long> shape;  // (rows, cols)
  std::string dtype;        // "f32" or "f64"
  Eigen::MatrixXd data;
};

/// Checkpoint container. On disk this is a UTF-8 JSON manifest
/// `{"tensors": [{"name", "shape", "dtype", "offset"}], ...}` next to a
/// sibling `.bin` file holding the named little-endian blobs at the listed
/// byte offsets. Extra manifest fields (e.g. "config") ride along untouched.
struct Checkpoint {
  std::vector<CheckpointTensor> tensors;
  std::string extra_json;  // serialized object merged into the manifest root

  const CheckpointTensor* find(const std::string& name) const;
  CheckpointTensor& add(const std::string& name, const Eigen::MatrixXd& m,
                        const std::string& dtype);
};

/// Writes `<path>.json` and `<path>.bin`.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path_stem);

/// Loads a checkpoint saved by save_checkpoint, given the same stem.
Checkpoint load_checkpoint(const std::string& path_stem);

}  // namespace poselab
