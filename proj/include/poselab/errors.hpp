#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace poselab {

/// Base class for all poselab domain errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two tensors/matrices have incompatible shapes; message names both.
struct ShapeError : Error {
  using Error::Error;
};

/// Skeleton file is structurally invalid (cycle, multiple roots, bad parent).
struct InvalidSkeletonError : Error {
  using Error::Error;
};

/// A 6D rotation input cannot be orthonormalized (zero or parallel columns).
struct DegenerateRotationError : Error {
  using Error::Error;
};

/// Point cloud too degenerate for a similarity alignment (collinear/coincident).
struct DegenerateConfigurationError : Error {
  using Error::Error;
};

/// One or more points have non-positive depth in the camera frame.
struct BehindCameraError : Error {
  std::vector<int> joint_indices;
  BehindCameraError(std::string msg, std::vector<int> indices)
      : Error(std::move(msg)), joint_indices(std::move(indices)) {}
};

/// Missing or inconsistent configuration (e.g. absent per-joint threshold).
struct ConfigError : Error {
  using Error::Error;
};

/// Failure while parsing a dataset record; carries the record index.
struct DataError : Error {
  long record_index;
  DataError(std::string msg, long index) : Error(std::move(msg)), record_index(index) {}
};

}  // namespace poselab
