#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ang {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixXf = RowMatrix<float>;
using RowMatrixXi = RowMatrix<std::int32_t>;
using RowVectorXf = Eigen::RowVectorXf;

// Any contiguous row of floats: a dataset row, a segment of one, or an owned vector.
using ConstVectorRef = Eigen::Ref<const RowVectorXf>;

using BridgeId = std::uint64_t;

// (id, squared distance). Ordered by distance, ties to the smaller id.
struct Neighbor {
  std::int32_t id = -1;
  float dist = 0.0f;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
  }
  friend bool operator==(const Neighbor& a, const Neighbor& b) = default;
};

using NeighborList = std::vector<Neighbor>;

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  io,
  malformed,
  truncated,
  bad_magic,
  version_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// splitmix64 finalizer over (seed, stream): independent RNG seeds for
// sub-problems such as per-subspace k-means.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace ang
