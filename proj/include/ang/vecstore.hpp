#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>

#include "ang/types.hpp"

namespace ang {

enum class ElementKind : std::int32_t { float32 = 0, uint8 = 1, int32 = 2 };

enum class VecFormat { fvecs, bvecs, ivecs };

VecFormat parse_format(std::string_view name);
ElementKind element_kind_of(VecFormat format);

// N vectors of dimension d, stored row-major as float. uint8 input is promoted
// once at load time; ids are row indices.
struct Dataset {
  RowMatrixXf data;
  ElementKind kind = ElementKind::float32;

  Dataset() = default;
  Dataset(RowMatrixXf rows, ElementKind k) : data(std::move(rows)), kind(k) {}

  int dim() const { return static_cast<int>(data.cols()); }
  std::int64_t count() const { return data.rows(); }
  bool empty() const { return data.rows() == 0; }
  auto row(std::int64_t i) const { return data.row(i); }
};

struct DistanceCounter {
  std::uint64_t full_dist_evals = 0;
  std::uint64_t sub_dist_evals = 0;
  std::uint64_t heap_ops = 0;

  void reset() { *this = DistanceCounter{}; }
  DistanceCounter& operator+=(const DistanceCounter& o) {
    full_dist_evals += o.full_dist_evals;
    sub_dist_evals += o.sub_dist_evals;
    heap_ops += o.heap_ops;
    return *this;
  }
};

// Squared Euclidean distance. Eight interleaved partial sums, combined in a
// fixed order, so the result depends only on the values and not on alignment
// or the expression type the operands come from.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sq_dist_unchecked(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Index n = a.size();
  Scalar acc[8] = {};
  Eigen::Index j = 0;
  for (; j + 8 <= n; j += 8) {
    for (int l = 0; l < 8; ++l) {
      const Scalar diff = a.coeff(j + l) - b.coeff(j + l);
      acc[l] += diff * diff;
    }
  }
  for (int l = 0; j < n; ++j, ++l) {
    const Scalar diff = a.coeff(j) - b.coeff(j);
    acc[l] += diff * diff;
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sq_dist(const Eigen::MatrixBase<DerivedA>& a,
                                  const Eigen::MatrixBase<DerivedB>& b) {
  require(a.size() == b.size(), ErrorCode::dimension_mismatch,
          "sq_dist: dimension mismatch (" + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()) + ")");
  return sq_dist_unchecked(a, b);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sq_dist(const Eigen::MatrixBase<DerivedA>& a,
                                  const Eigen::MatrixBase<DerivedB>& b,
                                  DistanceCounter& counter) {
  ++counter.full_dist_evals;
  return sq_dist(a, b);
}

Dataset load_dataset(const std::filesystem::path& path, VecFormat format);
void save_dataset(const Dataset& ds, const std::filesystem::path& path, VecFormat format);

// Ground-truth id lists, one row per query.
RowMatrixXi load_ivecs(const std::filesystem::path& path);
void save_ivecs(const RowMatrixXi& ids, const std::filesystem::path& path);

// Exact k nearest by direct scan, ascending by (distance, id).
NeighborList brute_force_knn(const Dataset& ds, ConstVectorRef query, int k,
                             DistanceCounter* counter = nullptr);

// Batched exact k-NN for many queries. Candidates come from a GEMM expansion
// of the squared distance; they are re-scored with sq_dist, and a query whose
// candidate margin does not exceed the GEMM rounding bound is rescanned
// directly, so rows agree with brute_force_knn.
// With exclude_self, query i is base row i and is left out of its own list.
std::vector<NeighborList> exact_knn_batch(const Dataset& base, const RowMatrixXf& queries, int k,
                                          bool exclude_self = false, int threads = 0);

std::vector<std::int32_t> ids_of(std::span<const Neighbor> list);

}  // namespace ang
