#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ang/types.hpp"
#include "ang/vecstore.hpp"

namespace ang {

// Contiguous split of d dimensions into m blocks; the first d mod m blocks get
// one extra dimension.
class SubspaceLayout {
 public:
  SubspaceLayout() = default;
  explicit SubspaceLayout(std::vector<int> dims);
  static SubspaceLayout contiguous(int d, int m);

  int m() const { return static_cast<int>(dims_.size()); }
  int dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int width(int i) const { return dims_[i]; }
  int offset(int i) const { return offsets_[i]; }
  const std::vector<int>& dims() const { return dims_; }

  template <typename Derived>
  auto sub(const Eigen::MatrixBase<Derived>& x, int i) const {
    return x.segment(offsets_[i], dims_[i]);
  }
  template <typename Derived>
  auto sub(Eigen::MatrixBase<Derived>& x, int i) const {
    return x.segment(offsets_[i], dims_[i]);
  }

  friend bool operator==(const SubspaceLayout&, const SubspaceLayout&) = default;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;  // m + 1 entries
};

// Codeword index per subspace.
using PQCode = std::vector<std::uint16_t>;

struct PQTrainParams {
  int m = 4;
  int n = 50;
  std::uint64_t seed = 0;
  int iters = 25;
  int threads = 0;
  // Train on a seeded subsample of at most this many rows; 0 uses all rows.
  std::int64_t max_train = 0;
};

// Per-subspace codebooks of n centers each. Implicitly defines the n^m bridge
// vectors (every concatenation of one center per subspace); a bridge id packs
// the index tuple row-major, sum k_i * n^(m-1-i).
class ProductQuantizer {
 public:
  ProductQuantizer() = default;
  ProductQuantizer(SubspaceLayout layout, std::vector<RowMatrixXf> codebooks, std::uint64_t seed,
                   ElementKind kind = ElementKind::float32);

  static ProductQuantizer train(const Dataset& ds, const PQTrainParams& params);
  static ProductQuantizer train(const RowMatrixXf& points, const PQTrainParams& params,
                                ElementKind kind = ElementKind::float32);

  const SubspaceLayout& layout() const { return layout_; }
  int m() const { return layout_.m(); }
  int n() const { return n_; }
  int dim() const { return layout_.dim(); }
  std::uint64_t seed() const { return seed_; }
  ElementKind kind() const { return kind_; }
  const RowMatrixXf& codebook(int i) const { return codebooks_[i]; }
  const std::vector<RowMatrixXf>& codebooks() const { return codebooks_; }

  // n^m; throws if it does not fit in 64 bits.
  std::uint64_t bridge_count() const;
  BridgeId pack(std::span<const std::uint16_t> code) const;
  PQCode unpack(BridgeId id) const;

  PQCode encode(ConstVectorRef x) const;
  void encode_into(ConstVectorRef x, std::span<std::uint16_t> code) const;
  RowVectorXf decode(std::span<const std::uint16_t> code) const;
  RowVectorXf bridge_vector(BridgeId id) const { return decode(unpack(id)); }

  friend bool operator==(const ProductQuantizer& a, const ProductQuantizer& b);

 private:
  void check_code(std::span<const std::uint16_t> code) const;

  SubspaceLayout layout_;
  int n_ = 0;
  std::vector<RowMatrixXf> codebooks_;
  std::uint64_t seed_ = 0;
  ElementKind kind_ = ElementKind::float32;
};

// Per-query squared distances from each query subvector to every center of
// its subspace, plus the ascending order of each row (ties to smaller index).
struct DistanceTables {
  RowMatrixXf table;              // m x n
  RowMatrix<std::uint16_t> order; // m x n, order(i, r) = center at rank r

  int m() const { return static_cast<int>(table.rows()); }
  int n() const { return static_cast<int>(table.cols()); }
  float ranked(int i, int r) const { return table(i, order(i, r)); }
};

// m x n squared subvector distances without the row ordering.
RowMatrixXf distance_table(const ProductQuantizer& pq, ConstVectorRef q, DistanceCounter* counter = nullptr);

DistanceTables build_tables(const ProductQuantizer& pq, ConstVectorRef q, DistanceCounter* counter = nullptr);

float asymmetric_distance(const DistanceTables& tables, std::span<const std::uint16_t> code);

}  // namespace ang
