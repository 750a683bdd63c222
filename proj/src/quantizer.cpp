#include "ang/quantizer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "ang/kmeans.hpp"
#include "parallel.hpp"

namespace ang {

SubspaceLayout::SubspaceLayout(std::vector<int> dims) : dims_(std::move(dims)) {
  offsets_.assign(1, 0);
  for (int w : dims_) {
    require(w > 0, ErrorCode::invalid_argument, "subspace widths must be positive");
    offsets_.push_back(offsets_.back() + w);
  }
}

SubspaceLayout SubspaceLayout::contiguous(int d, int m) {
  require(m >= 1 && m <= d, ErrorCode::invalid_argument,
          "partition count must be in [1, d]; got m=" + std::to_string(m) + ", d=" + std::to_string(d));
  std::vector<int> dims(static_cast<std::size_t>(m), d / m);
  for (int i = 0; i < d % m; ++i) ++dims[i];
  return SubspaceLayout(std::move(dims));
}

ProductQuantizer::ProductQuantizer(SubspaceLayout layout, std::vector<RowMatrixXf> codebooks, std::uint64_t seed,
                                   ElementKind kind)
    : layout_(std::move(layout)), codebooks_(std::move(codebooks)), seed_(seed), kind_(kind) {
  require(static_cast<int>(codebooks_.size()) == layout_.m() && layout_.m() > 0, ErrorCode::invalid_argument,
          "one codebook per subspace required");
  n_ = static_cast<int>(codebooks_[0].rows());
  require(n_ >= 1 && n_ <= 65536, ErrorCode::invalid_argument, "codebook size must be in [1, 65536]");
  for (int i = 0; i < layout_.m(); ++i) {
    require(codebooks_[i].rows() == n_, ErrorCode::invalid_argument, "all codebooks must have the same size");
    require(codebooks_[i].cols() == layout_.width(i), ErrorCode::dimension_mismatch,
            "codebook width does not match its subspace");
    require(codebooks_[i].allFinite(), ErrorCode::invalid_argument, "codebook centers must be finite");
  }
}

ProductQuantizer ProductQuantizer::train(const Dataset& ds, const PQTrainParams& params) {
  return train(ds.data, params, ds.kind);
}

ProductQuantizer ProductQuantizer::train(const RowMatrixXf& points, const PQTrainParams& params, ElementKind kind) {
  require(points.rows() > 0, ErrorCode::invalid_argument, "cannot train a quantizer on an empty dataset");
  require(params.n >= 2 && params.n <= 65536, ErrorCode::invalid_argument, "clusters per partition must be in [2, 65536]");
  require(points.rows() >= params.n, ErrorCode::invalid_argument,
          "need at least n=" + std::to_string(params.n) + " training vectors, have " + std::to_string(points.rows()));
  auto layout = SubspaceLayout::contiguous(static_cast<int>(points.cols()), params.m);

  std::vector<Eigen::Index> rows;
  if (params.max_train > 0 && points.rows() > params.max_train) {
    rows.resize(static_cast<std::size_t>(points.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(params.seed, 0xffff));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(std::max<std::int64_t>(params.max_train, params.n)));
    std::sort(rows.begin(), rows.end());
  }

  std::vector<RowMatrixXf> books(static_cast<std::size_t>(params.m));
  parallel_for(params.m, params.threads, [&](std::int64_t i) {
    const int off = layout.offset(static_cast<int>(i));
    const int width = layout.width(static_cast<int>(i));
    RowMatrixXf sub;
    if (rows.empty()) {
      sub = points.middleCols(off, width);
    } else {
      sub.resize(static_cast<Eigen::Index>(rows.size()), width);
      for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = points.row(rows[r]).segment(off, width);
    }
    KMeansParams kp{params.n, params.iters, derive_seed(params.seed, static_cast<std::uint64_t>(i)), 1};
    books[static_cast<std::size_t>(i)] = kmeans(sub, kp).centers;
  });
  return ProductQuantizer(std::move(layout), std::move(books), params.seed, kind);
}

std::uint64_t ProductQuantizer::bridge_count() const {
  std::uint64_t total = 1;
  for (int i = 0; i < m(); ++i) {
    require(total <= std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(n_),
            ErrorCode::invalid_argument, "n^m overflows 64-bit bridge ids");
    total *= static_cast<std::uint64_t>(n_);
  }
  return total;
}

void ProductQuantizer::check_code(std::span<const std::uint16_t> code) const {
  require(static_cast<int>(code.size()) == m(), ErrorCode::invalid_argument, "code length must equal m");
  for (auto k : code) require(k < n_, ErrorCode::invalid_argument, "code index out of range");
}

BridgeId ProductQuantizer::pack(std::span<const std::uint16_t> code) const {
  check_code(code);
  BridgeId id = 0;
  for (auto k : code) id = id * static_cast<BridgeId>(n_) + k;
  return id;
}

PQCode ProductQuantizer::unpack(BridgeId id) const {
  require(id < bridge_count(), ErrorCode::invalid_argument, "bridge id out of range");
  PQCode code(static_cast<std::size_t>(m()));
  for (int i = m() - 1; i >= 0; --i) {
    code[i] = static_cast<std::uint16_t>(id % static_cast<BridgeId>(n_));
    id /= static_cast<BridgeId>(n_);
  }
  return code;
}

PQCode ProductQuantizer::encode(ConstVectorRef x) const {
  PQCode code(static_cast<std::size_t>(m()));
  encode_into(x, code);
  return code;
}

void ProductQuantizer::encode_into(ConstVectorRef x, std::span<std::uint16_t> code) const {
  require(x.size() == dim(), ErrorCode::dimension_mismatch, "encode: dimension mismatch");
  require(static_cast<int>(code.size()) == m(), ErrorCode::invalid_argument, "encode: code length must equal m");
  for (int i = 0; i < m(); ++i) {
    const auto xs = layout_.sub(x, i);
    float best = std::numeric_limits<float>::infinity();
    int arg = 0;
    for (int c = 0; c < n_; ++c) {
      const float d = sq_dist_unchecked(xs, codebooks_[i].row(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    code[i] = static_cast<std::uint16_t>(arg);
  }
}

RowVectorXf ProductQuantizer::decode(std::span<const std::uint16_t> code) const {
  check_code(code);
  RowVectorXf out(dim());
  for (int i = 0; i < m(); ++i) layout_.sub(out, i) = codebooks_[i].row(code[i]);
  return out;
}

bool operator==(const ProductQuantizer& a, const ProductQuantizer& b) {
  if (!(a.layout_ == b.layout_) || a.n_ != b.n_ || a.seed_ != b.seed_ || a.kind_ != b.kind_) return false;
  for (std::size_t i = 0; i < a.codebooks_.size(); ++i)
    if (a.codebooks_[i] != b.codebooks_[i]) return false;
  return true;
}

RowMatrixXf distance_table(const ProductQuantizer& pq, ConstVectorRef q, DistanceCounter* counter) {
  require(q.size() == pq.dim(), ErrorCode::dimension_mismatch, "distance table: dimension mismatch");
  const int m = pq.m();
  const int n = pq.n();
  RowMatrixXf table(m, n);
  for (int i = 0; i < m; ++i) {
    const auto qs = pq.layout().sub(q, i);
    const auto& book = pq.codebook(i);
    for (int c = 0; c < n; ++c) table(i, c) = sq_dist_unchecked(qs, book.row(c));
  }
  if (counter) counter->sub_dist_evals += static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n);
  return table;
}

DistanceTables build_tables(const ProductQuantizer& pq, ConstVectorRef q, DistanceCounter* counter) {
  DistanceTables t;
  t.table = distance_table(pq, q, counter);
  const int m = pq.m();
  const int n = pq.n();
  t.order.resize(m, n);
  std::vector<std::uint16_t> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    std::iota(idx.begin(), idx.end(), std::uint16_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint16_t a, std::uint16_t b) { return t.table(i, a) < t.table(i, b); });
    for (int r = 0; r < n; ++r) t.order(i, r) = idx[r];
  }
  return t;
}

float asymmetric_distance(const DistanceTables& tables, std::span<const std::uint16_t> code) {
  require(static_cast<int>(code.size()) == tables.m(), ErrorCode::invalid_argument, "code length must equal m");
  float sum = 0.0f;
  for (int i = 0; i < tables.m(); ++i) {
    require(code[i] < tables.n(), ErrorCode::invalid_argument, "code index out of range");
    sum += tables.table(i, code[i]);
  }
  return sum;
}

}  // namespace ang
