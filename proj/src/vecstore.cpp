#include "ang/vecstore.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "parallel.hpp"

namespace ang {

static_assert(std::endian::native == std::endian::little, "bulk record I/O assumes a little-endian host");

VecFormat parse_format(std::string_view name) {
  if (name == "fvecs") return VecFormat::fvecs;
  if (name == "bvecs") return VecFormat::bvecs;
  if (name == "ivecs") return VecFormat::ivecs;
  throw Error(ErrorCode::invalid_argument, "unknown vector format '" + std::string(name) + "'");
}

ElementKind element_kind_of(VecFormat format) {
  switch (format) {
    case VecFormat::fvecs: return ElementKind::float32;
    case VecFormat::bvecs: return ElementKind::uint8;
    case VecFormat::ivecs: return ElementKind::int32;
  }
  return ElementKind::float32;
}

namespace {

std::size_t element_size(VecFormat format) { return format == VecFormat::bvecs ? 1 : 4; }

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> buf(size);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  require(static_cast<std::size_t>(in.gcount()) == size, ErrorCode::io, "short read on " + path.string());
  return buf;
}

struct RecordLayout {
  std::int32_t dim = 0;
  std::int64_t count = 0;
};

// Validates every record header and returns the common dimension and count.
RecordLayout scan_records(const std::vector<char>& buf, VecFormat format, const std::string& name) {
  RecordLayout layout;
  const std::size_t esz = element_size(format);
  std::size_t off = 0;
  while (off < buf.size()) {
    require(buf.size() - off >= 4, ErrorCode::truncated, name + ": truncated record header");
    std::int32_t d;
    std::memcpy(&d, buf.data() + off, 4);
    require(d > 0, ErrorCode::malformed, name + ": non-positive dimension " + std::to_string(d));
    if (layout.count == 0) layout.dim = d;
    require(d == layout.dim, ErrorCode::malformed,
            name + ": record " + std::to_string(layout.count) + " has dimension " + std::to_string(d) +
                ", expected " + std::to_string(layout.dim));
    const std::size_t payload = static_cast<std::size_t>(d) * esz;
    require(buf.size() - off - 4 >= payload, ErrorCode::truncated, name + ": truncated record payload");
    off += 4 + payload;
    ++layout.count;
  }
  return layout;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io, "cannot create " + path.string());
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, VecFormat format) {
  const auto buf = slurp(path);
  const auto layout = scan_records(buf, format, path.string());
  RowMatrixXf data(layout.count, layout.dim);
  const std::size_t stride = 4 + static_cast<std::size_t>(layout.dim) * element_size(format);
  for (std::int64_t i = 0; i < layout.count; ++i) {
    const char* rec = buf.data() + static_cast<std::size_t>(i) * stride + 4;
    float* dst = data.row(i).data();
    switch (format) {
      case VecFormat::fvecs:
        std::memcpy(dst, rec, static_cast<std::size_t>(layout.dim) * 4);
        break;
      case VecFormat::bvecs:
        for (int j = 0; j < layout.dim; ++j) dst[j] = static_cast<float>(static_cast<unsigned char>(rec[j]));
        break;
      case VecFormat::ivecs:
        for (int j = 0; j < layout.dim; ++j) {
          std::int32_t v;
          std::memcpy(&v, rec + 4 * j, 4);
          require(std::abs(static_cast<std::int64_t>(v)) <= (1 << 24), ErrorCode::malformed,
                  path.string() + ": ivecs value not exactly representable as float");
          dst[j] = static_cast<float>(v);
        }
        break;
    }
  }
  return Dataset(std::move(data), element_kind_of(format));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, VecFormat format) {
  auto out = open_out(path);
  const int d = ds.dim();
  std::vector<char> rec(4 + static_cast<std::size_t>(d) * element_size(format));
  std::memcpy(rec.data(), &d, 4);
  for (std::int64_t i = 0; i < ds.count(); ++i) {
    const float* src = ds.data.row(i).data();
    char* dst = rec.data() + 4;
    for (int j = 0; j < d; ++j) {
      const float v = src[j];
      switch (format) {
        case VecFormat::fvecs:
          std::memcpy(dst + 4 * j, &v, 4);
          break;
        case VecFormat::bvecs:
          require(v >= 0.0f && v <= 255.0f && v == std::floor(v), ErrorCode::invalid_argument,
                  "save_dataset: value not representable as uint8");
          dst[j] = static_cast<char>(static_cast<unsigned char>(v));
          break;
        case VecFormat::ivecs: {
          require(v == std::floor(v) && std::abs(v) <= 2147483647.0f, ErrorCode::invalid_argument,
                  "save_dataset: value not representable as int32");
          const auto iv = static_cast<std::int32_t>(v);
          std::memcpy(dst + 4 * j, &iv, 4);
          break;
        }
      }
    }
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

RowMatrixXi load_ivecs(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  const auto layout = scan_records(buf, VecFormat::ivecs, path.string());
  RowMatrixXi ids(layout.count, layout.dim);
  const std::size_t stride = 4 + static_cast<std::size_t>(layout.dim) * 4;
  for (std::int64_t i = 0; i < layout.count; ++i)
    std::memcpy(ids.row(i).data(), buf.data() + static_cast<std::size_t>(i) * stride + 4,
                static_cast<std::size_t>(layout.dim) * 4);
  return ids;
}

void save_ivecs(const RowMatrixXi& ids, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < ids.rows(); ++i) {
    detail::put_i32(out, static_cast<std::int32_t>(ids.cols()));
    out.write(reinterpret_cast<const char*>(ids.row(i).data()), static_cast<std::streamsize>(ids.cols() * 4));
  }
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

NeighborList brute_force_knn(const Dataset& ds, ConstVectorRef query, int k, DistanceCounter* counter) {
  require(!ds.empty(), ErrorCode::invalid_argument, "brute_force_knn: empty dataset");
  require(k >= 1 && k <= ds.count(), ErrorCode::invalid_argument,
          "brute_force_knn: k must be in [1, N], got " + std::to_string(k));
  require(query.size() == ds.dim(), ErrorCode::dimension_mismatch, "brute_force_knn: dimension mismatch");
  NeighborList all(static_cast<std::size_t>(ds.count()));
  for (std::int64_t i = 0; i < ds.count(); ++i)
    all[i] = Neighbor{static_cast<std::int32_t>(i), sq_dist_unchecked(ds.row(i), query)};
  if (counter) counter->full_dist_evals += static_cast<std::uint64_t>(ds.count());
  std::partial_sort(all.begin(), all.begin() + k, all.end());
  all.resize(k);
  return all;
}

namespace {

constexpr double kUnitRoundoff = 1.0 / (1 << 24);

// Bounded max-heap on (approx, id) keeping the `cap` smallest.
struct CandidateHeap {
  std::vector<std::pair<float, std::int32_t>> items;
  std::size_t cap = 0;

  void offer(float approx, std::int32_t id) {
    if (items.size() < cap) {
      items.emplace_back(approx, id);
      std::push_heap(items.begin(), items.end());
    } else if (std::make_pair(approx, id) < items.front()) {
      std::pop_heap(items.begin(), items.end());
      items.back() = {approx, id};
      std::push_heap(items.begin(), items.end());
    }
  }
};

NeighborList scan_row(const Dataset& base, ConstVectorRef q, int k, std::int64_t skip) {
  NeighborList all;
  all.reserve(static_cast<std::size_t>(base.count()));
  for (std::int64_t i = 0; i < base.count(); ++i)
    if (i != skip) all.push_back({static_cast<std::int32_t>(i), sq_dist_unchecked(base.row(i), q)});
  std::partial_sort(all.begin(), all.begin() + k, all.end());
  all.resize(k);
  return all;
}

}  // namespace

std::vector<NeighborList> exact_knn_batch(const Dataset& base, const RowMatrixXf& queries, int k,
                                          bool exclude_self, int threads) {
  require(!base.empty(), ErrorCode::invalid_argument, "exact_knn_batch: empty dataset");
  require(queries.cols() == base.dim(), ErrorCode::dimension_mismatch, "exact_knn_batch: dimension mismatch");
  const std::int64_t eligible = base.count() - (exclude_self ? 1 : 0);
  require(k >= 1 && k <= eligible, ErrorCode::invalid_argument,
          "exact_knn_batch: k must be in [1, " + std::to_string(eligible) + "]");
  if (exclude_self)
    require(queries.rows() == base.count(), ErrorCode::invalid_argument,
            "exact_knn_batch: exclude_self needs queries == base");

  const Eigen::VectorXf base_norms = base.data.rowwise().squaredNorm();
  const float max_norm = base_norms.maxCoeff();
  const int d = base.dim();
  const double gamma = 2.0 * (d + 4) * kUnitRoundoff;
  const std::size_t cap = static_cast<std::size_t>(std::min<std::int64_t>(eligible, k + 16));

  constexpr Eigen::Index kQueryBlock = 256;
  constexpr Eigen::Index kBaseBlock = 4096;
  const Eigen::Index nq = queries.rows();
  const Eigen::Index nblocks = (nq + kQueryBlock - 1) / kQueryBlock;
  std::vector<NeighborList> out(static_cast<std::size_t>(nq));

  parallel_for(nblocks, threads, [&](std::int64_t blk) {
    const Eigen::Index q0 = blk * kQueryBlock;
    const Eigen::Index qn = std::min(kQueryBlock, nq - q0);
    const auto qblock = queries.middleRows(q0, qn);
    const Eigen::VectorXf qnorms = qblock.rowwise().squaredNorm();
    std::vector<CandidateHeap> heaps(static_cast<std::size_t>(qn));
    for (auto& h : heaps) {
      h.cap = cap;
      h.items.reserve(cap);
    }
    RowMatrixXf gram;
    for (Eigen::Index b0 = 0; b0 < base.count(); b0 += kBaseBlock) {
      const Eigen::Index bn = std::min(kBaseBlock, base.count() - b0);
      gram.noalias() = qblock * base.data.middleRows(b0, bn).transpose();
      for (Eigen::Index i = 0; i < qn; ++i) {
        auto& heap = heaps[static_cast<std::size_t>(i)];
        const float* g = gram.row(i).data();
        const float qsq = qnorms[i];
        for (Eigen::Index j = 0; j < bn; ++j) {
          const Eigen::Index id = b0 + j;
          if (exclude_self && id == q0 + i) continue;
          const float approx = qsq + base_norms[id] - 2.0f * g[j];
          if (heap.items.size() < cap || approx <= heap.items.front().first)
            heap.offer(approx, static_cast<std::int32_t>(id));
        }
      }
    }
    for (Eigen::Index i = 0; i < qn; ++i) {
      const auto q = queries.row(q0 + i);
      const std::int64_t self = exclude_self ? q0 + i : -1;
      auto& heap = heaps[static_cast<std::size_t>(i)];
      NeighborList cands;
      cands.reserve(heap.items.size());
      for (const auto& [approx, id] : heap.items) cands.push_back({id, sq_dist_unchecked(base.row(id), q)});
      std::sort(cands.begin(), cands.end());
      cands.resize(static_cast<std::size_t>(k));
      bool certain = static_cast<std::int64_t>(heap.items.size()) == eligible;
      if (!certain) {
        // Every point outside the candidate set has approx >= the heap top.
        const double worst = heap.items.front().first;
        const double err = 2.0 * gamma * (static_cast<double>(qnorms[i]) + max_norm);
        const double kth = cands.back().dist;
        certain = worst - err > kth * (1.0 + 2.0 * gamma);
      }
      out[static_cast<std::size_t>(q0 + i)] = certain ? std::move(cands) : scan_row(base, q, k, self);
    }
  });
  return out;
}

std::vector<std::int32_t> ids_of(std::span<const Neighbor> list) {
  std::vector<std::int32_t> ids(list.size());
  std::transform(list.begin(), list.end(), ids.begin(), [](const Neighbor& n) { return n.id; });
  return ids;
}

}  // namespace ang
