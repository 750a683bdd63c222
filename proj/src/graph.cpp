#include "ang/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "ang/multiseq.hpp"
#include "binary_io.hpp"
#include "parallel.hpp"

namespace ang {

namespace {
constexpr char kMagic[4] = {'A', 'N', 'N', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 4 + 4 + 9 * 4;
}  // namespace

BridgeGraph::BridgeGraph(std::vector<BridgeId> bridges, std::vector<std::uint32_t> offsets,
                         std::vector<Neighbor> entries)
    : bridges_(std::move(bridges)), offsets_(std::move(offsets)), entries_(std::move(entries)) {
  require(offsets_.size() == bridges_.size() + 1 && offsets_.front() == 0 && offsets_.back() == entries_.size(),
          ErrorCode::malformed, "bridge graph offsets inconsistent");
  slot_.reserve(bridges_.size());
  for (std::size_t s = 0; s < bridges_.size(); ++s) {
    require(offsets_[s + 1] > offsets_[s], ErrorCode::malformed, "bridge graph stores an empty list");
    require(s == 0 || bridges_[s] > bridges_[s - 1], ErrorCode::malformed, "bridge ids must be strictly ascending");
    slot_.emplace(bridges_[s], static_cast<std::uint32_t>(s));
  }
}

std::span<const Neighbor> BridgeGraph::lookup(BridgeId id) const {
  const auto it = slot_.find(id);
  if (it == slot_.end()) return {};
  return list(it->second);
}

NeighborhoodGraph build_ngraph(const Dataset& ds, int degree, int threads) {
  require(!ds.empty(), ErrorCode::invalid_argument, "build_ngraph: empty dataset");
  require(degree >= 1 && degree < ds.count(), ErrorCode::invalid_argument,
          "graph degree must be in [1, N); got " + std::to_string(degree));
  const auto lists = exact_knn_batch(ds, ds.data, degree, /*exclude_self=*/true, threads);
  NeighborhoodGraph g;
  g.ids.resize(ds.count(), degree);
  g.dists.resize(ds.count(), degree);
  for (std::int64_t i = 0; i < ds.count(); ++i)
    for (int r = 0; r < degree; ++r) {
      g.ids(i, r) = lists[i][r].id;
      g.dists(i, r) = lists[i][r].dist;
    }
  return g;
}

BridgeGraph build_bgraph(const Dataset& ds, const ProductQuantizer& pq, int t, int b, int threads) {
  require(t >= 1 && b >= 1, ErrorCode::invalid_argument, "bridge parameters t and b must be positive");
  require(static_cast<std::uint64_t>(t) <= pq.bridge_count(), ErrorCode::invalid_argument,
          "bridge_t exceeds the number of bridge vectors");
  require(ds.dim() == pq.dim(), ErrorCode::dimension_mismatch, "build_bgraph: dimension mismatch");

  // Bounded per-bridge lists, each kept sorted ascending with at most b entries.
  std::unordered_map<BridgeId, std::uint32_t> slot_of;
  std::vector<Neighbor> slots;
  std::vector<std::uint32_t> fill;
  auto offer = [&](BridgeId bridge, Neighbor cand) {
    auto [it, fresh] = slot_of.try_emplace(bridge, static_cast<std::uint32_t>(fill.size()));
    if (fresh) {
      fill.push_back(0);
      slots.resize(slots.size() + static_cast<std::size_t>(b));
    }
    const std::size_t base = static_cast<std::size_t>(it->second) * b;
    std::uint32_t& len = fill[it->second];
    if (len == static_cast<std::uint32_t>(b) && !(cand < slots[base + b - 1])) return;
    std::size_t pos = len < static_cast<std::uint32_t>(b) ? len++ : static_cast<std::size_t>(b - 1);
    while (pos > 0 && cand < slots[base + pos - 1]) {
      slots[base + pos] = slots[base + pos - 1];
      --pos;
    }
    slots[base + pos] = cand;
  };

  constexpr std::int64_t kChunk = 2048;
  std::vector<BridgeHit> hits;
  for (std::int64_t c0 = 0; c0 < ds.count(); c0 += kChunk) {
    const std::int64_t cn = std::min(kChunk, ds.count() - c0);
    hits.assign(static_cast<std::size_t>(cn * t), BridgeHit{});
    parallel_for(cn, threads, [&](std::int64_t i) {
      const auto tables = build_tables(pq, ds.row(c0 + i));
      MultiSequence stream(tables);
      for (int r = 0; r < t; ++r) hits[static_cast<std::size_t>(i * t + r)] = *stream.next();
    });
    // Merged in reference order; the retained lists do not depend on it.
    for (std::int64_t i = 0; i < cn; ++i)
      for (int r = 0; r < t; ++r) {
        const auto& h = hits[static_cast<std::size_t>(i * t + r)];
        offer(h.id, Neighbor{static_cast<std::int32_t>(c0 + i), h.dist});
      }
  }

  std::vector<BridgeId> bridges;
  bridges.reserve(slot_of.size());
  for (const auto& kv : slot_of) bridges.push_back(kv.first);
  std::sort(bridges.begin(), bridges.end());
  std::vector<std::uint32_t> offsets{0};
  std::vector<Neighbor> entries;
  offsets.reserve(bridges.size() + 1);
  for (BridgeId id : bridges) {
    const std::uint32_t s = slot_of.at(id);
    const std::size_t base = static_cast<std::size_t>(s) * b;
    entries.insert(entries.end(), slots.begin() + static_cast<std::ptrdiff_t>(base),
                   slots.begin() + static_cast<std::ptrdiff_t>(base + fill[s]));
    offsets.push_back(static_cast<std::uint32_t>(entries.size()));
  }
  return BridgeGraph(std::move(bridges), std::move(offsets), std::move(entries));
}

GraphStats compute_stats(const BridgeGraph& bgraph, int b, std::uint64_t bridge_count) {
  GraphStats s;
  std::vector<std::int32_t> ids;
  ids.reserve(bgraph.entry_count());
  for (const auto& e : bgraph.entries()) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  s.covered_refs = std::unique(ids.begin(), ids.end()) - ids.begin();
  if (bgraph.size() > 0) s.alpha_mean = double(bgraph.entry_count()) / double(bgraph.size());
  if (b > 0) s.alpha_over_b = s.alpha_mean / b;
  if (bridge_count > 0) s.covered_over_bridges = double(s.covered_refs) / double(bridge_count);
  return s;
}

AugmentedGraph build_index(const Dataset& ds, const BuildParams& params) {
  require(!ds.empty(), ErrorCode::invalid_argument, "build_index: empty dataset");
  require(ds.count() <= std::numeric_limits<std::int32_t>::max(), ErrorCode::invalid_argument,
          "build_index: too many vectors for 32-bit ids");
  AugmentedGraph g;
  g.params = params;
  g.dim = ds.dim();
  g.count = ds.count();
  g.kind = ds.kind;
  PQTrainParams pp;
  pp.m = params.m;
  pp.n = params.n;
  pp.seed = params.seed;
  pp.iters = params.kmeans_iters;
  pp.threads = params.threads;
  g.pq = ProductQuantizer::train(ds, pp);
  g.ngraph = build_ngraph(ds, params.degree, params.threads);
  g.bgraph = build_bgraph(ds, g.pq, params.bridge_t, params.bridge_b, params.threads);
  g.stats = compute_stats(g.bgraph, params.bridge_b, g.pq.bridge_count());
  return g;
}

void write_index(const AugmentedGraph& g, std::ostream& out) {
  using namespace detail;
  require(g.pq.bridge_count() <= std::numeric_limits<std::uint32_t>::max(), ErrorCode::invalid_argument,
          "index format stores 32-bit bridge ids; n^m too large");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_i32(out, g.dim);
  put_i32(out, static_cast<std::int32_t>(g.count));
  put_i32(out, g.params.m);
  put_i32(out, g.params.n);
  put_i32(out, g.params.degree);
  put_i32(out, g.params.bridge_t);
  put_i32(out, g.params.bridge_b);
  put_u32(out, g.params.seed);
  put_i32(out, static_cast<std::int32_t>(g.kind));
  for (int w : g.pq.layout().dims()) put_i32(out, w);
  for (const auto& book : g.pq.codebooks())
    for (Eigen::Index r = 0; r < book.rows(); ++r)
      for (Eigen::Index c = 0; c < book.cols(); ++c) put_f32(out, book(r, c));
  for (std::int64_t i = 0; i < g.ngraph.size(); ++i)
    for (int r = 0; r < g.ngraph.degree(); ++r) {
      put_i32(out, g.ngraph.ids(i, r));
      put_f32(out, g.ngraph.dists(i, r));
    }
  put_u32(out, static_cast<std::uint32_t>(g.bgraph.size()));
  for (std::size_t s = 0; s < g.bgraph.size(); ++s) {
    const auto list = g.bgraph.list(s);
    put_u32(out, static_cast<std::uint32_t>(g.bgraph.bridge(s)));
    put_u32(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& e : list) {
      put_i32(out, e.id);
      put_f32(out, e.dist);
    }
  }
  require(static_cast<bool>(out), ErrorCode::io, "index write failed");
}

AugmentedGraph read_index(std::istream& in) {
  detail::Reader rd(in, "index");
  char magic[4];
  rd.bytes(magic, 4);
  require(std::equal(magic, magic + 4, kMagic), ErrorCode::bad_magic, "index: bad magic (expected ANNB)");
  const auto version = rd.u32();
  require(version == kVersion, ErrorCode::version_mismatch, "index: unsupported version " + std::to_string(version));

  AugmentedGraph g;
  g.dim = rd.i32();
  g.count = rd.i32();
  g.params.m = rd.i32();
  g.params.n = rd.i32();
  g.params.degree = rd.i32();
  g.params.bridge_t = rd.i32();
  g.params.bridge_b = rd.i32();
  g.params.seed = rd.u32();
  g.kind = static_cast<ElementKind>(rd.i32());
  require(g.dim > 0 && g.count > 0 && g.params.m >= 1 && g.params.m <= g.dim && g.params.n >= 1 &&
              g.params.n <= 65536 && g.params.degree >= 1 && g.params.degree < g.count && g.params.bridge_b >= 1,
          ErrorCode::malformed, "index: header values out of range");

  std::vector<int> dims(static_cast<std::size_t>(g.params.m));
  for (auto& w : dims) w = rd.i32();
  SubspaceLayout layout(dims);
  require(layout.dim() == g.dim, ErrorCode::malformed, "index: subspace widths do not sum to d");
  std::vector<RowMatrixXf> books;
  for (int i = 0; i < g.params.m; ++i) {
    RowMatrixXf book(g.params.n, dims[i]);
    for (Eigen::Index r = 0; r < book.rows(); ++r)
      for (Eigen::Index c = 0; c < book.cols(); ++c) book(r, c) = rd.f32();
    books.push_back(std::move(book));
  }
  g.pq = ProductQuantizer(std::move(layout), std::move(books), g.params.seed, g.kind);

  g.ngraph.ids.resize(g.count, g.params.degree);
  g.ngraph.dists.resize(g.count, g.params.degree);
  for (std::int64_t i = 0; i < g.count; ++i)
    for (int r = 0; r < g.params.degree; ++r) {
      g.ngraph.ids(i, r) = rd.i32();
      g.ngraph.dists(i, r) = rd.f32();
      require(g.ngraph.ids(i, r) >= 0 && g.ngraph.ids(i, r) < g.count, ErrorCode::malformed,
              "index: adjacency id out of range");
    }

  const auto nb = rd.u32();
  std::vector<BridgeId> bridges;
  std::vector<std::uint32_t> offsets{0};
  std::vector<Neighbor> entries;
  bridges.reserve(nb);
  for (std::uint32_t s = 0; s < nb; ++s) {
    bridges.push_back(rd.u32());
    const auto len = rd.u32();
    require(len >= 1 && len <= static_cast<std::uint32_t>(g.params.bridge_b), ErrorCode::malformed,
            "index: bridge list length out of range");
    for (std::uint32_t e = 0; e < len; ++e) {
      Neighbor nbr{rd.i32(), rd.f32()};
      require(nbr.id >= 0 && nbr.id < g.count, ErrorCode::malformed, "index: bridge entry id out of range");
      entries.push_back(nbr);
    }
    offsets.push_back(static_cast<std::uint32_t>(entries.size()));
  }
  g.bgraph = BridgeGraph(std::move(bridges), std::move(offsets), std::move(entries));
  g.stats = compute_stats(g.bgraph, g.params.bridge_b, g.pq.bridge_count());
  return g;
}

void save_index(const AugmentedGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io, "cannot create " + path.string());
  write_index(g, out);
}

AugmentedGraph load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  return read_index(in);
}

std::uint64_t index_layout_size(const AugmentedGraph& g) {
  std::uint64_t bytes = kHeaderBytes + 4ull * static_cast<std::uint64_t>(g.pq.m());
  bytes += 4ull * static_cast<std::uint64_t>(g.pq.n()) * static_cast<std::uint64_t>(g.pq.dim());
  bytes += 8ull * static_cast<std::uint64_t>(g.ngraph.size()) * static_cast<std::uint64_t>(g.ngraph.degree());
  bytes += 4 + 8ull * g.bgraph.size() + 8ull * g.bgraph.entry_count();
  return bytes;
}

}  // namespace ang
