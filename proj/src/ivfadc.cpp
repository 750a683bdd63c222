#include "ang/ivfadc.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>

#include "ang/kmeans.hpp"
#include "binary_io.hpp"
#include "parallel.hpp"

namespace ang {

namespace {
constexpr char kMagic[4] = {'A', 'N', 'N', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kCoarseStream = 0xC0A25E;
constexpr std::uint64_t kResidualStream = 0x5E51D;

BuildParams center_graph_params(const IvfBuildParams& p) {
  BuildParams c = p.coarse;
  c.n = std::min(c.n, p.lists);
  c.m = std::min(c.m, 8);
  c.degree = std::min(c.degree, p.lists - 1);
  std::uint64_t bridges = 1;
  for (int i = 0; i < c.m; ++i) bridges *= static_cast<std::uint64_t>(c.n);
  c.bridge_t = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(c.bridge_t), bridges));
  c.seed = p.seed;
  c.kmeans_iters = p.kmeans_iters;
  c.threads = p.threads;
  return c;
}
}  // namespace

CoarseIndex build_ivf(const Dataset& ds, const IvfBuildParams& params) {
  require(!ds.empty(), ErrorCode::invalid_argument, "build_ivf: empty dataset");
  require(params.lists >= 2 && params.lists <= ds.count(), ErrorCode::invalid_argument,
          "build_ivf: list count must be in [2, N]");
  require(params.assign_budget >= 1, ErrorCode::invalid_argument, "build_ivf: assign budget must be >= 1");

  CoarseIndex ix;
  ix.dim = ds.dim();
  ix.count = ds.count();
  ix.kind = ds.kind;
  ix.seed = params.seed;
  ix.assign_budget = params.assign_budget;

  KMeansParams kp{params.lists, params.kmeans_iters, derive_seed(params.seed, kCoarseStream), params.threads};
  ix.centers = Dataset(kmeans(ds.data, kp).centers, ElementKind::float32);
  ix.center_graph = build_index(ix.centers, center_graph_params(params));

  const int nthreads = detail::resolve_threads(params.threads);
  std::vector<Searcher> searchers(static_cast<std::size_t>(nthreads));
  std::vector<std::int32_t> assign(static_cast<std::size_t>(ds.count()));
  std::vector<char> fell_back(static_cast<std::size_t>(ds.count()), 0);
  const SearchParams sp{1, params.assign_budget};
  parallel_for(ds.count(), nthreads, [&](std::int64_t i) {
    auto& s = searchers[static_cast<std::size_t>(omp_get_thread_num())];
    auto hit = s.search_augmented(ix.center_graph, ix.centers, ds.row(i), sp);
    if (hit.empty()) {
      hit = brute_force_knn(ix.centers, ds.row(i), 1);
      fell_back[static_cast<std::size_t>(i)] = 1;
    }
    assign[static_cast<std::size_t>(i)] = hit.front().id;
  });
  ix.assign_fallbacks = std::count(fell_back.begin(), fell_back.end(), char{1});

  RowMatrixXf residuals(ds.count(), ds.dim());
  for (std::int64_t i = 0; i < ds.count(); ++i)
    residuals.row(i) = ds.row(i) - ix.centers.row(assign[static_cast<std::size_t>(i)]);
  PQTrainParams rp;
  rp.m = params.residual_m;
  rp.n = params.residual_n;
  rp.seed = derive_seed(params.seed, kResidualStream);
  rp.iters = params.kmeans_iters;
  rp.threads = params.threads;
  rp.max_train = params.max_train;
  ix.residual_pq = ProductQuantizer::train(residuals, rp);

  const auto m = static_cast<std::size_t>(ix.residual_pq.m());
  std::vector<std::uint16_t> codes(static_cast<std::size_t>(ds.count()) * m);
  parallel_for(ds.count(), nthreads, [&](std::int64_t i) {
    ix.residual_pq.encode_into(residuals.row(i), std::span(codes).subspan(static_cast<std::size_t>(i) * m, m));
  });
  ix.list_ids.assign(static_cast<std::size_t>(params.lists), {});
  ix.list_codes.assign(static_cast<std::size_t>(params.lists), {});
  for (std::int64_t i = 0; i < ds.count(); ++i) {
    const auto c = static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]);
    ix.list_ids[c].push_back(static_cast<std::int32_t>(i));
    const auto* src = codes.data() + static_cast<std::size_t>(i) * m;
    ix.list_codes[c].insert(ix.list_codes[c].end(), src, src + m);
  }
  return ix;
}

NeighborList search_ivf(const CoarseIndex& ix, const Dataset& base, ConstVectorRef q, const RerankParams& rerank,
                        int k, DistanceCounter* counter, IvfSearchInfo* info) {
  require(ix.lists() > 0, ErrorCode::invalid_argument, "search_ivf: index not built");
  require(base.count() == ix.count && base.dim() == ix.dim, ErrorCode::invalid_argument,
          "search_ivf: base vectors do not match the index");
  require(q.size() == ix.dim, ErrorCode::dimension_mismatch, "search_ivf: query dimension mismatch");
  require(rerank.probes >= 1 && rerank.list_len >= 1 && k >= 1, ErrorCode::invalid_argument,
          "search_ivf: probes, list length and k must be >= 1");

  const int probes = std::min(rerank.probes, ix.lists());
  const int budget = rerank.probe_budget > 0 ? rerank.probe_budget : std::max(ix.assign_budget, 4 * probes);
  auto lists = search_augmented(ix.center_graph, ix.centers, q, SearchParams{probes, budget}, counter);
  std::int64_t filled = 0;
  if (static_cast<int>(lists.size()) < probes) {
    // The graph search reached fewer centers than requested; complete the
    // probe set with the nearest remaining centers.
    auto all = brute_force_knn(ix.centers, q, ix.lists(), counter);
    for (const auto& c : all) {
      if (static_cast<int>(lists.size()) == probes) break;
      if (std::none_of(lists.begin(), lists.end(), [&](const Neighbor& l) { return l.id == c.id; })) {
        lists.push_back(c);
        ++filled;
      }
    }
    std::sort(lists.begin(), lists.end());
  }

  const auto m = static_cast<std::size_t>(ix.residual_pq.m());
  const auto cap = static_cast<std::size_t>(rerank.list_len);
  NeighborList heap;
  heap.reserve(cap);
  std::int64_t scored = 0;
  for (const auto& list : lists) {
    const RowVectorXf residual = q - ix.centers.row(list.id);
    const RowMatrixXf table = distance_table(ix.residual_pq, residual, counter);
    const auto& ids = ix.list_ids[static_cast<std::size_t>(list.id)];
    const auto& codes = ix.list_codes[static_cast<std::size_t>(list.id)];
    for (std::size_t e = 0; e < ids.size(); ++e) {
      float adc = 0.0f;
      for (std::size_t i = 0; i < m; ++i) adc += table(static_cast<Eigen::Index>(i), codes[e * m + i]);
      const Neighbor cand{ids[e], adc};
      if (heap.size() < cap) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    scored += static_cast<std::int64_t>(ids.size());
  }

  for (auto& c : heap) c.dist = sq_dist_unchecked(base.row(c.id), q);
  if (counter) counter->full_dist_evals += heap.size();
  const auto keep = std::min(heap.size(), static_cast<std::size_t>(k));
  std::partial_sort(heap.begin(), heap.begin() + static_cast<std::ptrdiff_t>(keep), heap.end());
  heap.resize(keep);
  if (info) {
    info->candidates += scored;
    info->probe_fallbacks += filled;
  }
  return heap;
}

int recall_at(std::span<const std::int32_t> result, std::int32_t true_nn, int T) {
  require(T >= 1, ErrorCode::invalid_argument, "recall_at: T must be >= 1");
  const auto end = result.begin() + static_cast<std::ptrdiff_t>(std::min(result.size(), static_cast<std::size_t>(T)));
  return std::find(result.begin(), end, true_nn) != end ? 1 : 0;
}

void save_ivf(const CoarseIndex& ix, const std::filesystem::path& path) {
  using namespace detail;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io, "cannot create " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_i32(out, ix.dim);
  put_i32(out, static_cast<std::int32_t>(ix.count));
  put_i32(out, ix.lists());
  put_i32(out, ix.residual_pq.m());
  put_i32(out, ix.residual_pq.n());
  put_u32(out, ix.seed);
  put_i32(out, static_cast<std::int32_t>(ix.kind));
  put_i32(out, ix.assign_budget);
  for (std::int64_t c = 0; c < ix.centers.count(); ++c)
    for (int j = 0; j < ix.dim; ++j) put_f32(out, ix.centers.data(c, j));
  write_index(ix.center_graph, out);
  for (int w : ix.residual_pq.layout().dims()) put_i32(out, w);
  for (const auto& book : ix.residual_pq.codebooks())
    for (Eigen::Index r = 0; r < book.rows(); ++r)
      for (Eigen::Index c = 0; c < book.cols(); ++c) put_f32(out, book(r, c));
  const auto m = static_cast<std::size_t>(ix.residual_pq.m());
  for (int l = 0; l < ix.lists(); ++l) {
    const auto& ids = ix.list_ids[static_cast<std::size_t>(l)];
    const auto& codes = ix.list_codes[static_cast<std::size_t>(l)];
    put_u32(out, static_cast<std::uint32_t>(ids.size()));
    for (std::size_t e = 0; e < ids.size(); ++e) {
      put_i32(out, ids[e]);
      for (std::size_t i = 0; i < m; ++i) put_u16(out, codes[e * m + i]);
    }
  }
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

CoarseIndex load_ivf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  detail::Reader rd(in, "ivf index");
  char magic[4];
  rd.bytes(magic, 4);
  require(std::equal(magic, magic + 4, kMagic), ErrorCode::bad_magic, "ivf index: bad magic (expected ANNV)");
  const auto version = rd.u32();
  require(version == kVersion, ErrorCode::version_mismatch, "ivf index: unsupported version " + std::to_string(version));

  CoarseIndex ix;
  ix.dim = rd.i32();
  ix.count = rd.i32();
  const int lists = rd.i32();
  const int rm = rd.i32();
  const int rn = rd.i32();
  ix.seed = rd.u32();
  ix.kind = static_cast<ElementKind>(rd.i32());
  ix.assign_budget = rd.i32();
  require(ix.dim > 0 && ix.count > 0 && lists >= 2 && rm >= 1 && rm <= ix.dim && rn >= 1 && rn <= 65536,
          ErrorCode::malformed, "ivf index: header values out of range");

  RowMatrixXf centers(lists, ix.dim);
  for (int c = 0; c < lists; ++c)
    for (int j = 0; j < ix.dim; ++j) centers(c, j) = rd.f32();
  ix.centers = Dataset(std::move(centers), ElementKind::float32);
  ix.center_graph = read_index(in);
  require(ix.center_graph.count == lists && ix.center_graph.dim == ix.dim, ErrorCode::malformed,
          "ivf index: center graph does not match the centers");

  std::vector<int> dims(static_cast<std::size_t>(rm));
  for (auto& w : dims) w = rd.i32();
  SubspaceLayout layout(dims);
  require(layout.dim() == ix.dim, ErrorCode::malformed, "ivf index: residual widths do not sum to d");
  std::vector<RowMatrixXf> books;
  for (int i = 0; i < rm; ++i) {
    RowMatrixXf book(rn, dims[static_cast<std::size_t>(i)]);
    for (Eigen::Index r = 0; r < book.rows(); ++r)
      for (Eigen::Index c = 0; c < book.cols(); ++c) book(r, c) = rd.f32();
    books.push_back(std::move(book));
  }
  ix.residual_pq = ProductQuantizer(std::move(layout), std::move(books), derive_seed(ix.seed, kResidualStream),
                                    ElementKind::float32);

  ix.list_ids.assign(static_cast<std::size_t>(lists), {});
  ix.list_codes.assign(static_cast<std::size_t>(lists), {});
  std::int64_t total = 0;
  for (int l = 0; l < lists; ++l) {
    const auto len = rd.u32();
    auto& ids = ix.list_ids[static_cast<std::size_t>(l)];
    auto& codes = ix.list_codes[static_cast<std::size_t>(l)];
    for (std::uint32_t e = 0; e < len; ++e) {
      const auto id = rd.i32();
      require(id >= 0 && id < ix.count, ErrorCode::malformed, "ivf index: list member out of range");
      ids.push_back(id);
      for (int i = 0; i < rm; ++i) {
        const auto code = rd.u16();
        require(code < rn, ErrorCode::malformed, "ivf index: code out of range");
        codes.push_back(code);
      }
    }
    total += len;
  }
  require(total == ix.count, ErrorCode::malformed, "ivf index: lists do not partition the dataset");
  return ix;
}

}  // namespace ang
