#include "ang/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "parallel.hpp"

namespace ang {

namespace {

struct QueryStats {
  double accuracy = 0.0;
  double micros = 0.0;
  DistanceCounter counter;
};

EvalRow summarize(std::string engine, int k, int T, const std::vector<QueryStats>& per_query, bool timing) {
  EvalRow row{std::move(engine), k, T};
  for (const auto& s : per_query) {
    row.accuracy += s.accuracy;
    row.mean_us += s.micros;
    row.dist_evals += double(s.counter.full_dist_evals);
    row.heap_ops += double(s.counter.heap_ops);
  }
  const double n = per_query.empty() ? 1.0 : double(per_query.size());
  row.accuracy /= n;
  row.mean_us = timing ? row.mean_us / n : 0.0;
  row.dist_evals /= n;
  row.heap_ops /= n;
  return row;
}

template <typename Fn>
double timed(bool timing, Fn&& fn) {
  if (!timing) {
    fn();
    return 0.0;
  }
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
}

std::span<const std::int32_t> truth_row(const RowMatrixXi& truth, std::int64_t q) {
  return {truth.row(q).data(), static_cast<std::size_t>(truth.cols())};
}

}  // namespace

std::vector<std::int32_t> plain_seeds_for(std::int64_t query, std::int64_t n, int count, std::uint32_t seed) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(query)));
  std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
  std::vector<std::int32_t> seeds;
  while (static_cast<std::int64_t>(seeds.size()) < std::min<std::int64_t>(count, n)) {
    const auto s = static_cast<std::int32_t>(pick(rng));
    if (std::find(seeds.begin(), seeds.end(), s) == seeds.end()) seeds.push_back(s);
  }
  return seeds;
}

std::vector<EvalRow> run_sweep(const AugmentedGraph& g, const Dataset& base, const Dataset& queries,
                               const RowMatrixXi& truth, const SweepConfig& cfg) {
  require(truth.rows() == queries.count(), ErrorCode::invalid_argument, "truth rows must match query count");
  for (int k : cfg.ks)
    require(k >= 1 && k <= truth.cols(), ErrorCode::invalid_argument,
            "k=" + std::to_string(k) + " exceeds ground-truth width " + std::to_string(truth.cols()));
  const int nthreads = detail::resolve_threads(cfg.threads);
  std::vector<Searcher> searchers(static_cast<std::size_t>(nthreads));
  std::vector<EvalRow> rows;
  std::vector<QueryStats> stats(static_cast<std::size_t>(queries.count()));

  for (const auto& engine : cfg.engines) {
    require(engine == "augmented" || engine == "plain" || engine == "exact", ErrorCode::invalid_argument,
            "engine '" + engine + "' is not available for an ANNB index");
    for (int k : cfg.ks)
      for (int T : cfg.visits) {
        const SearchParams params{k, T};
        parallel_for(queries.count(), nthreads, [&](std::int64_t qi) {
          auto& searcher = searchers[static_cast<std::size_t>(omp_get_thread_num())];
          QueryStats s;
          NeighborList result;
          const auto q = queries.row(qi);
          if (engine == "augmented") {
            s.micros = timed(cfg.timing, [&] { result = searcher.search_augmented(g, base, q, params, &s.counter); });
          } else if (engine == "plain") {
            const auto seeds = plain_seeds_for(qi, base.count(), cfg.plain_seeds, cfg.seed);
            s.micros = timed(cfg.timing, [&] { result = searcher.search_plain(g.ngraph, base, q, seeds, params, &s.counter); });
          } else {
            s.micros = timed(cfg.timing, [&] { result = brute_force_knn(base, q, k, &s.counter); });
          }
          s.accuracy = accuracy(ids_of(result), truth_row(truth, qi), k);
          stats[static_cast<std::size_t>(qi)] = s;
        });
        rows.push_back(summarize(engine, k, T, stats, cfg.timing));
      }
  }
  return rows;
}

std::vector<EvalRow> run_ivf_sweep(const CoarseIndex& ix, const Dataset& base, const Dataset& queries,
                                   const RowMatrixXi& truth, const IvfSweepConfig& cfg) {
  require(truth.rows() == queries.count() && truth.cols() >= 1, ErrorCode::invalid_argument,
          "truth rows must match query count");
  const int nthreads = detail::resolve_threads(cfg.threads);
  const int max_k = cfg.ks.empty() ? 1 : *std::max_element(cfg.ks.begin(), cfg.ks.end());
  // by_len[l][j]: row for list_lens[l] and ks[j]; emitted k-major like run_sweep.
  std::vector<std::vector<EvalRow>> by_len;
  std::vector<std::vector<std::int32_t>> results(static_cast<std::size_t>(queries.count()));
  std::vector<QueryStats> stats(static_cast<std::size_t>(queries.count()));
  for (int L : cfg.list_lens) {
    auto& rows = by_len.emplace_back();
    const RerankParams rp{cfg.probes, L, cfg.probe_budget};
    parallel_for(queries.count(), nthreads, [&](std::int64_t qi) {
      QueryStats s;
      NeighborList result;
      s.micros = timed(cfg.timing, [&] { result = search_ivf(ix, base, queries.row(qi), rp, max_k, &s.counter); });
      results[static_cast<std::size_t>(qi)] = ids_of(result);
      stats[static_cast<std::size_t>(qi)] = s;
    });
    for (int k : cfg.ks) {
      for (std::int64_t qi = 0; qi < queries.count(); ++qi)
        stats[static_cast<std::size_t>(qi)].accuracy = recall_at(results[static_cast<std::size_t>(qi)], truth(qi, 0), k);
      rows.push_back(summarize("ivfadc", k, L, stats, cfg.timing));
    }
  }
  std::vector<EvalRow> rows;
  for (std::size_t j = 0; j < cfg.ks.size(); ++j)
    for (const auto& per_len : by_len) rows.push_back(per_len[j]);
  return rows;
}

void write_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << kCsvHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.6f,%.3f,%.3f,%.3f", r.engine.c_str(), r.k, r.T, r.accuracy, r.mean_us,
                  r.dist_evals, r.heap_ops);
    out << buf << '\n';
  }
}

RowMatrixXi groundtruth(const Dataset& base, const Dataset& queries, int k, int threads) {
  const auto lists = exact_knn_batch(base, queries.data, k, false, threads);
  RowMatrixXi ids(queries.count(), k);
  for (std::int64_t q = 0; q < queries.count(); ++q)
    for (int j = 0; j < k; ++j) ids(q, j) = lists[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)].id;
  return ids;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    require(ec == std::errc{} && ptr == item.data() + item.size() && !item.empty(), ErrorCode::invalid_argument,
            "bad integer in list: '" + std::string(item) + "'");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  require(!out.empty(), ErrorCode::invalid_argument, "empty integer list");
  return out;
}

std::vector<std::string> parse_name_list(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.emplace_back(text.substr(0, comma));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  require(!out.empty(), ErrorCode::invalid_argument, "empty name list");
  return out;
}

void cmd_groundtruth(const GroundtruthCommand& cmd) {
  const auto base = load_dataset(cmd.base, cmd.format);
  const auto queries = load_dataset(cmd.queries, cmd.format);
  require(!base.empty() && !queries.empty(), ErrorCode::invalid_argument, "groundtruth: empty base or query set");
  save_ivecs(groundtruth(base, queries, cmd.k, cmd.threads), cmd.out);
}

AugmentedGraph cmd_build(const BuildCommand& cmd, std::ostream& log) {
  const auto base = load_dataset(cmd.base, cmd.format);
  auto g = build_index(base, cmd.params);
  save_index(g, cmd.out);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "size=%lld partitions=%d clusters=%d bridges=%llu stored_bridges=%zu reference=%lld "
                "alpha_mean=%.4f alpha_over_b=%.4f reference_over_bridges=%.4f",
                static_cast<long long>(g.count), g.params.m, g.params.n,
                static_cast<unsigned long long>(g.pq.bridge_count()), g.bgraph.size(),
                static_cast<long long>(g.stats.covered_refs), g.stats.alpha_mean, g.stats.alpha_over_b,
                g.stats.covered_over_bridges);
  log << buf << '\n';
  return g;
}

CoarseIndex cmd_ivf_build(const IvfBuildCommand& cmd, std::ostream& log) {
  const auto base = load_dataset(cmd.base, cmd.format);
  auto ix = build_ivf(base, cmd.params);
  save_ivf(ix, cmd.out);
  log << "size=" << ix.count << " lists=" << ix.lists() << " code_bytes=" << ix.code_bytes()
      << " assign_fallbacks=" << ix.assign_fallbacks << '\n';
  return ix;
}

namespace {

bool is_ivf_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == "ANNV";
}

}  // namespace

void cmd_search(const SearchCommand& cmd, std::ostream& fallback_out) {
  const auto base = load_dataset(cmd.base, cmd.format);
  const auto queries = load_dataset(cmd.queries, cmd.format);
  const auto truth = load_ivecs(cmd.truth);
  std::vector<EvalRow> rows;
  if (is_ivf_file(cmd.index)) {
    for (const auto& e : cmd.sweep.engines)
      require(e == "ivfadc", ErrorCode::invalid_argument, "an ANNV index supports only engine 'ivfadc'");
    rows = run_ivf_sweep(load_ivf(cmd.index), base, queries, truth, cmd.ivf);
  } else {
    for (const auto& e : cmd.sweep.engines)
      require(e != "ivfadc", ErrorCode::invalid_argument, "engine 'ivfadc' needs an index built with ivf-build");
    rows = run_sweep(load_index(cmd.index), base, queries, truth, cmd.sweep);
  }
  if (cmd.out.empty()) {
    write_csv(fallback_out, rows);
  } else {
    std::ofstream out(cmd.out, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, "cannot create " + cmd.out.string());
    write_csv(out, rows);
  }
}

}  // namespace ang
