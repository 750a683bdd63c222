#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>

#include "ang/search.hpp"
#include "ang/synth.hpp"

using namespace ang;

namespace {

std::int64_t bridges_in(const std::vector<QueueEntry>& q) {
  return std::count_if(q.begin(), q.end(), [](const QueueEntry& e) { return e.kind == EntryKind::bridge; });
}

std::multiset<std::pair<std::uint8_t, std::uint64_t>> as_set(const std::vector<QueueEntry>& q) {
  std::multiset<std::pair<std::uint8_t, std::uint64_t>> s;
  for (const auto& e : q) s.emplace(static_cast<std::uint8_t>(e.kind), e.id);
  return s;
}

// Checks every per-step invariant of the augmented loop for one query and
// returns the number of references evaluated.
std::int64_t check_trace(const AugmentedGraph& g, const Dataset& base, const RowVectorXf& q,
                         const SearchParams& params, bool snapshot) {
  Searcher s;
  DistanceCounter counter;
  std::set<std::int32_t> evaluated;
  std::int64_t steps = 0, last_visited = 0;
  bool ok = true;
  SearchTrace trace;
  trace.snapshot_queue = snapshot;
  trace.on_step = [&](const SearchStep& st) {
    ++steps;
    for (auto id : st.discovered) ok &= evaluated.insert(id).second;
    ok &= st.visited == last_visited + static_cast<std::int64_t>(st.discovered.size());
    last_visited = st.visited;
    ok &= st.queue_size <= static_cast<std::size_t>(st.visited) + 1;
    if (st.popped.kind == EntryKind::reference) ok &= !st.next_bridge.has_value();
    if (!snapshot) return;
    ok &= bridges_in(st.queue_before) <= 1 && bridges_in(st.queue_after) <= 1;
    ok &= std::none_of(st.queue_before.begin(), st.queue_before.end(),
                       [&](const QueueEntry& e) { return e < st.popped; });
    ok &= std::find(st.queue_before.begin(), st.queue_before.end(), st.popped) != st.queue_before.end();
    auto expect = as_set(st.queue_before);
    expect.erase(expect.find({static_cast<std::uint8_t>(st.popped.kind), st.popped.id}));
    for (auto id : st.discovered) expect.emplace(1, static_cast<std::uint64_t>(id));
    if (st.next_bridge) expect.emplace(0, st.next_bridge->id);
    ok &= expect == as_set(st.queue_after);
    // While the stream still has bridges, one of them is always queued.
    if (st.popped.kind == EntryKind::bridge && st.next_bridge) ok &= bridges_in(st.queue_after) == 1;
  };
  s.search_augmented(g, base, q, params, &counter, &trace);
  CHECK(ok);
  CHECK(counter.full_dist_evals == static_cast<std::uint64_t>(last_visited));
  CHECK(counter.sub_dist_evals == static_cast<std::uint64_t>(g.pq.m() * g.pq.n()));
  CHECK(steps > 0);
  return last_visited;
}

std::vector<std::int32_t> reachable_from_bridges(const AugmentedGraph& g) {
  std::vector<char> seen(static_cast<std::size_t>(g.count), 0);
  std::queue<std::int32_t> frontier;
  for (const auto& e : g.bgraph.entries())
    if (!seen[e.id]) seen[e.id] = 1, frontier.push(e.id);
  while (!frontier.empty()) {
    const auto x = frontier.front();
    frontier.pop();
    for (auto y : g.ngraph.neighbors(x))
      if (!seen[y]) seen[y] = 1, frontier.push(y);
  }
  std::vector<std::int32_t> out;
  for (std::int32_t i = 0; i < g.count; ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("six-vector walkthrough keeps the queue invariants at every step") {
  RowMatrixXf rows(6, 2);
  rows << 0, 0, 1, 0, 0, 1, 5, 5, 6, 5, 5, 6;
  const Dataset base(rows, ElementKind::float32);
  const auto g = build_index(base, {.m = 2, .n = 2, .degree = 2, .bridge_t = 1, .bridge_b = 2, .seed = 1});
  RowVectorXf q(2);
  q << 0.9f, 0.2f;

  std::vector<SearchStep> steps;
  SearchTrace trace{.snapshot_queue = true, .on_step = [&](const SearchStep& st) { steps.push_back(st); }};
  Searcher s;
  const auto res = s.search_augmented(g, base, q, {.k = 2, .max_visits = 6}, nullptr, &trace);
  REQUIRE(steps.size() >= 4);
  // First iteration pops the nearest bridge, inserts its references and the next bridge.
  CHECK(steps[0].popped.kind == EntryKind::bridge);
  CHECK(steps[0].queue_before.size() == 1);
  CHECK(steps[0].next_bridge.has_value());
  CHECK(bridges_in(steps[0].queue_after) == 1);
  CHECK_FALSE(steps[0].discovered.empty());
  // Second iteration expands the best reference just inserted.
  CHECK(steps[1].popped.kind == EntryKind::reference);
  CHECK(std::find(steps[0].discovered.begin(), steps[0].discovered.end(),
                  static_cast<std::int32_t>(steps[1].popped.id)) != steps[0].discovered.end());
  for (const auto& st : steps) CHECK(bridges_in(st.queue_after) <= 1);
  REQUIRE(res.size() == 2);
  CHECK(res[0].id == 1);
  CHECK(res[1].id == 0);
  check_trace(g, base, q, {.k = 2, .max_visits = 6}, true);
}

TEST_CASE("trace invariants over random queries on a clustered index") {
  const auto [base, queries] = make_sift_like({.base = 3000, .queries = 60, .dim = 16, .clusters = 20, .seed = 8});
  const auto g = build_index(base, {.m = 2, .n = 16, .degree = 8, .bridge_t = 20, .bridge_b = 4, .seed = 2});
  for (std::int64_t i = 0; i < queries.count(); ++i) {
    const int T = i % 2 ? 50 : 400;
    const auto visited = check_trace(g, base, queries.row(i), {.k = 5, .max_visits = T}, i < 20);
    CHECK(visited <= T + g.params.degree + g.params.bridge_b);
  }
}

TEST_CASE("self queries find themselves") {
  const auto [base, unused] = make_sift_like({.base = 10000, .queries = 0, .dim = 32, .seed = 12});
  const auto g = build_index(base, {.m = 4, .n = 16, .degree = 12, .bridge_t = 50, .bridge_b = 5, .seed = 1});
  Searcher s;
  int hits = 0;
  for (int j = 0; j < 10000; j += 50) {
    const auto r = s.search_augmented(g, base, base.row(j), {.k = 1, .max_visits = 1000});
    hits += !r.empty() && r[0].dist == 0.0f && (r[0].id == j || base.row(r[0].id) == base.row(j));
  }
  CHECK(hits >= 190);
}

TEST_CASE("unbounded budget on a connected index is exact") {
  const auto ds = make_uniform(500, 8, 5);
  const auto g = build_index(ds, {.m = 2, .n = 8, .degree = 10, .bridge_t = 20, .bridge_b = 8, .seed = 3});
  REQUIRE(reachable_from_bridges(g).size() == 500);
  const auto queries = make_uniform(30, 8, 6);
  for (std::int64_t i = 0; i < queries.count(); ++i) {
    const auto got = search_augmented(g, ds, queries.row(i), {.k = 10, .max_visits = 500});
    CHECK(got == brute_force_knn(ds, queries.row(i), 10));
  }
}

TEST_CASE("accuracy is non-decreasing in T") {
  const auto [base, queries] = make_sift_like({.base = 4000, .queries = 40, .dim = 24, .seed = 3});
  const auto g = build_index(base, {.m = 2, .n = 16, .degree = 10, .bridge_t = 30, .bridge_b = 5, .seed = 4});
  const auto truth = exact_knn_batch(base, queries.data, 10);
  Searcher s;
  for (std::int64_t i = 0; i < queries.count(); ++i) {
    double prev = -1.0;
    for (int T : {1, 5, 20, 50, 100, 300, 1000, 4000}) {
      const auto r = s.search_augmented(g, base, queries.row(i), {.k = 10, .max_visits = T});
      const double acc = accuracy(ids_of(r), ids_of(truth[i]), 10);
      CHECK(acc >= prev);
      prev = acc;
    }
  }
}

TEST_CASE("heap work is O(T log T)") {
  const auto [base, queries] = make_sift_like({.base = 5000, .queries = 50, .dim = 32, .seed = 9});
  const auto g = build_index(base, {.m = 4, .n = 10, .degree = 20, .bridge_t = 100, .bridge_b = 5, .seed = 1});
  Searcher s;
  for (int T : {50, 200, 1000}) {
    for (std::int64_t i = 0; i < queries.count(); ++i) {
      DistanceCounter c;
      s.search_augmented(g, base, queries.row(i), {.k = 10, .max_visits = T}, &c);
      CHECK(static_cast<double>(c.heap_ops) <= 8.0 * T * std::log2(double(T)));
    }
  }
}

TEST_CASE("plain search from seeds") {
  RowMatrixXf rows(20, 2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  for (int i = 0; i < 20; ++i) rows.row(i) << uni(rng) + (i < 10 ? 0.0f : 100.0f), uni(rng);
  const Dataset base(rows, ElementKind::float32);
  const auto g = build_ngraph(base, 3);
  RowVectorXf q(2);
  q << 0.5f, 0.5f;

  const auto truth = brute_force_knn(base, q, 1);
  const std::int32_t seed[] = {truth[0].id};
  CHECK(search_plain(g, base, q, seed, {.k = 1, .max_visits = 1})[0].id == truth[0].id);

  // The far cluster has no edges into the near one; the result is exactly
  // the set reachable from the seed.
  std::set<std::int32_t> reach{3};
  for (bool grew = true; grew;) {
    grew = false;
    for (auto x : std::set<std::int32_t>(reach))
      for (auto y : g.neighbors(x)) grew |= reach.insert(y).second;
  }
  const std::int32_t near_seed[] = {3};
  const auto r = search_plain(g, base, q, near_seed, {.k = 15, .max_visits = 20});
  CHECK(r.size() == reach.size());
  for (const auto& n : r) {
    CHECK(n.id < 10);
    CHECK(reach.contains(n.id));
  }

  DistanceCounter c;
  const std::int32_t seeds[] = {0, 11, 12};
  search_plain(g, base, q, seeds, {.k = 3, .max_visits = 5}, &c);
  CHECK(c.full_dist_evals >= 3);
  CHECK(c.sub_dist_evals == 0);

  CHECK_THROWS_AS(search_plain(g, base, q, {}, {}), Error);
  const std::int32_t bad[] = {20};
  CHECK_THROWS_AS(search_plain(g, base, q, bad, {}), Error);
  CHECK_THROWS_AS(search_plain(g, base, RowVectorXf::Zero(3), seed, {}), Error);
}

TEST_CASE("search argument checks") {
  const auto ds = make_uniform(100, 4, 1);
  const auto g = build_index(ds, {.m = 2, .n = 4, .degree = 3, .bridge_t = 4, .bridge_b = 2});
  CHECK_THROWS_AS(search_augmented(g, ds, RowVectorXf::Zero(5), {}), Error);
  CHECK_THROWS_AS(search_augmented(g, ds, RowVectorXf::Zero(4), {.k = 0}), Error);
  CHECK_THROWS_AS(search_augmented(g, ds, RowVectorXf::Zero(4), {.max_visits = 0}), Error);
  CHECK(search_augmented(g, ds, RowVectorXf::Zero(4), {.k = 200, .max_visits = 1000}).size() <= 100);
}

TEST_CASE("accuracy definition") {
  const std::vector<std::int32_t> truth{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(accuracy(truth, truth, 10) == 1.0);
  CHECK(accuracy(std::vector<std::int32_t>{11, 12, 13}, truth, 3) == 0.0);
  CHECK(accuracy(std::vector<std::int32_t>{1, 2, 3, 4, 5, 6, 7, 20, 21, 22}, truth, 10) == doctest::Approx(0.7));
  CHECK(accuracy(std::vector<std::int32_t>{3, 1}, truth, 10) == doctest::Approx(0.2));
  CHECK_THROWS_AS(accuracy(truth, std::vector<std::int32_t>{1}, 2), Error);
}
