#include "ang/search.hpp"

#include <algorithm>

namespace ang {

namespace {

class MainQueue {
 public:
  explicit MainQueue(DistanceCounter* counter) : counter_(counter) {}

  void push(const QueueEntry& e) {
    heap_.push_back(e);
    std::push_heap(heap_.begin(), heap_.end(), later);
    if (counter_) ++counter_->heap_ops;
  }
  QueueEntry pop() {
    std::pop_heap(heap_.begin(), heap_.end(), later);
    const QueueEntry top = heap_.back();
    heap_.pop_back();
    if (counter_) ++counter_->heap_ops;
    return top;
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const std::vector<QueueEntry>& items() const { return heap_; }

 private:
  static bool later(const QueueEntry& a, const QueueEntry& b) { return b < a; }
  std::vector<QueueEntry> heap_;
  DistanceCounter* counter_;
};

// Fixed-capacity max-heap holding the k best (distance, id) pairs seen so far.
class ResultSet {
 public:
  ResultSet(int k, DistanceCounter* counter) : k_(static_cast<std::size_t>(k)), counter_(counter) {
    heap_.reserve(k_);
  }

  void add(const Neighbor& n) {
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end());
      if (counter_) ++counter_->heap_ops;
    } else if (n < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end());
      if (counter_) counter_->heap_ops += 2;
    }
  }
  NeighborList sorted() && {
    std::sort_heap(heap_.begin(), heap_.end());
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  NeighborList heap_;
  DistanceCounter* counter_;
};

void check_params(const SearchParams& params) {
  require(params.k >= 1, ErrorCode::invalid_argument, "search: k must be >= 1");
  require(params.max_visits >= 1, ErrorCode::invalid_argument, "search: T must be >= 1");
}

}  // namespace

void Searcher::begin(std::int64_t n) {
  if (static_cast<std::int64_t>(marks_.size()) != n) {
    marks_.assign(static_cast<std::size_t>(n), 0);
    epoch_ = 0;
  }
  if (++epoch_ == 0) {
    std::fill(marks_.begin(), marks_.end(), 0);
    epoch_ = 1;
  }
}

NeighborList Searcher::search_augmented(const AugmentedGraph& g, const Dataset& base, ConstVectorRef q,
                                        const SearchParams& params, DistanceCounter* counter,
                                        const SearchTrace* trace) {
  check_params(params);
  require(g.count > 0 && !base.empty(), ErrorCode::invalid_argument, "search: empty index");
  require(base.count() == g.count && base.dim() == g.dim, ErrorCode::invalid_argument,
          "search: base vectors do not match the index");
  require(q.size() == g.dim, ErrorCode::dimension_mismatch, "search: query dimension mismatch");
  begin(g.count);

  const auto tables = build_tables(g.pq, q, counter);
  MultiSequence stream(tables, counter);
  MainQueue queue(counter);
  ResultSet results(params.k, counter);
  if (const auto first = stream.next()) queue.push({first->dist, EntryKind::bridge, first->id});

  std::int64_t visited = 0;
  const bool tracing = trace && trace->on_step;
  SearchStep step;
  while (!queue.empty() && visited <= params.max_visits) {
    if (tracing) {
      step = SearchStep{};
      if (trace->snapshot_queue) step.queue_before = queue.items();
    }
    const QueueEntry top = queue.pop();
    auto discover_ref = [&](std::int32_t id) {
      if (!discover(id)) return;
      const float d = sq_dist_unchecked(base.row(id), q);
      if (counter) ++counter->full_dist_evals;
      queue.push({d, EntryKind::reference, static_cast<std::uint64_t>(id)});
      results.add({id, d});
      ++visited;
      if (tracing) step.discovered.push_back(id);
    };
    if (top.kind == EntryKind::reference) {
      for (std::int32_t id : g.ngraph.neighbors(static_cast<std::int64_t>(top.id))) discover_ref(id);
    } else {
      for (const auto& e : g.bgraph.lookup(top.id)) discover_ref(e.id);
      if (const auto next = stream.next()) {
        queue.push({next->dist, EntryKind::bridge, next->id});
        if (tracing) step.next_bridge = next;
      }
    }
    if (tracing) {
      step.popped = top;
      step.queue_size = queue.size();
      step.visited = visited;
      if (trace->snapshot_queue) step.queue_after = queue.items();
      trace->on_step(step);
    }
  }
  return std::move(results).sorted();
}

NeighborList Searcher::search_plain(const NeighborhoodGraph& g, const Dataset& base, ConstVectorRef q,
                                    std::span<const std::int32_t> seeds, const SearchParams& params,
                                    DistanceCounter* counter, const SearchTrace* trace) {
  check_params(params);
  require(g.size() > 0 && !base.empty(), ErrorCode::invalid_argument, "search: empty index");
  require(base.count() == g.size(), ErrorCode::invalid_argument, "search: base vectors do not match the graph");
  require(q.size() == base.dim(), ErrorCode::dimension_mismatch, "search: query dimension mismatch");
  require(!seeds.empty(), ErrorCode::invalid_argument, "search_plain: at least one seed required");
  for (auto s : seeds) require(s >= 0 && s < g.size(), ErrorCode::invalid_argument, "search_plain: seed out of range");
  begin(g.size());

  MainQueue queue(counter);
  ResultSet results(params.k, counter);
  std::int64_t visited = 0;
  const bool tracing = trace && trace->on_step;
  SearchStep step;
  auto discover_ref = [&](std::int32_t id) {
    if (!discover(id)) return;
    const float d = sq_dist_unchecked(base.row(id), q);
    if (counter) ++counter->full_dist_evals;
    queue.push({d, EntryKind::reference, static_cast<std::uint64_t>(id)});
    results.add({id, d});
    ++visited;
    if (tracing) step.discovered.push_back(id);
  };
  for (auto s : seeds) discover_ref(s);

  while (!queue.empty() && visited <= params.max_visits) {
    if (tracing) {
      step = SearchStep{};
      if (trace->snapshot_queue) step.queue_before = queue.items();
    }
    const QueueEntry top = queue.pop();
    for (std::int32_t id : g.neighbors(static_cast<std::int64_t>(top.id))) discover_ref(id);
    if (tracing) {
      step.popped = top;
      step.queue_size = queue.size();
      step.visited = visited;
      if (trace->snapshot_queue) step.queue_after = queue.items();
      trace->on_step(step);
    }
  }
  return std::move(results).sorted();
}

NeighborList search_augmented(const AugmentedGraph& g, const Dataset& base, ConstVectorRef q,
                              const SearchParams& params, DistanceCounter* counter) {
  Searcher s;
  return s.search_augmented(g, base, q, params, counter);
}

NeighborList search_plain(const NeighborhoodGraph& g, const Dataset& base, ConstVectorRef q,
                          std::span<const std::int32_t> seeds, const SearchParams& params,
                          DistanceCounter* counter) {
  Searcher s;
  return s.search_plain(g, base, q, seeds, params, counter);
}

double accuracy(std::span<const std::int32_t> result, std::span<const std::int32_t> truth, int k) {
  require(k >= 1, ErrorCode::invalid_argument, "accuracy: k must be >= 1");
  require(truth.size() >= static_cast<std::size_t>(k), ErrorCode::invalid_argument,
          "accuracy: truth list shorter than k");
  std::vector<std::int32_t> want(truth.begin(), truth.begin() + k);
  std::sort(want.begin(), want.end());
  const std::size_t take = std::min(result.size(), static_cast<std::size_t>(k));
  std::vector<std::int32_t> got(result.begin(), result.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(got.begin(), got.end());
  got.erase(std::unique(got.begin(), got.end()), got.end());
  std::vector<std::int32_t> common;
  std::set_intersection(want.begin(), want.end(), got.begin(), got.end(), std::back_inserter(common));
  return double(common.size()) / k;
}

}  // namespace ang
