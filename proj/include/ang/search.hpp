#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ang/graph.hpp"
#include "ang/multiseq.hpp"

namespace ang {

struct SearchParams {
  int k = 1;
  int max_visits = 100;  // T: the search stops once more than T references were discovered
};

enum class EntryKind : std::uint8_t { bridge = 0, reference = 1 };

struct QueueEntry {
  float key = 0.0f;
  EntryKind kind = EntryKind::reference;
  std::uint64_t id = 0;

  // Smaller key first; on equal keys bridges before references, then smaller id.
  friend bool operator<(const QueueEntry& a, const QueueEntry& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.id < b.id;
  }
  friend bool operator==(const QueueEntry&, const QueueEntry&) = default;
};

// One iteration of the main loop, reported to a SearchTrace.
struct SearchStep {
  QueueEntry popped;
  std::vector<QueueEntry> queue_before;  // only filled when SearchTrace::snapshot_queue
  std::vector<QueueEntry> queue_after;   // likewise
  std::vector<std::int32_t> discovered;  // references distance-evaluated in this step
  std::optional<BridgeHit> next_bridge;  // bridge pushed after popping a bridge
  std::size_t queue_size = 0;            // after the step
  std::int64_t visited = 0;              // t after the step
};

struct SearchTrace {
  bool snapshot_queue = false;
  std::function<void(const SearchStep&)> on_step;
};

// Per-thread query workspace. Visited marks use an epoch counter so nothing is
// cleared between queries. Not safe to share between concurrent queries.
class Searcher {
 public:
  // Best-first search over the augmented graph with one bridge vector in the
  // main queue at a time; the next bridge is extracted when one is popped.
  NeighborList search_augmented(const AugmentedGraph& g, const Dataset& base, ConstVectorRef q,
                                const SearchParams& params, DistanceCounter* counter = nullptr,
                                const SearchTrace* trace = nullptr);

  // Best-first search over the neighborhood graph from explicit seeds.
  NeighborList search_plain(const NeighborhoodGraph& g, const Dataset& base, ConstVectorRef q,
                            std::span<const std::int32_t> seeds, const SearchParams& params,
                            DistanceCounter* counter = nullptr, const SearchTrace* trace = nullptr);

 private:
  void begin(std::int64_t n);
  bool discover(std::int32_t id) {
    if (marks_[id] == epoch_) return false;
    marks_[id] = epoch_;
    return true;
  }

  std::vector<std::uint32_t> marks_;
  std::uint32_t epoch_ = 0;
};

NeighborList search_augmented(const AugmentedGraph& g, const Dataset& base, ConstVectorRef q,
                              const SearchParams& params, DistanceCounter* counter = nullptr);

NeighborList search_plain(const NeighborhoodGraph& g, const Dataset& base, ConstVectorRef q,
                          std::span<const std::int32_t> seeds, const SearchParams& params,
                          DistanceCounter* counter = nullptr);

// |first k of result ∩ first k of truth| / k
double accuracy(std::span<const std::int32_t> result, std::span<const std::int32_t> truth, int k);

}  // namespace ang
