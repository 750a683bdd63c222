#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "ang/quantizer.hpp"

namespace ang {

struct BridgeHit {
  BridgeId id = 0;
  float dist = 0.0f;
};

// Lazy enumeration of all rank tuples over sorted rows in non-decreasing
// order of their summed values (the multi-sequence algorithm). Equal sums come
// out in lexicographic order of the rank tuple. A tuple enters the queue once
// all of its immediate predecessors have been pushed.
//
// The tables must outlive the enumerator.
class MultiSequence {
 public:
  explicit MultiSequence(const DistanceTables& tables, DistanceCounter* counter = nullptr);

  // Next bridge in order, or nullopt after all n^m have been emitted.
  std::optional<BridgeHit> next();

  // 0-based ranks of the tuple returned by the last next().
  const std::vector<int>& last_ranks() const { return last_ranks_; }
  std::uint64_t extracted() const { return extracted_; }
  std::size_t queue_size() const { return heap_.size(); }

 private:
  struct Candidate {
    float key;
    std::uint64_t ranks;  // rank tuple packed row-major, so integer order is lexicographic
  };
  static bool later(const Candidate& a, const Candidate& b) {
    return a.key > b.key || (a.key == b.key && a.ranks > b.ranks);
  }

  float key_of(const std::vector<int>& ranks) const;
  void push(std::uint64_t packed, float key);

  const DistanceTables* tables_;
  DistanceCounter* counter_;
  int m_;
  std::uint64_t n_;
  std::vector<std::uint64_t> stride_;
  std::vector<Candidate> heap_;
  std::unordered_set<std::uint64_t> pushed_;
  std::vector<int> last_ranks_;
  std::vector<int> scratch_;
  std::uint64_t extracted_ = 0;
};

}  // namespace ang
