#include "ang/multiseq.hpp"

#include <algorithm>
#include <limits>

namespace ang {

MultiSequence::MultiSequence(const DistanceTables& tables, DistanceCounter* counter)
    : tables_(&tables), counter_(counter), m_(tables.m()), n_(static_cast<std::uint64_t>(tables.n())) {
  require(m_ >= 1 && n_ >= 1, ErrorCode::invalid_argument, "multi-sequence needs non-empty rows");
  stride_.assign(static_cast<std::size_t>(m_), 1);
  for (int i = m_ - 2; i >= 0; --i) {
    require(stride_[i + 1] <= std::numeric_limits<std::uint64_t>::max() / n_, ErrorCode::invalid_argument,
            "n^m overflows 64-bit rank tuples");
    stride_[i] = stride_[i + 1] * n_;
  }
  require(stride_[0] <= std::numeric_limits<std::uint64_t>::max() / n_, ErrorCode::invalid_argument,
          "n^m overflows 64-bit rank tuples");
  last_ranks_.assign(static_cast<std::size_t>(m_), 0);
  scratch_.assign(static_cast<std::size_t>(m_), 0);
  push(0, key_of(scratch_));
}

float MultiSequence::key_of(const std::vector<int>& ranks) const {
  float sum = 0.0f;
  for (int i = 0; i < m_; ++i) sum += tables_->ranked(i, ranks[i]);
  return sum;
}

void MultiSequence::push(std::uint64_t packed, float key) {
  pushed_.insert(packed);
  heap_.push_back({key, packed});
  std::push_heap(heap_.begin(), heap_.end(), later);
  if (counter_) ++counter_->heap_ops;
}

std::optional<BridgeHit> MultiSequence::next() {
  if (heap_.empty()) return std::nullopt;
  std::pop_heap(heap_.begin(), heap_.end(), later);
  const Candidate top = heap_.back();
  heap_.pop_back();
  if (counter_) ++counter_->heap_ops;
  ++extracted_;

  std::uint64_t rest = top.ranks;
  BridgeId id = 0;
  for (int i = 0; i < m_; ++i) {
    last_ranks_[i] = static_cast<int>(rest / stride_[i]);
    rest %= stride_[i];
    id = id * n_ + tables_->order(i, last_ranks_[i]);
  }

  // Successor along each axis; pushed once every predecessor of it is in.
  for (int i = 0; i < m_; ++i) {
    if (static_cast<std::uint64_t>(last_ranks_[i]) + 1 >= n_) continue;
    const std::uint64_t succ = top.ranks + stride_[i];
    if (pushed_.contains(succ)) continue;
    bool ready = true;
    for (int j = 0; j < m_ && ready; ++j) {
      if (j == i || last_ranks_[j] == 0) continue;
      ready = pushed_.contains(succ - stride_[j]);
    }
    if (!ready) continue;
    scratch_ = last_ranks_;
    ++scratch_[i];
    push(succ, key_of(scratch_));
  }
  return BridgeHit{id, top.key};
}

}  // namespace ang
