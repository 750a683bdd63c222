#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "ang/quantizer.hpp"
#include "ang/vecstore.hpp"

namespace ang {

// Exact R-NN graph: row i lists the R nearest other references, ascending.
struct NeighborhoodGraph {
  RowMatrixXi ids;
  RowMatrixXf dists;

  int degree() const { return static_cast<int>(ids.cols()); }
  std::int64_t size() const { return ids.rows(); }
  std::span<const std::int32_t> neighbors(std::int64_t i) const {
    return {ids.row(i).data(), static_cast<std::size_t>(ids.cols())};
  }
  friend bool operator==(const NeighborhoodGraph& a, const NeighborhoodGraph& b) {
    return a.ids == b.ids && a.dists == b.dists;
  }
};

// Sparse bridge id -> reference list, stored CSR with bridge ids ascending.
// Only bridges with at least one reference are present.
class BridgeGraph {
 public:
  BridgeGraph() = default;
  BridgeGraph(std::vector<BridgeId> bridges, std::vector<std::uint32_t> offsets, std::vector<Neighbor> entries);

  std::size_t size() const { return bridges_.size(); }
  std::size_t entry_count() const { return entries_.size(); }
  BridgeId bridge(std::size_t slot) const { return bridges_[slot]; }
  std::span<const Neighbor> list(std::size_t slot) const {
    return {entries_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  // Empty span when the bridge has no references.
  std::span<const Neighbor> lookup(BridgeId id) const;

  const std::vector<BridgeId>& bridges() const { return bridges_; }
  const std::vector<std::uint32_t>& offsets() const { return offsets_; }
  const std::vector<Neighbor>& entries() const { return entries_; }

  friend bool operator==(const BridgeGraph& a, const BridgeGraph& b) {
    return a.bridges_ == b.bridges_ && a.offsets_ == b.offsets_ && a.entries_ == b.entries_;
  }

 private:
  std::vector<BridgeId> bridges_;
  std::vector<std::uint32_t> offsets_;
  std::vector<Neighbor> entries_;
  std::unordered_map<BridgeId, std::uint32_t> slot_;
};

struct BuildParams {
  int m = 4;           // partitions
  int n = 50;          // clusters per partition
  int degree = 20;     // R
  int bridge_t = 100;  // nearest bridges taken per reference
  int bridge_b = 5;    // references kept per bridge
  std::uint32_t seed = 0;
  int kmeans_iters = 25;
  int threads = 0;

  friend bool operator==(const BuildParams&, const BuildParams&) = default;
};

struct GraphStats {
  std::int64_t covered_refs = 0;  // distinct references reachable from some bridge
  double alpha_mean = 0.0;        // mean list length over stored bridges
  double alpha_over_b = 0.0;      // alpha_mean / b
  double covered_over_bridges = 0.0;  // covered_refs / n^m

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

struct AugmentedGraph {
  BuildParams params;
  int dim = 0;
  std::int64_t count = 0;
  ElementKind kind = ElementKind::float32;
  ProductQuantizer pq;
  NeighborhoodGraph ngraph;
  BridgeGraph bgraph;
  GraphStats stats;

  friend bool operator==(const AugmentedGraph& a, const AugmentedGraph& b) {
    return a.params.m == b.params.m && a.params.n == b.params.n && a.params.degree == b.params.degree &&
           a.params.bridge_t == b.params.bridge_t && a.params.bridge_b == b.params.bridge_b &&
           a.params.seed == b.params.seed && a.dim == b.dim && a.count == b.count && a.kind == b.kind &&
           a.pq == b.pq && a.ngraph == b.ngraph && a.bgraph == b.bgraph && a.stats == b.stats;
  }
};

NeighborhoodGraph build_ngraph(const Dataset& ds, int degree, int threads = 0);

// For every reference, streams its t nearest bridges; each bridge then keeps
// the b nearest of the references that listed it, ties to the smaller id.
BridgeGraph build_bgraph(const Dataset& ds, const ProductQuantizer& pq, int t, int b, int threads = 0);

GraphStats compute_stats(const BridgeGraph& bgraph, int b, std::uint64_t bridge_count);

AugmentedGraph build_index(const Dataset& ds, const BuildParams& params);

// Index file: magic "ANNB", version 1, little-endian.
void write_index(const AugmentedGraph& g, std::ostream& out);
AugmentedGraph read_index(std::istream& in);
void save_index(const AugmentedGraph& g, const std::filesystem::path& path);
AugmentedGraph load_index(const std::filesystem::path& path);

// Byte size write_index produces, from the layout alone.
std::uint64_t index_layout_size(const AugmentedGraph& g);

}  // namespace ang
