#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ang/graph.hpp"
#include "ang/quantizer.hpp"
#include "ang/search.hpp"

namespace ang {

struct IvfBuildParams {
  int lists = 1024;  // K coarse centers
  // Augmented graph over the coarse centers.
  BuildParams coarse{.m = 2, .n = 32, .degree = 20, .bridge_t = 100, .bridge_b = 5};
  int residual_m = 8;
  int residual_n = 256;
  std::uint32_t seed = 0;
  int kmeans_iters = 25;
  int assign_budget = 64;  // T used when assigning a vector to its nearest center
  std::int64_t max_train = 65536;  // residual quantizer training sample
  int threads = 0;
};

struct RerankParams {
  int probes = 16;     // inverted lists visited
  int list_len = 1000; // L: candidates kept by asymmetric distance for exact re-ranking
  int probe_budget = 0;  // T for finding the nearest lists; 0 means max(assign_budget, 4 * probes)
};

// Inverted file over K coarse centers. The nearest lists are located by
// searching an augmented graph over the centers; members carry residual PQ
// codes (x - center) shared across lists.
struct CoarseIndex {
  int dim = 0;
  std::int64_t count = 0;
  ElementKind kind = ElementKind::float32;
  std::uint32_t seed = 0;
  int assign_budget = 64;
  Dataset centers;
  AugmentedGraph center_graph;
  ProductQuantizer residual_pq;
  std::vector<std::vector<std::int32_t>> list_ids;
  std::vector<std::vector<std::uint16_t>> list_codes;  // residual_pq.m() entries per member

  // Assignments where the graph search found no center and a full scan was used.
  std::int64_t assign_fallbacks = 0;

  int lists() const { return static_cast<int>(list_ids.size()); }
  std::size_t code_bytes() const { return static_cast<std::size_t>(residual_pq.m()) * (residual_pq.n() <= 256 ? 1 : 2); }
};

CoarseIndex build_ivf(const Dataset& ds, const IvfBuildParams& params);

struct IvfSearchInfo {
  std::int64_t candidates = 0;      // list members scored by asymmetric distance
  std::int64_t probe_fallbacks = 0; // probed lists filled in by a center scan
};

// Probe the nearest lists, keep the list_len best candidates by asymmetric
// distance, re-rank them with exact distances and return the first k.
NeighborList search_ivf(const CoarseIndex& ix, const Dataset& base, ConstVectorRef q, const RerankParams& rerank,
                        int k, DistanceCounter* counter = nullptr, IvfSearchInfo* info = nullptr);

// 1 if true_nn is among the first T ids of result.
int recall_at(std::span<const std::int32_t> result, std::int32_t true_nn, int T);

// IVF index file: magic "ANNV", version 1, little-endian, embeds an ANNB block.
void save_ivf(const CoarseIndex& ix, const std::filesystem::path& path);
CoarseIndex load_ivf(const std::filesystem::path& path);

}  // namespace ang
