#pragma once

#include <cstdint>
#include <vector>

#include "ang/types.hpp"

namespace ang {

struct KMeansParams {
  int k = 0;
  int iters = 25;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct KMeansResult {
  RowMatrixXf centers;
  std::vector<std::int32_t> assignment;
  // SSE after every assignment step; non-increasing.
  std::vector<double> sse_history;
  int iterations = 0;
  int repaired_clusters = 0;
};

// k-means++ seeding: first center uniform, each next one sampled with
// probability proportional to the squared distance to the nearest chosen center.
RowMatrixXf kmeanspp_init(const RowMatrixXf& points, int k, std::uint64_t seed);

// Nearest center per point, ties to the smaller center index.
std::vector<std::int32_t> assign_nearest(const RowMatrixXf& points, const RowMatrixXf& centers, int threads = 0);

// Lloyd iterations from kmeanspp_init. An empty cluster is re-seeded at the
// member of the largest cluster farthest from that cluster's center.
KMeansResult kmeans(const RowMatrixXf& points, const KMeansParams& params);

double clustering_sse(const RowMatrixXf& points, const RowMatrixXf& centers,
                      const std::vector<std::int32_t>& assignment);

}  // namespace ang
