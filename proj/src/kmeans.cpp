#include "ang/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "ang/vecstore.hpp"
#include "parallel.hpp"

namespace ang {

RowMatrixXf kmeanspp_init(const RowMatrixXf& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  require(k >= 1 && k <= n, ErrorCode::invalid_argument,
          "kmeans: need at least k=" + std::to_string(k) + " points, have " + std::to_string(n));
  std::mt19937_64 rng(seed);
  RowMatrixXf centers(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));

  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) nearest[i] = sq_dist_unchecked(points.row(i), centers.row(0));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : nearest) total += v;
    Eigen::Index chosen = n - 1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > target && nearest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      nearest[i] = std::min<double>(nearest[i], sq_dist_unchecked(points.row(i), centers.row(c)));
  }
  return centers;
}

std::vector<std::int32_t> assign_nearest(const RowMatrixXf& points, const RowMatrixXf& centers, int threads) {
  require(points.cols() == centers.cols(), ErrorCode::dimension_mismatch, "assign_nearest: dimension mismatch");
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centers.rows();
  const Eigen::VectorXf cnorms = centers.rowwise().squaredNorm();
  const float cmax = k > 0 ? cnorms.maxCoeff() : 0.0f;
  const double gamma = 2.0 * (points.cols() + 4) / double(1 << 24);
  std::vector<std::int32_t> out(static_cast<std::size_t>(n));

  constexpr Eigen::Index kBlock = 512;
  const Eigen::Index nblocks = (n + kBlock - 1) / kBlock;
  parallel_for(nblocks, threads, [&](std::int64_t blk) {
    const Eigen::Index p0 = blk * kBlock;
    const Eigen::Index pn = std::min(kBlock, n - p0);
    const auto block = points.middleRows(p0, pn);
    const Eigen::VectorXf pnorms = block.rowwise().squaredNorm();
    const RowMatrixXf gram = block * centers.transpose();
    for (Eigen::Index i = 0; i < pn; ++i) {
      const float* g = gram.row(i).data();
      float best_approx = std::numeric_limits<float>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) best_approx = std::min(best_approx, cnorms[c] - 2.0f * g[c]);
      // Re-score every center whose approximation is within the rounding
      // bound of the best one; the winner is exact under sq_dist.
      const double slack = 2.0 * gamma * (double(pnorms[i]) + cmax) + 1e-30;
      float best = std::numeric_limits<float>::infinity();
      std::int32_t arg = 0;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (cnorms[c] - 2.0f * g[c] > best_approx + slack) continue;
        const float d = sq_dist_unchecked(block.row(i), centers.row(c));
        if (d < best) {
          best = d;
          arg = static_cast<std::int32_t>(c);
        }
      }
      out[static_cast<std::size_t>(p0 + i)] = arg;
    }
  });
  return out;
}

double clustering_sse(const RowMatrixXf& points, const RowMatrixXf& centers,
                      const std::vector<std::int32_t>& assignment) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    sse += sq_dist_unchecked(points.row(i), centers.row(assignment[static_cast<std::size_t>(i)]));
  return sse;
}

namespace {

int repair_empty(const RowMatrixXf& points, RowMatrixXf& centers, std::vector<std::int32_t>& assignment,
                 std::vector<std::int64_t>& counts) {
  int repaired = 0;
  const auto k = static_cast<std::int32_t>(centers.rows());
  for (std::int32_t c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    const auto largest = static_cast<std::int32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    Eigen::Index far = -1;
    float far_dist = -1.0f;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (assignment[static_cast<std::size_t>(i)] != largest) continue;
      const float d = sq_dist_unchecked(points.row(i), centers.row(largest));
      if (d > far_dist) {
        far_dist = d;
        far = i;
      }
    }
    centers.row(c) = points.row(far);
    assignment[static_cast<std::size_t>(far)] = c;
    --counts[largest];
    ++counts[c];
    ++repaired;
  }
  return repaired;
}

}  // namespace

KMeansResult kmeans(const RowMatrixXf& points, const KMeansParams& params) {
  require(params.k >= 1, ErrorCode::invalid_argument, "kmeans: k must be positive");
  require(params.iters >= 0, ErrorCode::invalid_argument, "kmeans: iters must be non-negative");
  KMeansResult res;
  res.centers = kmeanspp_init(points, params.k, params.seed);
  const Eigen::Index dim = points.cols();

  for (int it = 0;; ++it) {
    auto assignment = assign_nearest(points, res.centers, params.threads);
    const bool unchanged = it > 0 && assignment == res.assignment;
    res.assignment = std::move(assignment);
    res.sse_history.push_back(clustering_sse(points, res.centers, res.assignment));
    res.iterations = it;
    if (it == params.iters || unchanged) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(params.k, dim);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(params.k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const auto c = res.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i).cast<double>();
      ++counts[c];
    }
    for (int c = 0; c < params.k; ++c)
      if (counts[c] > 0) res.centers.row(c) = (sums.row(c) / static_cast<double>(counts[c])).cast<float>();
    res.repaired_clusters += repair_empty(points, res.centers, res.assignment, counts);
  }
  return res;
}

}  // namespace ang
