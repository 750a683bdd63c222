#include <doctest.h>

#include <limits>
#include <random>

#include "ang/kmeans.hpp"
#include "ang/quantizer.hpp"
#include "ang/synth.hpp"

using namespace ang;

namespace {

// Plain Lloyd in double precision from given initial centers.
double naive_lloyd_sse(const RowMatrixXf& pts, Eigen::MatrixXd centers, int iters) {
  const auto n = pts.rows();
  const auto k = centers.rows();
  std::vector<int> assign(static_cast<std::size_t>(n));
  auto nearest = [&](Eigen::Index i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = (pts.row(i).cast<double>() - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    return std::pair{arg, best};
  };
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) assign[i] = nearest(i).first;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += pts.row(i).cast<double>();
      ++counts[assign[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
  }
  double sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sse += nearest(i).second;
  return sse;
}

}  // namespace

TEST_CASE("per-subspace SSE matches an independent Lloyd run from the same seeding") {
  const auto ds = make_uniform(64, 4, 21);
  const PQTrainParams params{.m = 2, .n = 4, .seed = 9, .iters = 25};
  const auto pq = ProductQuantizer::train(ds, params);
  for (int i = 0; i < 2; ++i) {
    const RowMatrixXf sub = ds.data.middleCols(pq.layout().offset(i), pq.layout().width(i));
    const auto init = kmeanspp_init(sub, 4, derive_seed(params.seed, static_cast<std::uint64_t>(i)));
    const double oracle = naive_lloyd_sse(sub, init.cast<double>(), params.iters);
    const double ours = clustering_sse(sub, pq.codebook(i), assign_nearest(sub, pq.codebook(i)));
    CHECK(ours == doctest::Approx(oracle).epsilon(1e-4));
  }
}

TEST_CASE("Lloyd SSE never increases") {
  const auto [base, q] = make_sift_like({.base = 4000, .queries = 0, .dim = 24, .seed = 4});
  const auto res = kmeans(base.data, {.k = 40, .iters = 30, .seed = 3});
  REQUIRE(res.sse_history.size() >= 2);
  for (std::size_t i = 1; i < res.sse_history.size(); ++i)
    CHECK(res.sse_history[i] <= res.sse_history[i - 1] * (1.0 + 1e-6));
  CHECK(res.assignment == assign_nearest(base.data, res.centers));
}

TEST_CASE("kmeans is deterministic and needs at least k points") {
  const auto ds = make_uniform(300, 6, 1);
  const auto a = kmeans(ds.data, {.k = 8, .iters = 10, .seed = 5});
  const auto b = kmeans(ds.data, {.k = 8, .iters = 10, .seed = 5, .threads = 2});
  CHECK(a.centers == b.centers);
  CHECK(a.assignment == b.assignment);
  CHECK_THROWS_AS(kmeans(ds.data, {.k = 301}), Error);
}

TEST_CASE("empty clusters are repaired, not fatal") {
  // Two distinct values for three clusters: seeding must duplicate a center.
  RowMatrixXf pts(10, 1);
  pts << 0, 0, 0, 0, 0, 5, 5, 5, 5, 5;
  const auto res = kmeans(pts, {.k = 3, .iters = 5, .seed = 1});
  CHECK(res.repaired_clusters > 0);
  CHECK(res.sse_history.back() == 0.0);
}

TEST_CASE("assign_nearest breaks ties toward the smaller center") {
  RowMatrixXf pts(1, 1);
  pts << 0;
  RowMatrixXf centers(3, 1);
  centers << 1, -1, 1;
  CHECK(assign_nearest(pts, centers)[0] == 0);
}
