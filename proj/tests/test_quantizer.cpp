#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ang/quantizer.hpp"
#include "ang/synth.hpp"

using namespace ang;

namespace {

ProductQuantizer random_pq(int d, int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  auto layout = SubspaceLayout::contiguous(d, m);
  std::vector<RowMatrixXf> books;
  for (int i = 0; i < m; ++i) {
    RowMatrixXf b(n, layout.width(i));
    for (Eigen::Index j = 0; j < b.size(); ++j) b.data()[j] = g(rng);
    books.push_back(b);
  }
  return ProductQuantizer(layout, books, seed);
}

RowVectorXf random_vec(int d, std::mt19937_64& rng) {
  std::normal_distribution<float> g;
  RowVectorXf v(d);
  for (int j = 0; j < d; ++j) v[j] = g(rng);
  return v;
}

// All n^m codes in packed-id order.
std::vector<PQCode> all_codes(int m, int n) {
  std::vector<PQCode> out;
  PQCode c(static_cast<std::size_t>(m), 0);
  while (true) {
    out.push_back(c);
    int i = m - 1;
    while (i >= 0 && ++c[i] == n) c[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

double exact_dist(const RowVectorXf& a, const RowVectorXf& b) {
  return (a.cast<double>() - b.cast<double>()).squaredNorm();
}

}  // namespace

TEST_CASE("contiguous layout gives the extra dimensions to the first subspaces") {
  const auto l = SubspaceLayout::contiguous(10, 3);
  CHECK(l.dims() == std::vector<int>{4, 3, 3});
  CHECK(l.offset(2) == 7);
  CHECK(l.dim() == 10);
  CHECK_THROWS_AS(SubspaceLayout::contiguous(3, 4), Error);
}

TEST_CASE("separable data is recovered with zero quantization error") {
  // Every subspace takes exactly n = 3 distinct values.
  std::mt19937_64 rng(3);
  const float values[2][3] = {{0.0f, 10.0f, 20.0f}, {-5.0f, 1.0f, 7.0f}};
  RowMatrixXf data(90, 4);
  for (int i = 0; i < 90; ++i) {
    const int a = static_cast<int>(rng() % 3), b = static_cast<int>(rng() % 3);
    data.row(i) << values[0][a], values[0][a] + 1, values[1][b], values[1][b] * 2;
  }
  const auto pq = ProductQuantizer::train(data, {.m = 2, .n = 3, .seed = 1});
  for (int i = 0; i < 90; ++i) CHECK(sq_dist(pq.decode(pq.encode(data.row(i))), data.row(i)) == 0.0f);
}

TEST_CASE("encode picks the exact center and the zero center") {
  const auto pq = random_pq(6, 2, 5, 1);
  const PQCode code{3, 1};
  CHECK(pq.encode(pq.decode(code)) == code);

  auto layout = SubspaceLayout::contiguous(4, 2);
  RowMatrixXf b0(3, 2), b1(3, 2);
  b0 << 1, 1, 0, 0, 2, 2;
  b1 << 3, 3, 4, 4, 0, 0;
  const ProductQuantizer zpq(layout, {b0, b1}, 0);
  CHECK(zpq.encode(RowVectorXf::Zero(4)) == PQCode{1, 2});
}

TEST_CASE("encode is the global minimizer over all concatenations") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 3), n = 2 + static_cast<int>(rng() % 7);
    const int d = m + static_cast<int>(rng() % 6);
    const auto pq = random_pq(d, m, n, rng());
    const auto x = random_vec(d, rng);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : all_codes(m, n)) best = std::min(best, exact_dist(x, pq.decode(c)));
    CHECK(exact_dist(x, pq.decode(pq.encode(x))) <= best * (1 + 1e-5) + 1e-9);
  }
}

TEST_CASE("decode equals slice-and-concatenate") {
  std::mt19937_64 rng(8);
  const auto pq = random_pq(11, 3, 6, 2);
  for (int trial = 0; trial < 30; ++trial) {
    PQCode code(3);
    for (auto& k : code) k = static_cast<std::uint16_t>(rng() % 6);
    std::vector<float> manual;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < pq.codebook(i).cols(); ++j) manual.push_back(pq.codebook(i)(code[i], j));
    const auto v = pq.decode(code);
    REQUIRE(v.size() == 11);
    for (int j = 0; j < 11; ++j) CHECK(v[j] == manual[static_cast<std::size_t>(j)]);
    CHECK(pq.encode(v) == code);
  }
  CHECK(pq.decode(PQCode{0, 0, 0}).head(4) == pq.codebook(0).row(0));
  CHECK_THROWS_AS(pq.decode(PQCode{0, 6, 0}), Error);
  CHECK_THROWS_AS(pq.decode(PQCode{0, 0}), Error);
}

TEST_CASE("bridge id packing is a row-major bijection") {
  const auto pq = random_pq(6, 3, 7, 4);
  CHECK(pq.bridge_count() == 343);
  CHECK(pq.pack(PQCode{1, 2, 3}) == 1 * 49 + 2 * 7 + 3);
  for (BridgeId id = 0; id < pq.bridge_count(); ++id) CHECK(pq.pack(pq.unpack(id)) == id);
  CHECK_THROWS_AS(pq.unpack(343), Error);
}

TEST_CASE("distance tables decompose the full squared distance exactly") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 3), n = 2 + static_cast<int>(rng() % 7);
    const int d = m * (1 + static_cast<int>(rng() % 4));
    const auto pq = random_pq(d, m, n, rng());
    const auto q = random_vec(d, rng);
    DistanceCounter counter;
    const auto t = build_tables(pq, q, &counter);
    CHECK(counter.sub_dist_evals == static_cast<std::uint64_t>(m * n));
    CHECK(counter.full_dist_evals == 0);
    for (int i = 0; i < m; ++i) {
      for (int r = 1; r < n; ++r) CHECK(t.ranked(i, r - 1) <= t.ranked(i, r));
      std::vector<int> seen(static_cast<std::size_t>(n), 0);
      for (int r = 0; r < n; ++r) ++seen[t.order(i, r)];
      CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    }
    for (const auto& c : all_codes(m, n)) {
      const double full = exact_dist(q, pq.decode(c));
      CHECK(std::abs(asymmetric_distance(t, c) - full) <= 1e-5 * full + 1e-6);
    }
  }
}

TEST_CASE("tables for a decoded code have a zero at the code") {
  const auto pq = random_pq(8, 4, 5, 6);
  const PQCode code{4, 0, 2, 1};
  const auto t = build_tables(pq, pq.decode(code));
  for (int i = 0; i < 4; ++i) CHECK(t.table(i, code[i]) == 0.0f);
  CHECK(asymmetric_distance(t, code) == 0.0f);
}

TEST_CASE("m=3, n=100 tables cost 300 subvector evaluations for a million bridges") {
  const auto pq = random_pq(24, 3, 100, 1);
  CHECK(pq.bridge_count() == 1000000);
  DistanceCounter counter;
  std::mt19937_64 rng(2);
  build_tables(pq, random_vec(24, rng), &counter);
  CHECK(counter.sub_dist_evals == 300);
  CHECK(counter.full_dist_evals == 0);
}

TEST_CASE("asymmetric distance agrees with the decode oracle on random pairs") {
  std::mt19937_64 rng(99);
  const auto pq = random_pq(32, 4, 16, 7);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto q = random_vec(32, rng);
    PQCode code(4);
    for (auto& k : code) k = static_cast<std::uint16_t>(rng() % 16);
    const double full = exact_dist(q, pq.decode(code));
    worst = std::max(worst, std::abs(asymmetric_distance(build_tables(pq, q), code) - full) / full);
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("training validates its inputs and is deterministic") {
  const auto ds = make_uniform(100, 8, 3);
  CHECK_THROWS_AS(ProductQuantizer::train(ds, {.m = 2, .n = 101}), Error);
  CHECK_THROWS_AS(ProductQuantizer::train(ds, {.m = 2, .n = 1}), Error);
  CHECK_THROWS_AS(ProductQuantizer::train(ds, {.m = 9, .n = 4}), Error);
  const auto a = ProductQuantizer::train(ds, {.m = 3, .n = 4, .seed = 2});
  const auto b = ProductQuantizer::train(ds, {.m = 3, .n = 4, .seed = 2, .threads = 2});
  CHECK(a == b);
  CHECK(a.layout().dims() == std::vector<int>{3, 3, 2});
  CHECK_THROWS_AS(a.encode(RowVectorXf::Zero(7)), Error);
  CHECK_THROWS_AS(build_tables(a, RowVectorXf::Zero(9)), Error);

  RowMatrixXf b0(3, 4), b1(2, 4);
  b0.setZero();
  b1.setZero();
  CHECK_THROWS_AS(ProductQuantizer(SubspaceLayout::contiguous(8, 2), {b0, b1}, 0), Error);
}

TEST_CASE("distance_table is the unordered part of the tables") {
  std::mt19937_64 rng(31);
  const auto pq = random_pq(12, 3, 9, 5);
  const auto q = random_vec(12, rng);
  DistanceCounter counter;
  CHECK(distance_table(pq, q, &counter) == build_tables(pq, q).table);
  CHECK(counter.sub_dist_evals == 27);
}
