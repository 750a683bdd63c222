#include "ang/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ang {

std::pair<Dataset, Dataset> make_sift_like(const SynthParams& p) {
  require(p.base >= 0 && p.queries >= 0 && p.dim >= 1 && p.latent_dim >= 1 && p.clusters >= 1 &&
              p.separation >= 0.0f && p.noise >= 0.0f,
          ErrorCode::invalid_argument, "make_sift_like: bad parameters");
  std::mt19937_64 rng(derive_seed(p.seed, 0x51F7));
  std::normal_distribution<float> gauss(0.0f, 1.0f);

  Eigen::MatrixXf lift(p.dim, p.latent_dim);
  for (Eigen::Index i = 0; i < lift.size(); ++i) lift.data()[i] = gauss(rng) / std::sqrt(float(p.latent_dim));
  Eigen::MatrixXf means(p.latent_dim, p.clusters);
  for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = p.separation * gauss(rng);
  std::vector<float> spread(static_cast<std::size_t>(p.clusters));
  std::uniform_real_distribution<float> uni(0.4f, 1.0f);
  for (auto& s : spread) s = uni(rng);
  std::uniform_int_distribution<int> pick(0, p.clusters - 1);

  const std::int64_t total = p.base + p.queries;
  RowMatrixXf all(total, p.dim);
  Eigen::VectorXf z(p.latent_dim);
  for (std::int64_t i = 0; i < total; ++i) {
    const int c = pick(rng);
    for (int j = 0; j < p.latent_dim; ++j) z[j] = means(j, c) + spread[static_cast<std::size_t>(c)] * gauss(rng);
    const Eigen::VectorXf y = lift * z;
    for (int j = 0; j < p.dim; ++j) {
      const float v = 40.0f + 30.0f * (y[j] + p.noise * gauss(rng));
      all(i, j) = std::clamp(std::round(v), 0.0f, 255.0f);
    }
  }
  Dataset base(all.topRows(p.base), ElementKind::uint8);
  Dataset queries(all.bottomRows(p.queries), ElementKind::uint8);
  return {std::move(base), std::move(queries)};
}

Dataset make_uniform(std::int64_t count, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  RowMatrixXf data(count, dim);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = uni(rng);
  return Dataset(std::move(data), ElementKind::float32);
}

}  // namespace ang
