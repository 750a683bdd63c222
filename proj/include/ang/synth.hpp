#pragma once

#include <cstdint>
#include <utility>

#include "ang/vecstore.hpp"

namespace ang {

// Byte-valued vectors with SIFT-like statistics: a Gaussian mixture in a
// low-dimensional latent space, lifted by a random linear map plus isotropic
// noise and quantized to [0, 255]. Base and query sets share the mixture.
struct SynthParams {
  std::int64_t base = 100000;
  std::int64_t queries = 200;
  int dim = 128;
  int latent_dim = 16;
  int clusters = 64;
  float noise = 0.05f;
  float separation = 1.0f;  // std-dev of cluster means in latent units
  std::uint32_t seed = 0;
};

std::pair<Dataset, Dataset> make_sift_like(const SynthParams& params);

// i.i.d. uniform floats in [0, 1), for tests and small experiments.
Dataset make_uniform(std::int64_t count, int dim, std::uint64_t seed);

}  // namespace ang
