#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

#include "crxo/model_spec.hpp"

namespace crxo {

using Rng = boost::random::mt19937_64;

struct SizeSpec {
  enum class Kind { Fixed, Poisson, PoissonTwoStage } kind = Kind::Poisson;
  std::array<double, 2> mean{20, 20};  // per period; fixed sizes are the means
  bool shared = true;                  // one draw used for both periods
};

struct Subpopulation {
  double probability = 1.0;
  std::array<double, 2> effect{0.0, 0.0};  // treatment effect per period
  SizeSpec size;
};

struct DgpSpec {
  std::vector<Subpopulation> subpopulations;
  std::array<double, 2> period_effects{1.0, 0.5};
  VarianceComponents variance{0.053, 0.013, 1.0};

  void check() const;  // throws ConfigError
  // True when every draw has K_i1 = K_i2.
  bool sizes_equal_within_clusters() const;
};

// One point of the joint (K_i1, K_i2) distribution.
struct SizePoint {
  int k1 = 1, k2 = 1;
  double prob = 1.0;
};

// Exact support after the zero-resampling rule (conditioning on K >= 1);
// Poisson tails below 1e-17 are dropped and the rest renormalised.
std::vector<SizePoint> size_support(const SizeSpec& spec);
const std::vector<SizePoint>& cached_size_support(const SizeSpec& spec);

std::array<int, 2> draw_sizes(const SizeSpec& spec, Rng& rng);
std::size_t draw_subpopulation(const DgpSpec& dgp, Rng& rng);

// Independent stream for counter r under a master seed.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t r);

}  // namespace crxo
