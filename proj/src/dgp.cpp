#include "crxo/dgp.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include <boost/math/distributions/poisson.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "crxo/errors.hpp"

namespace crxo {

void DgpSpec::check() const {
  if (subpopulations.empty()) throw ConfigError("DGP needs at least one subpopulation");
  double total = 0.0;
  for (const auto& s : subpopulations) {
    if (!(s.probability >= 0.0)) throw ConfigError("subpopulation probability must be >= 0");
    total += s.probability;
    for (double m : s.size.mean)
      if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("size means must be > 0");
    if (s.size.kind == SizeSpec::Kind::Fixed)
      for (double m : s.size.mean)
        if (m != std::floor(m)) throw ConfigError("fixed sizes must be integers");
    if (s.size.shared && s.size.mean[0] != s.size.mean[1])
      throw ConfigError("shared sizes need equal period means");
    if (s.size.kind == SizeSpec::Kind::PoissonTwoStage && (s.size.shared || s.size.mean[0] != s.size.mean[1]))
      throw ConfigError("two-stage sizes use one cluster mean and independent period draws");
    for (double d : s.effect)
      if (!std::isfinite(d)) throw ConfigError("effects must be finite");
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("subpopulation probabilities must sum to 1");
  // Generation tolerates a zero residual variance; model fitting does not.
  if (!(variance.tau2_alpha >= 0 && variance.tau2_gamma >= 0 && variance.sigma2_w >= 0))
    throw ConfigError("dgp variances must be non-negative");
}

bool DgpSpec::sizes_equal_within_clusters() const {
  for (const auto& s : subpopulations) {
    if (s.probability == 0.0) continue;
    if (s.size.kind == SizeSpec::Kind::Fixed && s.size.mean[0] == s.size.mean[1]) continue;
    if (s.size.kind == SizeSpec::Kind::Poisson && s.size.shared) continue;
    return false;
  }
  return true;
}

namespace {

// pmf of Poisson(mean) conditioned on k >= 1, truncated where negligible.
std::vector<std::pair<int, double>> positive_poisson(double mean) {
  boost::math::poisson_distribution<double> d(mean);
  const double p0 = boost::math::pdf(d, 0.0);
  std::vector<std::pair<int, double>> out;
  const int mode = int(std::floor(mean));
  int lo = 1, hi = std::max(1, mode);
  while (lo < mode && boost::math::pdf(d, double(lo)) < 1e-17) ++lo;
  while (boost::math::pdf(d, double(hi)) >= 1e-17 || hi <= mode) ++hi;
  double total = 0.0;
  for (int k = lo; k < hi; ++k) {
    double p = boost::math::pdf(d, double(k)) / (1.0 - p0);
    out.emplace_back(k, p);
    total += p;
  }
  for (auto& [k, p] : out) p /= total;
  return out;
}

}  // namespace

std::vector<SizePoint> size_support(const SizeSpec& spec) {
  std::vector<SizePoint> out;
  switch (spec.kind) {
    case SizeSpec::Kind::Fixed:
      out.push_back({int(spec.mean[0]), int(spec.mean[1]), 1.0});
      break;
    case SizeSpec::Kind::Poisson:
      if (spec.shared) {
        for (auto [k, p] : positive_poisson(spec.mean[0])) out.push_back({k, k, p});
      } else {
        auto a = positive_poisson(spec.mean[0]);
        auto b = positive_poisson(spec.mean[1]);
        for (auto [k1, p1] : a)
          for (auto [k2, p2] : b) out.push_back({k1, k2, p1 * p2});
      }
      break;
    case SizeSpec::Kind::PoissonTwoStage: {
      std::map<std::pair<int, int>, double> joint;
      for (auto [lam, pl] : positive_poisson(spec.mean[0])) {
        auto ks = positive_poisson(double(lam));
        for (auto [k1, p1] : ks)
          for (auto [k2, p2] : ks) joint[{k1, k2}] += pl * p1 * p2;
      }
      for (auto& [key, p] : joint) out.push_back({key.first, key.second, p});
      break;
    }
  }
  return out;
}

const std::vector<SizePoint>& cached_size_support(const SizeSpec& spec) {
  static std::mutex mu;
  static std::map<std::tuple<int, double, double, bool>, std::vector<SizePoint>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(int(spec.kind), spec.mean[0], spec.mean[1], spec.shared);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, size_support(spec)).first;
  return it->second;
}

namespace {

int positive_draw(double mean, Rng& rng) {
  boost::random::poisson_distribution<int, double> d(mean);
  int k = 0;
  do {
    k = d(rng);
  } while (k == 0);
  return k;
}

}  // namespace

std::array<int, 2> draw_sizes(const SizeSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case SizeSpec::Kind::Fixed:
      return {int(spec.mean[0]), int(spec.mean[1])};
    case SizeSpec::Kind::Poisson:
      if (spec.shared) {
        int k = positive_draw(spec.mean[0], rng);
        return {k, k};
      } else {
        int k1 = positive_draw(spec.mean[0], rng);
        int k2 = positive_draw(spec.mean[1], rng);
        return {k1, k2};
      }
    case SizeSpec::Kind::PoissonTwoStage: {
      int lam = positive_draw(spec.mean[0], rng);
      int k1 = positive_draw(double(lam), rng);
      int k2 = positive_draw(double(lam), rng);
      return {k1, k2};
    }
  }
  return {1, 1};
}

std::size_t draw_subpopulation(const DgpSpec& dgp, Rng& rng) {
  if (dgp.subpopulations.size() == 1) return 0;
  boost::random::uniform_01<double> u01;
  double u = u01(rng), acc = 0.0;
  for (std::size_t s = 0; s < dgp.subpopulations.size(); ++s) {
    acc += dgp.subpopulations[s].probability;
    if (u < acc) return s;
  }
  return dgp.subpopulations.size() - 1;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t r) {
  return splitmix64(splitmix64(master) ^ splitmix64(r + 0x632BE59BD9B4E019ULL));
}

}  // namespace crxo
