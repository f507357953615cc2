#include "crxo/plim.hpp"

#include <Eigen/Dense>

#include "crxo/cells.hpp"
#include "crxo/errors.hpp"
#include "crxo/gls_detail.hpp"

namespace crxo {

namespace {

struct Accumulator {
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  Eigen::Vector3d h = Eigen::Vector3d::Zero();
};

}  // namespace

double probability_limit(const ModelSpec& spec, const DgpSpec& dgp, const VarianceComponents& vc,
                         std::size_t draws, std::uint64_t seed) {
  dgp.check();
  vc.check();
  if (auto why = inadmissibility(spec, dgp.sizes_equal_within_clusters())) throw InadmissibleError(*why);
  VarianceComponents use = vc;
  if (spec.structure == Structure::EME) use.tau2_gamma = 0.0;

  // Points (subpopulation, k1, k2, probability).
  struct Pt {
    std::size_t u;
    double k1, k2, prob;
  };
  std::vector<Pt> pts;
  if (draws == 0) {
    for (std::size_t u = 0; u < dgp.subpopulations.size(); ++u) {
      const auto& s = dgp.subpopulations[u];
      if (s.probability == 0.0) continue;
      for (const auto& p : cached_size_support(s.size))
        pts.push_back({u, double(p.k1), double(p.k2), s.probability * p.prob});
    }
  } else {
    Rng rng(seed);
    pts.reserve(draws);
    for (std::size_t r = 0; r < draws; ++r) {
      auto u = draw_subpopulation(dgp, rng);
      auto k = draw_sizes(dgp.subpopulations[u].size, rng);
      pts.push_back({u, double(k[0]), double(k[1]), 1.0 / double(draws)});
    }
  }
  std::array<double, 2> ek{0, 0};
  for (const auto& p : pts) {
    ek[0] += p.prob * p.k1;
    ek[1] += p.prob * p.k2;
  }

  const bool fe = spec.structure == Structure::FE;
  Accumulator acc;
  for (const auto& p : pts) {
    const auto& s = dgp.subpopulations[p.u];
    for (int seq = 0; seq < 2; ++seq) {
      ClusterCells c;
      c.sequence = seq;
      c.k = {p.k1, p.k2};
      for (int j = 0; j < 2; ++j)
        c.sum[j] = c.k[j] * (dgp.period_effects[j] + c.treated(j) * s.effect[j]);
      std::array<double, 2> omega{1, 1};
      double w = 1.0;
      switch (spec.weighting) {
        case Weighting::None: break;
        case Weighting::ClusterPeriod: omega = c.k; w = c.k[0]; break;
        case Weighting::Cluster: omega = {c.n(), c.n()}; w = c.n(); break;
        case Weighting::Period: omega = ek; w = ek[0]; break;
      }
      auto q = spec.mixed() ? ClusterPrecision::mixed(c.k, use, w) : ClusterPrecision::independence(c.k, omega);
      auto ls = detail::local_system(c, q, spec.structure);
      const double wt = 0.5 * p.prob;
      if (fe) {
        auto red = detail::eliminate_cluster_effect(ls);
        acc.g.topLeftCorner<2, 2>() += wt * red.g;
        acc.h.head<2>() += wt * red.h;
      } else {
        acc.g += wt * ls.g;
        acc.h += wt * ls.h;
      }
    }
  }
  if (fe) {
    Eigen::Matrix2d g = acc.g.topLeftCorner<2, 2>();
    Eigen::Vector2d h = acc.h.head<2>();
    return g.ldlt().solve(h)[0];
  }
  return acc.g.ldlt().solve(acc.h)[0];
}

}  // namespace crxo
