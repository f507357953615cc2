#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "crxo/cells.hpp"
#include "crxo/errors.hpp"
#include "crxo/reml.hpp"
#include "crxo/simulation.hpp"
#include "test_support.hpp"

using namespace crxo;
using namespace crxo::fixture;

namespace {

DgpSpec reference_dgp(double ta = 0.053, double tg = 0.013) {
  DgpSpec d;
  d.subpopulations = {{0.5, {0.4, 0.4}, {SizeSpec::Kind::Poisson, {20, 20}, true}},
                      {0.5, {0.4, 0.4}, {SizeSpec::Kind::Poisson, {100, 100}, true}}};
  d.variance = {ta, tg, 1.0};
  return d;
}

}  // namespace

TEST(RemlObjective, MatchesDenseLikelihood) {
  std::mt19937_64 g(201);
  auto d = random_dataset(g, {.clusters = 4, .kmax = 2, .all_equal = 2});
  d = TrialDataset(std::vector<ClusterRecord>(d.clusters().begin(), d.clusters().begin() + 3));
  for (VarianceComponents vc : {VarianceComponents{0.2, 0.1, 0.7}, VarianceComponents{0.5, 0.0, 1.2},
                                VarianceComponents{0.0, 0.3, 0.4}}) {
    EXPECT_NEAR(reml_objective(d, Structure::NEME, vc), dense_reml(d, vc), 1e-9);
    auto eme = vc;
    eme.tau2_gamma = 0;
    EXPECT_NEAR(reml_objective(d, Structure::EME, vc), dense_reml(d, eme), 1e-9);
  }
  for (int r = 0; r < 30; ++r) {
    auto e = random_dataset(g, {.clusters = 4, .kmax = 4});
    VarianceComponents vc{0.3, 0.2, 0.9};
    EXPECT_NEAR(reml_objective(e, Structure::NEME, vc), dense_reml(e, vc), 1e-9);
  }
}

TEST(RemlObjective, IndependenceLimitIsLeastSquaresProfile) {
  std::mt19937_64 g(202);
  auto d = random_dataset(g, {.clusters = 6});
  auto p = dense_problem(d, Structure::IEE);
  Eigen::VectorXd beta = (p.z.transpose() * p.z).ldlt().solve(p.z.transpose() * p.y);
  const double rss = (p.y - p.z * beta).squaredNorm();
  const double n = double(p.y.size()), q = 3, s2 = 0.8;
  const double expect = (n - q) * std::log(2 * M_PI) + n * std::log(s2) +
                        std::log((p.z.transpose() * p.z / s2).determinant()) + rss / s2;
  EXPECT_NEAR(reml_objective(d, Structure::NEME, {0, 0, s2}), expect, 1e-9);
}

TEST(RemlObjective, InvariantToClusterOrder) {
  std::mt19937_64 g(203);
  auto d = random_dataset(g, {.clusters = 8});
  auto cl = d.clusters();
  std::reverse(cl.begin(), cl.end());
  VarianceComponents vc{0.1, 0.05, 1};
  EXPECT_NEAR(reml_objective(TrialDataset(cl), Structure::NEME, vc), reml_objective(d, Structure::NEME, vc), 1e-10);
}

TEST(RemlObjective, ProfiledFormAgreesAtProfiledVariance) {
  std::mt19937_64 g(204);
  auto d = random_dataset(g, {.clusters = 8});
  auto cells = summarize_cells(d);
  double s2 = 0;
  const double prof = profiled_reml_objective(cells, Structure::NEME, 0.3, 0.1, &s2);
  EXPECT_NEAR(prof, reml_objective_cells(cells, Structure::NEME, {0.3 * s2, 0.1 * s2, s2}), 1e-9);
  // sigma2 is the minimiser along the ray.
  for (double f : {0.9, 1.1})
    EXPECT_GT(reml_objective_cells(cells, Structure::NEME, {0.3 * s2 * f, 0.1 * s2 * f, s2 * f}), prof);
}

TEST(RemlFit, MatchesRefinedGridSearch) {
  auto gen = generate_trial(reference_dgp(0.3, 0.1), 8, 77);
  auto cells = summarize_cells(gen.data);
  auto fit = profile_reml_fit_cells(cells, Structure::NEME);
  double best = INFINITY, ba = 0, bg = 0;
  for (double a = 0; a <= 2.0; a += 0.01)
    for (double c = 0; c <= 1.0; c += 0.01) {
      double v = profiled_reml_objective(cells, Structure::NEME, a, c);
      if (v < best) best = v, ba = a, bg = c;
    }
  for (double step = 0.005; step > 1e-7; step /= 4) {
    const double a0 = ba, g0 = bg;
    for (int i = -8; i <= 8; ++i)
      for (int j = -8; j <= 8; ++j) {
        const double a = std::max(0.0, a0 + i * step), c = std::max(0.0, g0 + j * step);
        double v = profiled_reml_objective(cells, Structure::NEME, a, c);
        if (v < best) best = v, ba = a, bg = c;
      }
  }
  EXPECT_NEAR(fit.objective, best, 1e-6);
  EXPECT_LE(fit.objective, best + 1e-9);
  EXPECT_NEAR(fit.vc.tau2_alpha / fit.vc.sigma2_w, ba, 1e-3);
  EXPECT_NEAR(fit.vc.tau2_gamma / fit.vc.sigma2_w, bg, 1e-3);
}

TEST(RemlFit, NeverWorseThanTruthAndRespectsConstraints) {
  const auto dgp = reference_dgp();
  for (int r = 0; r < 40; ++r) {
    auto cells = summarize_cells(generate_trial(dgp, 10, 1000 + r).data);
    for (auto s : {Structure::EME, Structure::NEME}) {
      auto fit = profile_reml_fit_cells(cells, s);
      EXPECT_LE(fit.objective, reml_objective_cells(cells, s, dgp.variance) + 1e-8);
      EXPECT_GE(fit.vc.tau2_alpha, 0);
      EXPECT_GE(fit.vc.tau2_gamma, 0);
      EXPECT_LE(fit.vc.rho_bp(), fit.vc.rho_wp());
      EXPECT_TRUE(fit.converged);
      if (s == Structure::EME) EXPECT_EQ(fit.vc.tau2_gamma, 0.0);
    }
  }
}

TEST(RemlFit, ExchangeableEqualsNestedOnGammaBoundary) {
  const auto dgp = reference_dgp(0.1, 0.0);
  int seen = 0;
  for (int r = 0; r < 60 && seen < 3; ++r) {
    auto cells = summarize_cells(generate_trial(dgp, 10, 500 + r).data);
    auto neme = profile_reml_fit_cells(cells, Structure::NEME);
    if (!neme.gamma_at_boundary) continue;
    ++seen;
    auto eme = profile_reml_fit_cells(cells, Structure::EME);
    EXPECT_NEAR(eme.objective, neme.objective, 1e-8);
    EXPECT_NEAR(eme.vc.tau2_alpha, neme.vc.tau2_alpha, 1e-5);
    EXPECT_NEAR(eme.vc.sigma2_w, neme.vc.sigma2_w, 1e-5);
  }
  EXPECT_GT(seen, 0);
}

TEST(RemlFit, PureNoiseHitsBoundary) {
  const auto dgp = reference_dgp(0.0, 0.0);
  int boundary = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    auto fit = profile_reml_fit_cells(summarize_cells(generate_trial(dgp, 10, 700 + r).data), Structure::NEME);
    boundary += fit.alpha_at_boundary && fit.vc.tau2_alpha == 0.0;
  }
  EXPECT_GE(2 * boundary, reps);
}

TEST(RemlFit, RecoversSimulationComponentsAtFiftyClusters) {
  const auto dgp = reference_dgp();
  std::vector<double> s2, ta, tg;
  for (int r = 0; r < 100; ++r) {
    auto fit = profile_reml_fit_cells(summarize_cells(generate_trial(dgp, 50, 900 + r).data), Structure::NEME);
    s2.push_back(fit.vc.sigma2_w);
    ta.push_back(fit.vc.tau2_alpha);
    tg.push_back(fit.vc.tau2_gamma);
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_NEAR(median(s2), 1.0, 0.5);
  EXPECT_NEAR(median(ta), 0.053, 0.053);
  EXPECT_NEAR(median(tg), 0.013, 0.02);
}

TEST(RemlFit, DegenerateDataThrows) {
  std::mt19937_64 g(205);
  auto d = random_dataset(g, {.clusters = 4, .noise = 0.0});
  std::vector<ClusterRecord> cl;
  for (auto c : d.clusters()) {
    for (int j = 0; j < 2; ++j)
      for (auto& y : c.cells[j].outcomes) y = 1.0 + 0.5 * c.cells[j].treated + (j == 1 ? 0.25 : 0.0);
    cl.push_back(c);
  }
  EXPECT_THROW(profile_reml_fit(TrialDataset(cl), Structure::NEME), NumericalError);
}

TEST(RemlFit, MomentsStartIsPositive) {
  auto cells = summarize_cells(generate_trial(reference_dgp(), 10, 3).data);
  auto s = moments_start(cells);
  EXPECT_GE(s[0], 0.01);
  EXPECT_GE(s[1], 0.01);
}
