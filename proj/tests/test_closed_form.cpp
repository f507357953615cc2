#include <gtest/gtest.h>

#include <random>

#include "crxo/errors.hpp"
#include "crxo/cells.hpp"
#include "crxo/closed_form.hpp"
#include "crxo/gls.hpp"
#include "test_support.hpp"

using namespace crxo;
using namespace crxo::fixture;

namespace {

double est(const TrialDataset& d, Structure s, Weighting w, const VarianceComponents& vc = {0.2, 0.05, 1.0}) {
  return fit_point_estimate(d, {s, w}, vc).delta;
}

// Closed forms for the mixed models rely on the balance conditions they are stated under.
bool closed_form_defined(const ModelSpec& s, bool balanced) {
  if (s.structure == Structure::NEME && !balanced) return false;
  return !inadmissibility(s, balanced);
}

}  // namespace

TEST(ClosedForm, AgreesWithGenericSolveOnRandomData) {
  std::mt19937_64 g(101);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  int checked = 0;
  for (int r = 0; r < 200; ++r) {
    RandomDataOptions o;
    o.clusters = 2 + 2 * int(g() % 3);
    o.kmax = 4;
    o.balanced = r % 2 == 0;
    auto d = random_dataset(g, o);
    const bool bal = validate_dataset(d).balanced_within_clusters;
    const VarianceComponents vc{u(g), u(g), 0.3 + u(g)};
    for (const auto& s : all_model_specs()) {
      if (!closed_form_defined(s, bal)) continue;
      const double generic = fit_point_estimate(d, s, vc).delta;
      const double closed = closed_form_estimate(d, s, vc);
      EXPECT_NEAR(generic, closed, 1e-10) << estimator_name(s) << " dataset " << r;
      ++checked;
    }
  }
  EXPECT_GT(checked, 2500);
}

TEST(ClosedForm, NestedRequiresBalance) {
  TrialDataset d({make_cluster("a", 1, {1, 2}, {3}), make_cluster("b", 0, {1}, {2, 2})});
  EXPECT_THROW(closed_form_estimate(d, {Structure::NEME, Weighting::None}, {0.1, 0.1, 1}), ConfigError);
}

TEST(ClosedForm, ClusterPeriodWeightedFormulasCoincide) {
  std::mt19937_64 g(102);
  for (int r = 0; r < 200; ++r) {
    auto d = random_dataset(g, {.clusters = 2 + 2 * int(g() % 3), .kmax = 5});
    EXPECT_NEAR(closed_form_estimate(d, {Structure::IEE, Weighting::ClusterPeriod}),
                closed_form_estimate(d, {Structure::FE, Weighting::ClusterPeriod}), 1e-14);
  }
}

// Estimator identities on 200 random datasets per condition.
TEST(Identities, AlwaysFeCpwEqualsIeeCpw) {
  std::mt19937_64 g(103);
  for (int r = 0; r < 200; ++r) {
    auto d = random_dataset(g, {.clusters = 2 + 2 * int(g() % 4), .kmax = 6});
    EXPECT_NEAR(est(d, Structure::FE, Weighting::ClusterPeriod), est(d, Structure::IEE, Weighting::ClusterPeriod),
                1e-10);
  }
}

TEST(Identities, BalancedWithinClusters) {
  std::mt19937_64 g(104);
  for (int r = 0; r < 200; ++r) {
    auto d = random_dataset(g, {.clusters = 2 + 2 * int(g() % 4), .kmax = 6, .balanced = true});
    EXPECT_NEAR(est(d, Structure::IEE, Weighting::None), est(d, Structure::IEE, Weighting::Period), 1e-10);
    EXPECT_NEAR(est(d, Structure::FE, Weighting::None), est(d, Structure::FE, Weighting::Period), 1e-10);
    EXPECT_NEAR(est(d, Structure::IEE, Weighting::ClusterPeriod), est(d, Structure::IEE, Weighting::Cluster), 1e-10);
    EXPECT_NEAR(est(d, Structure::FE, Weighting::ClusterPeriod), est(d, Structure::FE, Weighting::Cluster), 1e-10);
    EXPECT_NEAR(est(d, Structure::EME, Weighting::ClusterPeriod), est(d, Structure::EME, Weighting::Cluster), 1e-10);
  }
}

TEST(Identities, AllCellsEqual) {
  std::mt19937_64 g(105);
  for (int r = 0; r < 200; ++r) {
    auto d = random_dataset(g, {.clusters = 2 + 2 * int(g() % 4), .all_equal = 1 + int(g() % 5)});
    EXPECT_NEAR(est(d, Structure::FE, Weighting::None), est(d, Structure::EME, Weighting::None), 1e-10);
  }
}

TEST(Terms, ExchangeableScalarsMatchDenseInverse) {
  std::vector<ClusterCells> cells(1);
  cells[0].k = {2, 3};
  const VarianceComponents vc{0.3, 0.0, 0.9};
  auto t = exchangeable_terms(cells, vc);
  Eigen::MatrixXd dense(5, 5);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) dense(a, b) = vc.tau2_alpha + (a == b ? vc.sigma2_w : 0);
  Eigen::MatrixXd inv = dense.inverse();
  EXPECT_NEAR(t.d[0], inv(0, 0), 1e-14);
  EXPECT_NEAR(t.f[0], inv(0, 1), 1e-14);
  EXPECT_NEAR(t.a[0], inv.topLeftCorner(2, 2).sum(), 1e-13);
  EXPECT_NEAR(t.b[0], inv.bottomRightCorner(3, 3).sum(), 1e-13);
  EXPECT_NEAR(t.c[0], inv.topRightCorner(2, 3).sum(), 1e-13);
  EXPECT_NEAR(t.lambda[0], 1.5, 1e-15);
}
