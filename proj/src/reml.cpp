#include "crxo/reml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "crxo/errors.hpp"
#include "crxo/gls_detail.hpp"
#include "crxo/simplex.hpp"

namespace crxo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

struct Pieces {
  double n = 0;
  double log_det = 0;  // sum log|V_i|
  Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  double yvy = 0;
};

Pieces accumulate(const std::vector<ClusterCells>& cells, const VarianceComponents& vc) {
  Pieces p;
  for (const auto& c : cells) {
    auto q = ClusterPrecision::mixed(c.k, vc, 1.0);
    auto ls = detail::local_system(c, q, Structure::NEME);
    p.b += ls.g;
    p.rhs += ls.h;
    p.log_det += q.log_det();
    Eigen::Vector2d s(c.sum[0], c.sum[1]);
    Eigen::Vector2d s2(c.ss[0] + c.sum[0] * c.sum[0] / c.k[0],
                       c.ss[1] + c.sum[1] * c.sum[1] / c.k[1]);
    p.yvy += q.quad(s, s2);
    p.n += c.n();
  }
  return p;
}

// Residual quadratic form r'V^-1 r at the GLS solution, with log|Z'V^-1 Z|.
bool solve_pieces(const Pieces& p, double& rvr, double& log_det_b) {
  Eigen::LLT<Eigen::Matrix3d> llt(p.b);
  if (llt.info() != Eigen::Success) return false;
  Eigen::Vector3d beta = llt.solve(p.rhs);
  rvr = p.yvy - p.rhs.dot(beta);
  log_det_b = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return std::isfinite(rvr) && std::isfinite(log_det_b);
}

VarianceComponents ratio_vc(Structure s, double pa, double pg) {
  VarianceComponents vc;
  vc.tau2_alpha = pa;
  vc.tau2_gamma = s == Structure::EME ? 0.0 : pg;
  vc.sigma2_w = 1.0;
  return vc;
}

void check_structure(Structure s) {
  if (s != Structure::EME && s != Structure::NEME)
    throw ConfigError("REML applies to EME and NEME only");
}

}  // namespace

double reml_objective_cells(const std::vector<ClusterCells>& cells, Structure structure,
                            const VarianceComponents& vc) {
  check_structure(structure);
  vc.check();
  VarianceComponents use = vc;
  if (structure == Structure::EME) use.tau2_gamma = 0.0;
  Pieces p = accumulate(cells, use);
  double rvr = 0, ldb = 0;
  if (!solve_pieces(p, rvr, ldb)) throw NumericalError("REML objective: singular fixed-effect system");
  return (p.n - 3.0) * kLog2Pi + p.log_det + ldb + rvr;
}

double reml_objective(const TrialDataset& data, Structure structure, const VarianceComponents& vc) {
  require_valid(data);
  return reml_objective_cells(summarize_cells(data), structure, vc);
}

double profiled_reml_objective(const std::vector<ClusterCells>& cells, Structure structure,
                               double psi_alpha, double psi_gamma, double* sigma2_hat) {
  Pieces p = accumulate(cells, ratio_vc(structure, psi_alpha, psi_gamma));
  double rhr = 0, ldb = 0;
  const double df = p.n - 3.0;
  if (df <= 0) throw NumericalError("REML needs more observations than fixed effects");
  if (!solve_pieces(p, rhr, ldb) || !(rhr > 1e-13 * std::max(1.0, std::abs(p.yvy))))
    return std::numeric_limits<double>::infinity();
  double s2 = rhr / df;
  if (sigma2_hat) *sigma2_hat = s2;
  return df * std::log(s2) + p.log_det + ldb + df * (1.0 + kLog2Pi);
}

std::array<double, 2> moments_start(const std::vector<ClusterCells>& cells) {
  // OLS fit of (delta, period1, period2) from cell sums.
  Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& c : cells) {
    auto ls = detail::local_system(c, ClusterPrecision::independence(c.k, {1.0, 1.0}), Structure::IEE);
    b += ls.g;
    rhs += ls.h;
  }
  Eigen::Vector3d beta = b.ldlt().solve(rhs);
  double ss = 0, n = 0, inv_k = 0, sq = 0, cross = 0;
  for (const auto& c : cells) {
    auto z = detail::cell_design(c, Structure::IEE);
    Eigen::Vector2d mu = z * beta;
    double r1 = c.sum[0] / c.k[0] - mu[0], r2 = c.sum[1] / c.k[1] - mu[1];
    ss += c.ss[0] + c.ss[1];
    n += c.n();
    inv_k += 1.0 / c.k[0] + 1.0 / c.k[1];
    sq += r1 * r1 + r2 * r2;
    cross += r1 * r2;
  }
  const double I = double(cells.size());
  double s2 = n > 2 * I ? ss / (n - 2 * I) : 1.0;
  if (!(s2 > 0)) s2 = 1.0;
  double ta = cross / I;
  double total = sq / (2 * I) - s2 * inv_k / (2 * I);
  double pa = std::max(ta, 0.01 * s2) / s2;
  double pg = std::max(total - ta, 0.01 * s2) / s2;
  return {pa, pg};
}

RemlFit profile_reml_fit_cells(const std::vector<ClusterCells>& cells, Structure structure,
                               const RemlOptions& options) {
  check_structure(structure);
  const bool nested = structure == Structure::NEME;
  std::vector<std::array<double, 2>> starts = options.starts;
  if (starts.empty()) {
    auto m = moments_start(cells);
    starts = {{0.0, 0.0}, m, {10 * m[0], 10 * m[1]}};
  }
  auto to_psi = [&](const std::vector<double>& x) {
    return std::array<double, 2>{x[0] * x[0], nested ? x[1] * x[1] : 0.0};
  };
  int evals = 0;
  auto f = [&](const std::vector<double>& x) {
    ++evals;
    auto psi = to_psi(x);
    return profiled_reml_objective(cells, structure, psi[0], psi[1]);
  };
  double base = profiled_reml_objective(cells, structure, 0.0, 0.0);
  if (!std::isfinite(base))
    throw NumericalError("REML: degenerate data (zero residual variance)");

  SimplexResult best;
  best.f = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (const auto& s : starts) {
    std::vector<double> x0{std::sqrt(std::max(s[0], 0.0))};
    if (nested) x0.push_back(std::sqrt(std::max(s[1], 0.0)));
    auto r = nelder_mead(f, x0, 0.1, 1e-12, 1e-7, options.max_evaluations);
    if (r.f < best.f) {
      best = r;
      converged = r.converged;
    }
  }
  if (!std::isfinite(best.f)) throw NumericalError("REML: objective not finite at any start");

  // Snap components sitting next to zero onto the boundary when that is no worse.
  for (std::size_t k = 0; k < best.x.size(); ++k) {
    if (best.x[k] * best.x[k] < 1e-4) {
      auto x = best.x;
      x[k] = 0.0;
      double fx = f(x);
      if (fx <= best.f + 1e-9) {
        best.x = x;
        best.f = std::min(best.f, fx);
      }
    }
  }
  auto psi = to_psi(best.x);
  double s2 = 0;
  double obj = profiled_reml_objective(cells, structure, psi[0], psi[1], &s2);
  RemlFit fit;
  fit.vc = {psi[0] * s2, psi[1] * s2, s2};
  fit.objective = obj;
  fit.iterations = evals;
  fit.alpha_at_boundary = psi[0] == 0.0;
  fit.gamma_at_boundary = psi[1] == 0.0;
  fit.converged = converged;
  return fit;
}

RemlFit profile_reml_fit(const TrialDataset& data, Structure structure) {
  require_valid(data);
  return profile_reml_fit_cells(summarize_cells(data), structure);
}

}  // namespace crxo
