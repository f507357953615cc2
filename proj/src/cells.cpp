#include "crxo/cells.hpp"

#include <cmath>

#include "crxo/errors.hpp"

namespace crxo {

std::vector<ClusterCells> summarize_cells(const TrialDataset& data) {
  std::vector<ClusterCells> out;
  out.reserve(data.n_clusters());
  for (const auto& c : data.clusters()) {
    ClusterCells cc;
    cc.sequence = c.sequence;
    for (int j = 0; j < 2; ++j) {
      const auto& y = c.cells[j].outcomes;
      double s = 0.0;
      for (double v : y) s += v;
      double mean = y.empty() ? 0.0 : s / double(y.size());
      double ss = 0.0;
      for (double v : y) ss += (v - mean) * (v - mean);
      cc.k[j] = double(y.size());
      cc.sum[j] = s;
      cc.ss[j] = ss;
    }
    out.push_back(cc);
  }
  return out;
}

std::vector<ClusterCells> drop_cluster(const std::vector<ClusterCells>& cells, std::size_t i) {
  std::vector<ClusterCells> out;
  out.reserve(cells.size() - 1);
  for (std::size_t r = 0; r < cells.size(); ++r)
    if (r != i) out.push_back(cells[r]);
  return out;
}

bool balanced_within_clusters(const std::vector<ClusterCells>& cells) {
  for (const auto& c : cells)
    if (c.k[0] != c.k[1]) return false;
  return true;
}

std::array<double, 2> period_totals(const std::vector<ClusterCells>& cells) {
  std::array<double, 2> t{0, 0};
  for (const auto& c : cells) {
    t[0] += c.k[0];
    t[1] += c.k[1];
  }
  return t;
}

std::array<int, 2> sequence_counts(const std::vector<ClusterCells>& cells) {
  std::array<int, 2> n{0, 0};
  for (const auto& c : cells) n[c.sequence]++;
  return n;
}

ClusterPrecision ClusterPrecision::independence(std::array<double, 2> k,
                                                std::array<double, 2> omega) {
  if (!(omega[0] > 0 && omega[1] > 0)) throw NumericalError("analysis weights must be positive");
  ClusterPrecision p;
  p.k_ = k;
  p.mixed_ = false;
  p.omega_ = omega;
  p.N_ << 1.0 / omega[0], 0.0, 0.0, 1.0 / omega[1];
  p.log_det_ = k[0] * std::log(omega[0]) + k[1] * std::log(omega[1]);
  return p;
}

ClusterPrecision ClusterPrecision::mixed(std::array<double, 2> k, const VarianceComponents& vc,
                                         double w) {
  if (!(vc.sigma2_w > 0) || vc.tau2_alpha < 0 || vc.tau2_gamma < 0 || !(w > 0))
    throw NumericalError("covariance block is not positive definite");
  ClusterPrecision p;
  p.k_ = k;
  p.mixed_ = true;
  p.w_ = w;
  p.sigma2_ = vc.sigma2_w;
  const double ta = vc.tau2_alpha, tg = vc.tau2_gamma, s = vc.sigma2_w;
  p.T_ << ta + tg, ta, ta, ta + tg;
  Eigen::Matrix2d K = Eigen::Vector2d(k[0], k[1]).asDiagonal();
  Eigen::Matrix2d sKT = s * Eigen::Matrix2d::Identity() + K * p.T_;
  Eigen::Matrix2d sTK = s * Eigen::Matrix2d::Identity() + p.T_ * K;
  p.inner_ = p.T_ * sKT.inverse();
  p.N_ = sTK.inverse() / w;
  // det(s I_n + P T P') = s^n det(I + K T / s)
  double d = (Eigen::Matrix2d::Identity() + K * p.T_ / s).determinant();
  if (!(d > 0)) throw NumericalError("covariance block is not positive definite");
  p.log_det_ = (k[0] + k[1]) * std::log(s * w) + std::log(d);
  return p;
}

void ClusterPrecision::apply(std::span<const double> x, std::span<double> out) const {
  const std::size_t k1 = std::size_t(k_[0]), n = std::size_t(k_[0] + k_[1]);
  if (x.size() != n || out.size() != n) throw ConfigError("array length does not match cluster");
  if (!mixed_) {
    for (std::size_t r = 0; r < n; ++r) out[r] = x[r] / omega_[r < k1 ? 0 : 1];
    return;
  }
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  for (std::size_t r = 0; r < n; ++r) s[r < k1 ? 0 : 1] += x[r];
  Eigen::Vector2d c = inner_ * s;
  const double scale = 1.0 / (sigma2_ * w_);
  for (std::size_t r = 0; r < n; ++r) out[r] = (x[r] - c[r < k1 ? 0 : 1]) * scale;
}

double ClusterPrecision::quad(const Eigen::Vector2d& sums, const Eigen::Vector2d& sumsq) const {
  if (!mixed_) return sumsq[0] / omega_[0] + sumsq[1] / omega_[1];
  return (sumsq.sum() - sums.dot(inner_ * sums)) / (sigma2_ * w_);
}

Eigen::Matrix2d ClusterPrecision::cell_sum_cov(double sigma2_indep) const {
  Eigen::Matrix2d K = Eigen::Vector2d(k_[0], k_[1]).asDiagonal();
  if (!mixed_) return sigma2_indep * K;
  return sigma2_ * K + K * T_ * K;
}

AnalysisWeights analysis_weights(const std::vector<ClusterCells>& cells, const ModelSpec& spec) {
  AnalysisWeights aw;
  aw.omega.resize(cells.size());
  aw.w.resize(cells.size());
  auto tot = period_totals(cells);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    switch (spec.weighting) {
      case Weighting::None:
        aw.omega[i] = {1.0, 1.0};
        aw.w[i] = 1.0;
        break;
      case Weighting::ClusterPeriod:
        aw.omega[i] = {c.k[0], c.k[1]};
        aw.w[i] = c.k[0];
        break;
      case Weighting::Cluster:
        aw.omega[i] = {c.n(), c.n()};
        aw.w[i] = c.n();
        break;
      case Weighting::Period:
        aw.omega[i] = {tot[0], tot[1]};
        aw.w[i] = tot[0];
        break;
    }
  }
  return aw;
}

std::vector<ClusterPrecision> build_block_covariance_inverse(const std::vector<ClusterCells>& cells,
                                                             const ModelSpec& spec,
                                                             const VarianceComponents& vc) {
  if (auto why = inadmissibility(spec, balanced_within_clusters(cells))) throw InadmissibleError(*why);
  auto aw = analysis_weights(cells, spec);
  std::vector<ClusterPrecision> out;
  out.reserve(cells.size());
  VarianceComponents use = vc;
  if (spec.structure == Structure::EME) use.tau2_gamma = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (spec.mixed())
      out.push_back(ClusterPrecision::mixed(cells[i].k, use, aw.w[i]));
    else
      out.push_back(ClusterPrecision::independence(cells[i].k, aw.omega[i]));
  }
  return out;
}

}  // namespace crxo
