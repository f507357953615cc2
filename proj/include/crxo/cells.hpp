#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "crxo/model_spec.hpp"
#include "crxo/trial_data.hpp"

namespace crxo {

// Per-cluster sufficient statistics. Every design column is constant within
// a cell, so sizes, sums and centred sums of squares carry all the
// information the estimating equations and the REML objective need.
struct ClusterCells {
  int sequence = 0;
  std::array<double, 2> k{0, 0};
  std::array<double, 2> sum{0, 0};
  std::array<double, 2> ss{0, 0};  // sum of (y - cell mean)^2

  double treated(int j) const { return j == 0 ? sequence : 1 - sequence; }  // j = 0, 1
  double n() const { return k[0] + k[1]; }
};

std::vector<ClusterCells> summarize_cells(const TrialDataset& data);
std::vector<ClusterCells> drop_cluster(const std::vector<ClusterCells>& cells, std::size_t i);

bool balanced_within_clusters(const std::vector<ClusterCells>& cells);
std::array<double, 2> period_totals(const std::vector<ClusterCells>& cells);
std::array<int, 2> sequence_counts(const std::vector<ClusterCells>& cells);

// Inverse of one cluster's working covariance Q_i.
//
// Independence: Q = diag(omega_1 1, omega_2 1).
// Mixed: Q = w (sigma2 I + P T P') with P = [1_cell1, 1_cell2] and
// T = [[ta+tg, ta], [ta, ta+tg]]; P T P' is the cluster intercept plus the two
// cluster-period terms. Inverse by push-through:
//   (s I + P T P')^-1 = (I - P T (s I + K T)^-1 P') / s,  K = diag(k),
// which never inverts T and so stays valid on the tau = 0 boundary.
class ClusterPrecision {
 public:
  static ClusterPrecision independence(std::array<double, 2> k, std::array<double, 2> omega);
  static ClusterPrecision mixed(std::array<double, 2> k, const VarianceComponents& vc, double w);

  // out = Q^-1 x for an individual-level array ordered cell 1 then cell 2.
  void apply(std::span<const double> x, std::span<double> out) const;

  // Q^-1 P = P N: the inverse maps cell-constant arrays to cell-constant arrays.
  const Eigen::Matrix2d& cell_map() const { return N_; }

  // log det Q
  double log_det() const { return log_det_; }

  // x' Q^-1 x from per-cell sums and raw sums of squares of x.
  double quad(const Eigen::Vector2d& sums, const Eigen::Vector2d& sumsq) const;

  // Covariance of cell sums under this structure: P' V P for V = R (mixed, unweighted)
  // or sigma2 I (independence).
  Eigen::Matrix2d cell_sum_cov(double sigma2_indep) const;

  bool is_mixed() const { return mixed_; }

 private:
  std::array<double, 2> k_{0, 0};
  bool mixed_ = false;
  std::array<double, 2> omega_{1, 1};
  double w_ = 1.0;
  double sigma2_ = 1.0;
  Eigen::Matrix2d T_ = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d inner_ = Eigen::Matrix2d::Zero();  // T (s I + K T)^-1
  Eigen::Matrix2d N_ = Eigen::Matrix2d::Identity();
  double log_det_ = 0.0;
};

// Per-cluster weights implied by the weighting scheme (period totals taken over `cells`).
struct AnalysisWeights {
  std::vector<std::array<double, 2>> omega;  // independence: per-cell diagonal weight
  std::vector<double> w;                     // mixed: scalar multiplier
};

AnalysisWeights analysis_weights(const std::vector<ClusterCells>& cells, const ModelSpec& spec);

std::vector<ClusterPrecision> build_block_covariance_inverse(const std::vector<ClusterCells>& cells,
                                                             const ModelSpec& spec,
                                                             const VarianceComponents& vc);

}  // namespace crxo
