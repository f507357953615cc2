#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crxo/cells.hpp"
#include "crxo/model_spec.hpp"
#include "crxo/reml.hpp"
#include "crxo/trial_data.hpp"

namespace crxo {

struct DesignMatrix {
  Eigen::MatrixXd z;  // n x p, rows in dataset order (cluster, period, individual)
  std::vector<std::string> columns;
};

// IEE/EME/NEME: (delta, period1, period2); FE: (delta, period2, cluster_1..cluster_I).
DesignMatrix build_design_matrix(const TrialDataset& data, Structure structure);

// Everything inference needs after a fit, kept at the cell level.
struct FitState {
  std::vector<ClusterCells> cells;
  std::vector<ClusterPrecision> precision;
  Eigen::MatrixXd b_inv;           // inverse Gram over the shared columns
  Eigen::VectorXd shared_theta;    // (delta, period1, period2) or (delta, period2)
  std::vector<double> cluster_effect;  // FE only
};

struct SolverDiagnostics {
  double rcond = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;  // full parameter count
};

struct PointFit {
  ModelSpec spec;
  double delta = 0.0;
  Eigen::VectorXd theta;
  std::vector<std::string> theta_names;
  std::optional<VarianceComponents> vc;  // mixed models
  std::optional<RemlFit> reml;           // set when vc was estimated here
  SolverDiagnostics diagnostics;
  FitState state;
};

// Solves Z'W^-1 Z theta = Z'W^-1 Y. Mixed models use `vc` when given, otherwise
// the unweighted REML estimate. For EME only tau2_alpha and sigma2_w are used.
PointFit fit_point_estimate(const TrialDataset& data, const ModelSpec& spec,
                            const std::optional<VarianceComponents>& vc = std::nullopt);
PointFit fit_cells(const std::vector<ClusterCells>& cells, const ModelSpec& spec,
                   const std::optional<VarianceComponents>& vc = std::nullopt);

}  // namespace crxo
