#pragma once

#include <array>
#include <vector>

#include "crxo/cells.hpp"
#include "crxo/model_spec.hpp"
#include "crxo/trial_data.hpp"

namespace crxo {

struct RemlFit {
  VarianceComponents vc;
  double objective = 0.0;  // -2 restricted log-likelihood
  int iterations = 0;      // objective evaluations
  bool alpha_at_boundary = false;
  bool gamma_at_boundary = false;
  bool converged = false;
};

struct RemlOptions {
  // Starting points as (tau2_alpha, tau2_gamma) / sigma2 ratios. Empty means the
  // default three: (0,0), a moments guess and ten times that guess.
  std::vector<std::array<double, 2>> starts;
  int max_evaluations = 4000;
};

// -2 log restricted likelihood of the EME (tau2_gamma forced to 0) or NEME
// model at the given components.
double reml_objective(const TrialDataset& data, Structure structure, const VarianceComponents& vc);
double reml_objective_cells(const std::vector<ClusterCells>& cells, Structure structure,
                            const VarianceComponents& vc);

// Same objective with sigma2 profiled out; psi are tau2 / sigma2 ratios.
double profiled_reml_objective(const std::vector<ClusterCells>& cells, Structure structure,
                               double psi_alpha, double psi_gamma, double* sigma2_hat = nullptr);

RemlFit profile_reml_fit(const TrialDataset& data, Structure structure);
RemlFit profile_reml_fit_cells(const std::vector<ClusterCells>& cells, Structure structure,
                               const RemlOptions& options = {});

// Ratio guess from cell-mean residual moments, floored at 0.01.
std::array<double, 2> moments_start(const std::vector<ClusterCells>& cells);

}  // namespace crxo
