#pragma once

#include <vector>

#include "crxo/cells.hpp"
#include "crxo/model_spec.hpp"
#include "crxo/trial_data.hpp"

namespace crxo {

// Scalars from the exchangeable/nested-exchangeable inverse and the FE algebra.
struct ClosedFormTerms {
  // Mixed-model path, one entry per cluster: d, f are the diagonal and
  // off-diagonal of the exchangeable inverse; a, b, c the cell-block sums.
  std::vector<double> a, b, c, d, f;
  // FE path: l = 1 / sum_{S=0} h_i, m = 1 / sum_{S=1} h_i
  double l = 0.0, m = 0.0;
  // FE per-cluster precision h_i and cell shares (period-1, period-2)
  std::vector<double> fe_a, fe_b, fe_c;
  std::vector<double> lambda;  // K_i2 / K_i1
};

// Exchangeable (tau2_gamma ignored) terms for any sizes.
ClosedFormTerms exchangeable_terms(const std::vector<ClusterCells>& cells, const VarianceComponents& vc);
// Nested-exchangeable terms; requires K_i1 = K_i2.
ClosedFormTerms nested_terms(const std::vector<ClusterCells>& cells, const VarianceComponents& vc);
// FE terms for the given weighting.
ClosedFormTerms fixed_effect_terms(const std::vector<ClusterCells>& cells, Weighting weighting);

// Treatment effect from the displayed algebraic expressions. Mixed models
// need `vc`; the nested model and mixed cpw/pw need K_i1 = K_i2; the
// cluster-period weighted expressions assume I/2 clusters per sequence.
double closed_form_estimate(const TrialDataset& data, const ModelSpec& spec,
                            const VarianceComponents& vc = {});
double closed_form_cells(const std::vector<ClusterCells>& cells, const ModelSpec& spec,
                         const VarianceComponents& vc = {});

}  // namespace crxo
