#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crxo/gls.hpp"

namespace crxo {

enum class VarianceMethod { Model, CR0, Jackknife };
std::string variance_method_name(VarianceMethod m);  // model, cr0, jackknife
VarianceMethod parse_variance_method(const std::string& s);

struct VarianceEstimate {
  VarianceMethod method = VarianceMethod::Model;
  double value = 0.0;
  std::vector<double> leave_one_out;  // jackknife only, in cluster order
};

struct IntervalEstimate {
  double point = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  VarianceMethod method = VarianceMethod::Model;

  double lower() const { return point - half_width; }
  double upper() const { return point + half_width; }
  bool rejects_zero() const { return lower() > 0.0 || upper() < 0.0; }
};

// B^-1 M B^-1 at (delta, delta) with M = sum Z_i'Q_i^-1 V_i Q_i^-1 Z_i; V_i is
// sigma2_hat I (sigma2_hat = RSS / (n - p)) for IEE/FE and R_i(vc) for mixed
// models. Unweighted fits reduce to the inverse Gram entry.
VarianceEstimate model_based_variance(const PointFit& fit);

VarianceEstimate cr0_variance(const PointFit& fit);

// How mixed-model variance components are obtained in leave-one-out fits.
struct RefitPolicy {
  enum class Kind { Refit, Fixed, Supplied } kind = Kind::Refit;
  std::optional<VarianceComponents> fixed;            // Kind::Fixed
  std::vector<std::optional<VarianceComponents>> supplied;  // Kind::Supplied, one per cluster
  std::optional<VarianceComponents> warm_start;       // Kind::Refit: extra simplex start
};

VarianceEstimate jackknife_variance(const TrialDataset& data, const ModelSpec& spec,
                                    const RefitPolicy& policy = {});
VarianceEstimate jackknife_variance_cells(const std::vector<ClusterCells>& cells, const ModelSpec& spec,
                                          const RefitPolicy& policy = {});

// Leave-one-out REML components, nullopt where the fit failed.
std::vector<std::optional<VarianceComponents>> leave_one_out_components(
    const std::vector<ClusterCells>& cells, Structure structure,
    const std::optional<VarianceComponents>& warm_start);

// Throws ConfigError when some leave-one-out sample loses a sequence.
void require_jackknife_defined(const std::vector<ClusterCells>& cells);

IntervalEstimate confidence_interval(double point, double variance, double level = 0.95,
                                     VarianceMethod method = VarianceMethod::Model);

}  // namespace crxo
