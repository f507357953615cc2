#include "crxo/inference.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "crxo/errors.hpp"
#include "crxo/gls_detail.hpp"

namespace crxo {

std::string variance_method_name(VarianceMethod m) {
  switch (m) {
    case VarianceMethod::Model: return "model";
    case VarianceMethod::CR0: return "cr0";
    case VarianceMethod::Jackknife: return "jackknife";
  }
  return "?";
}

VarianceMethod parse_variance_method(const std::string& s) {
  if (s == "model") return VarianceMethod::Model;
  if (s == "cr0") return VarianceMethod::CR0;
  if (s == "jackknife" || s == "jk") return VarianceMethod::Jackknife;
  throw ConfigError("unknown variance method '" + s + "'");
}

namespace {

// delta row of the full inverse Gram, restricted to one cluster's local columns.
struct LocalRow {
  Eigen::Vector3d x;
};

std::vector<LocalRow> delta_rows(const PointFit& fit, std::vector<detail::LocalSystem>& local) {
  const auto& st = fit.state;
  const bool fe = fit.spec.structure == Structure::FE;
  std::vector<LocalRow> rows(st.cells.size());
  local.resize(st.cells.size());
  Eigen::VectorXd xs = st.b_inv.col(0);
  for (std::size_t i = 0; i < st.cells.size(); ++i) {
    local[i] = detail::local_system(st.cells[i], st.precision[i], fit.spec.structure);
    if (fe) {
      const auto& g = local[i].g;
      double xa = -g.row(2).head(2).dot(xs.head(2)) / g(2, 2);
      rows[i].x << xs[0], xs[1], xa;
    } else {
      rows[i].x = xs.head(3);
    }
  }
  return rows;
}

Eigen::Vector2d fitted_cells(const PointFit& fit, std::size_t i, const detail::LocalSystem& ls) {
  const auto& st = fit.state;
  Eigen::Vector3d theta;
  if (fit.spec.structure == Structure::FE)
    theta << st.shared_theta[0], st.shared_theta[1], st.cluster_effect[i];
  else
    theta = st.shared_theta.head(3);
  return ls.z * theta;
}

}  // namespace

VarianceEstimate model_based_variance(const PointFit& fit) {
  const auto& st = fit.state;
  std::vector<detail::LocalSystem> local;
  auto rows = delta_rows(fit, local);
  double sigma2 = 0.0;
  if (!fit.spec.mixed()) {
    double rss = 0.0;
    for (std::size_t i = 0; i < st.cells.size(); ++i) {
      const auto& c = st.cells[i];
      Eigen::Vector2d mu = fitted_cells(fit, i, local[i]);
      for (int j = 0; j < 2; ++j) {
        const double dev = c.sum[j] / c.k[j] - mu[j];
        rss += c.ss[j] + c.k[j] * dev * dev;
      }
    }
    const double df = double(fit.diagnostics.n) - double(fit.diagnostics.p);
    if (df <= 0) throw NumericalError("model-based variance: n <= p");
    sigma2 = rss / df;
  }
  double v = 0.0;
  for (std::size_t i = 0; i < st.cells.size(); ++i) {
    const auto& N = st.precision[i].cell_map();
    Eigen::Matrix2d cov = st.precision[i].cell_sum_cov(sigma2);
    // Z'Q^-1 V Q^-1 Z = Zc' N' (P'VP) N Zc
    Eigen::Vector2d u = N * (local[i].z * rows[i].x);
    v += u.dot(cov * u);
  }
  return {VarianceMethod::Model, std::max(v, 0.0), {}};
}

VarianceEstimate cr0_variance(const PointFit& fit) {
  const auto& st = fit.state;
  std::vector<detail::LocalSystem> local;
  auto rows = delta_rows(fit, local);
  double v = 0.0;
  for (std::size_t i = 0; i < st.cells.size(); ++i) {
    const auto& c = st.cells[i];
    Eigen::Vector2d mu = fitted_cells(fit, i, local[i]);
    Eigen::Vector2d rsum(c.sum[0] - c.k[0] * mu[0], c.sum[1] - c.k[1] * mu[1]);
    // Z_i'Q_i^-1 r_i = Zc' N' P'r_i
    Eigen::Vector3d score = local[i].z.transpose() * (st.precision[i].cell_map().transpose() * rsum);
    const double contrib = rows[i].x.dot(score);
    v += contrib * contrib;
  }
  return {VarianceMethod::CR0, v, {}};
}

void require_jackknife_defined(const std::vector<ClusterCells>& cells) {
  auto n = sequence_counts(cells);
  if (n[0] < 2 || n[1] < 2)
    throw ConfigError("jackknife undefined: leave-one-out removes a sequence");
}

std::vector<std::optional<VarianceComponents>> leave_one_out_components(
    const std::vector<ClusterCells>& cells, Structure structure,
    const std::optional<VarianceComponents>& warm_start) {
  std::vector<std::optional<VarianceComponents>> out(cells.size());
  RemlOptions opt;
  if (warm_start) {
    const double s2 = warm_start->sigma2_w;
    opt.starts = {{0.0, 0.0}, {warm_start->tau2_alpha / s2, warm_start->tau2_gamma / s2}};
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      out[i] = profile_reml_fit_cells(drop_cluster(cells, i), structure, opt).vc;
    } catch (const NumericalError&) {
      out[i] = std::nullopt;
    }
  }
  return out;
}

VarianceEstimate jackknife_variance_cells(const std::vector<ClusterCells>& cells, const ModelSpec& spec,
                                          const RefitPolicy& policy) {
  require_jackknife_defined(cells);
  const std::size_t I = cells.size();
  std::vector<std::optional<VarianceComponents>> vcs(I);
  if (spec.mixed()) {
    switch (policy.kind) {
      case RefitPolicy::Kind::Refit:
        vcs = leave_one_out_components(cells, spec.structure, policy.warm_start);
        break;
      case RefitPolicy::Kind::Fixed:
        if (!policy.fixed) throw ConfigError("fixed refit policy needs variance components");
        for (auto& v : vcs) v = policy.fixed;
        break;
      case RefitPolicy::Kind::Supplied:
        if (policy.supplied.size() != I) throw ConfigError("supplied components must cover every cluster");
        vcs = policy.supplied;
        break;
    }
  }
  VarianceEstimate est;
  est.method = VarianceMethod::Jackknife;
  est.leave_one_out.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    if (spec.mixed() && !vcs[i]) throw NumericalError("jackknife: REML failed in leave-one-out sample");
    est.leave_one_out[i] = fit_cells(drop_cluster(cells, i), spec, vcs[i]).delta;
  }
  double mean = 0.0;
  for (double d : est.leave_one_out) mean += d;
  mean /= double(I);
  double ss = 0.0;
  for (double d : est.leave_one_out) ss += (d - mean) * (d - mean);
  est.value = double(I - 1) / double(I) * ss;
  return est;
}

VarianceEstimate jackknife_variance(const TrialDataset& data, const ModelSpec& spec,
                                    const RefitPolicy& policy) {
  require_valid(data);
  return jackknife_variance_cells(summarize_cells(data), spec, policy);
}

IntervalEstimate confidence_interval(double point, double variance, double level, VarianceMethod method) {
  if (!(variance >= 0.0)) throw ConfigError("variance must be non-negative");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  boost::math::normal_distribution<double> z;
  const double q = boost::math::quantile(z, 0.5 + level / 2.0);
  return {point, q * std::sqrt(variance), level, method};
}

}  // namespace crxo
