#include "crxo/gls.hpp"

#include <cmath>

#include "crxo/errors.hpp"
#include "crxo/gls_detail.hpp"

namespace crxo {

DesignMatrix build_design_matrix(const TrialDataset& data, Structure structure) {
  const bool fe = structure == Structure::FE;
  const std::size_t I = data.n_clusters();
  const std::size_t p = fe ? 2 + I : 3;
  DesignMatrix d;
  d.z = Eigen::MatrixXd::Zero(Eigen::Index(data.n_total()), Eigen::Index(p));
  d.columns = fe ? std::vector<std::string>{"delta", "period2"}
                 : std::vector<std::string>{"delta", "period1", "period2"};
  if (fe)
    for (const auto& c : data.clusters()) d.columns.push_back("cluster_" + c.cluster_id);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < I; ++i) {
    const auto& c = data[i];
    for (int j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < c.cells[j].size(); ++k, ++row) {
        d.z(row, 0) = crossover_treatment(c.sequence, j + 1);
        if (fe) {
          d.z(row, 1) = j == 1;
          d.z(row, Eigen::Index(2 + i)) = 1.0;
        } else {
          d.z(row, 1) = j == 0;
          d.z(row, 2) = j == 1;
        }
      }
    }
  }
  return d;
}

namespace detail {

Eigen::Matrix<double, 2, 3> cell_design(const ClusterCells& c, Structure structure) {
  Eigen::Matrix<double, 2, 3> z;
  for (int j = 0; j < 2; ++j) {
    if (structure == Structure::FE)
      z.row(j) << c.treated(j), double(j == 1), 1.0;
    else
      z.row(j) << c.treated(j), double(j == 0), double(j == 1);
  }
  return z;
}

LocalSystem local_system(const ClusterCells& c, const ClusterPrecision& q, Structure structure) {
  LocalSystem ls;
  ls.z = cell_design(c, structure);
  const Eigen::Matrix2d& N = q.cell_map();
  Eigen::Matrix2d K = Eigen::Vector2d(c.k[0], c.k[1]).asDiagonal();
  Eigen::Matrix2d m = N.transpose() * K;  // P'Q^-1 P
  m = 0.5 * (m + m.transpose());
  ls.g = ls.z.transpose() * m * ls.z;
  ls.h = ls.z.transpose() * (N.transpose() * Eigen::Vector2d(c.sum[0], c.sum[1]));
  return ls;
}

}  // namespace detail

namespace {

std::vector<std::string> theta_names(const std::vector<ClusterCells>& cells, Structure s) {
  if (s != Structure::FE) return {"delta", "period1", "period2"};
  std::vector<std::string> out{"delta", "period2"};
  for (std::size_t i = 0; i < cells.size(); ++i) out.push_back("cluster_" + std::to_string(i + 1));
  return out;
}

}  // namespace

PointFit fit_cells(const std::vector<ClusterCells>& cells, const ModelSpec& spec,
                   const std::optional<VarianceComponents>& vc) {
  if (cells.size() < 2) throw NumericalError("singular normal equations: fewer than 2 clusters");
  auto seq = sequence_counts(cells);
  if (seq[0] == 0 || seq[1] == 0)
    throw NumericalError("singular normal equations: only one sequence present");
  if (auto why = inadmissibility(spec, balanced_within_clusters(cells))) throw InadmissibleError(*why);

  PointFit fit;
  fit.spec = spec;
  VarianceComponents use;
  if (spec.mixed()) {
    if (vc) {
      vc->check();
      use = *vc;
    } else {
      fit.reml = profile_reml_fit_cells(cells, spec.structure);
      use = fit.reml->vc;
    }
    if (spec.structure == Structure::EME) use.tau2_gamma = 0.0;
    fit.vc = use;
  }

  FitState& st = fit.state;
  st.cells = cells;
  st.precision = build_block_covariance_inverse(cells, spec, use);

  const bool fe = spec.structure == Structure::FE;
  const int q = fe ? 2 : 3;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q);
  std::vector<detail::LocalSystem> local(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    local[i] = detail::local_system(cells[i], st.precision[i], spec.structure);
    if (fe) {
      auto red = detail::eliminate_cluster_effect(local[i]);
      B += red.g;
      rhs += red.h;
    } else {
      B += local[i].g;
      rhs += local[i].h;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  fit.diagnostics.rcond = hi > 0 ? lo / hi : 0.0;
  if (!(hi > 0) || !(fit.diagnostics.rcond > 1e-13))
    throw NumericalError("singular normal equations (rcond " +
                         std::to_string(fit.diagnostics.rcond) + ")");
  auto ldlt = B.ldlt();
  st.b_inv = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  st.shared_theta = ldlt.solve(rhs);

  fit.delta = st.shared_theta[0];
  fit.theta_names = theta_names(cells, spec.structure);
  if (fe) {
    fit.theta.resize(Eigen::Index(2 + cells.size()));
    fit.theta.head(2) = st.shared_theta;
    st.cluster_effect.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& ls = local[i];
      st.cluster_effect[i] = (ls.h[2] - ls.g.row(2).head(2).dot(st.shared_theta)) / ls.g(2, 2);
      fit.theta[Eigen::Index(2 + i)] = st.cluster_effect[i];
    }
  } else {
    fit.theta = st.shared_theta;
  }
  double n = 0;
  for (const auto& c : cells) n += c.n();
  fit.diagnostics.n = std::size_t(n);
  fit.diagnostics.p = std::size_t(fit.theta.size());
  if (!std::isfinite(fit.delta)) throw NumericalError("non-finite estimate");
  return fit;
}

PointFit fit_point_estimate(const TrialDataset& data, const ModelSpec& spec,
                            const std::optional<VarianceComponents>& vc) {
  require_valid(data);
  return fit_cells(summarize_cells(data), spec, vc);
}

}  // namespace crxo
