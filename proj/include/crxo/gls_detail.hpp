#pragma once

// Cluster-local normal-equation pieces shared by the solver, inference and plim code.

#include <Eigen/Dense>

#include "crxo/cells.hpp"

namespace crxo::detail {

// Rows: cells; columns: (delta, period1, period2), or (delta, period2, cluster) for FE.
Eigen::Matrix<double, 2, 3> cell_design(const ClusterCells& c, Structure structure);

struct LocalSystem {
  Eigen::Matrix<double, 2, 3> z;
  Eigen::Matrix3d g;  // Z_i' Q_i^-1 Z_i
  Eigen::Vector3d h;  // Z_i' Q_i^-1 Y_i
};

LocalSystem local_system(const ClusterCells& c, const ClusterPrecision& q, Structure structure);

struct Reduced {
  Eigen::Matrix2d g;
  Eigen::Vector2d h;
};

// Schur complement removing the cluster's own intercept (third column).
inline Reduced eliminate_cluster_effect(const LocalSystem& ls) {
  Reduced r;
  const double gaa = ls.g(2, 2);
  Eigen::Vector2d ga = ls.g.block<2, 1>(0, 2);
  r.g = ls.g.topLeftCorner<2, 2>() - ga * ga.transpose() / gaa;
  r.h = ls.h.head<2>() - ga * ls.h[2] / gaa;
  return r;
}

}  // namespace crxo::detail
