#pragma once

#include <functional>
#include <vector>

namespace crxo {

struct SimplexResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Nelder-Mead with standard coefficients; restarts from the best vertex until a
// restart no longer improves the objective.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, double ftol, double xtol,
                          int max_evaluations);

}  // namespace crxo
