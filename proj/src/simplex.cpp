#include "crxo/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crxo {

namespace {

SimplexResult one_pass(const std::function<double(const std::vector<double>&)>& f,
                       const std::vector<double>& x0, double step, double ftol, double xtol,
                       int budget) {
  const std::size_t d = x0.size();
  std::vector<std::vector<double>> v(d + 1, x0);
  for (std::size_t k = 0; k < d; ++k) v[k + 1][k] += step;
  std::vector<double> fv(d + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    double y = f(x);
    return std::isfinite(y) ? y : std::numeric_limits<double>::infinity();
  };
  for (std::size_t k = 0; k <= d; ++k) fv[k] = eval(v[k]);
  std::vector<std::size_t> order(d + 1);
  bool converged = false;
  while (evals < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
    double size = 0.0;
    for (std::size_t k = 0; k <= d; ++k)
      for (std::size_t c = 0; c < d; ++c) size = std::max(size, std::abs(v[k][c] - v[best][c]));
    if (std::abs(fv[worst] - fv[best]) <= ftol * (1.0 + std::abs(fv[best])) && size <= xtol) {
      converged = true;
      break;
    }
    std::vector<double> cen(d, 0.0);
    for (std::size_t k = 0; k <= d; ++k)
      if (k != worst)
        for (std::size_t c = 0; c < d; ++c) cen[c] += v[k][c] / double(d);
    auto along = [&](double t) {
      std::vector<double> x(d);
      for (std::size_t c = 0; c < d; ++c) x[c] = cen[c] + t * (v[worst][c] - cen[c]);
      return x;
    };
    auto xr = along(-1.0);
    double fr = eval(xr);
    if (fr < fv[best]) {
      auto xe = along(-2.0);
      double fe = eval(xe);
      if (fe < fr) {
        v[worst] = xe;
        fv[worst] = fe;
      } else {
        v[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      v[worst] = xr;
      fv[worst] = fr;
    } else {
      bool outside = fr < fv[worst];
      auto xc = along(outside ? -0.5 : 0.5);
      double fc = eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        v[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t k = 0; k <= d; ++k) {
          if (k == best) continue;
          for (std::size_t c = 0; c < d; ++c) v[k][c] = v[best][c] + 0.5 * (v[k][c] - v[best][c]);
          fv[k] = eval(v[k]);
        }
      }
    }
  }
  std::size_t best = std::size_t(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {v[best], fv[best], evals, converged};
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, double ftol, double xtol,
                          int max_evaluations) {
  SimplexResult best = one_pass(f, x0, step, ftol, xtol, max_evaluations);
  int used = best.evaluations;
  for (int restart = 0; restart < 20 && used < max_evaluations; ++restart) {
    double s = std::max(step * 0.1, 10 * xtol);
    SimplexResult r = one_pass(f, best.x, s, ftol, xtol, max_evaluations - used);
    used += r.evaluations;
    bool improved = r.f < best.f - ftol * (1.0 + std::abs(best.f));
    if (r.f < best.f) {
      best.x = r.x;
      best.f = r.f;
    }
    best.converged = r.converged;
    if (!improved) break;
  }
  best.evaluations = used;
  return best;
}

}  // namespace crxo
