#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "crxo/dgp.hpp"
#include "crxo/model_spec.hpp"

namespace crxo {

// Potential outcomes of every individual in a realised trial.
struct PopulationCell {
  std::vector<double> y0, y1;
  std::size_t size() const { return y0.size(); }
};
struct PopulationCluster {
  int subpopulation = 0;
  std::array<PopulationCell, 2> cells;
};
struct FinitePopulation {
  std::vector<PopulationCluster> clusters;
};

// Weighted average treatment effect over the realised individuals.
double finite_wate(const FinitePopulation& pop, EstimandKind kind);

// Indexed by EstimandKind.
using EstimandValues = std::array<double, 4>;
inline double at(const EstimandValues& v, EstimandKind k) { return v[std::size_t(k)]; }

EstimandValues superpop_wate_exact(const DgpSpec& dgp);

struct MonteCarloEstimands {
  EstimandValues value{};
  EstimandValues se{};
  // Standard errors of pairwise differences, indexed [a][b].
  std::array<std::array<double, 4>, 4> diff_se{};
  std::size_t draws = 0;
};
MonteCarloEstimands superpop_wate_mc(const DgpSpec& dgp, std::size_t draws, std::uint64_t seed);

enum class Ternary { Absent, Present, Indeterminate };
const char* ternary_name(Ternary t);  // "no", "yes", "indeterminate"

struct SizeFlag {
  Ternary state = Ternary::Absent;
  double difference = 0.0;  // first minus second
  double se = 0.0;          // 0 when exact
};

struct InformativeSizeReport {
  EstimandValues values{};
  EstimandValues se{};  // zeros when exact
  bool exact = true;
  double tolerance = 1e-9;
  SizeFlag ics;     // iATE vs cATE
  SizeFlag ips;     // iATE vs pATE
  SizeFlag icps_c;  // cpATE vs cATE
  SizeFlag icps_p;  // cpATE vs pATE
  Ternary icps() const;
};

// Exact enumeration when draws == 0 or every size is fixed; otherwise Monte
// Carlo with a difference counted as present only beyond three standard errors.
InformativeSizeReport classify_informative_sizes(const DgpSpec& dgp, double tolerance = 1e-9,
                                                 std::size_t draws = 0, std::uint64_t seed = 1);

// Same flags for a realised trial (always exact).
InformativeSizeReport classify_finite(const FinitePopulation& pop, double tolerance = 1e-9);

}  // namespace crxo
