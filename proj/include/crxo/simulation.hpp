#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crxo/dgp.hpp"
#include "crxo/estimands.hpp"
#include "crxo/inference.hpp"
#include "crxo/trial_data.hpp"

namespace crxo {

struct GeneratedTrial {
  TrialDataset data;
  FinitePopulation population;
};

// Clusters are randomised I/2 per sequence by a seeded permutation.
GeneratedTrial generate_trial(const DgpSpec& dgp, int clusters, std::uint64_t seed);

struct ScenarioConfig {
  std::string name = "scenario";
  DgpSpec dgp;
  int clusters = 10;
  int replicates = 1000;
  std::uint64_t seed = 1;
  std::vector<ModelSpec> estimators;  // empty: the default grid for the DGP
  std::vector<VarianceMethod> methods{VarianceMethod::Model, VarianceMethod::CR0, VarianceMethod::Jackknife};
  double level = 0.95;
  std::map<std::string, EstimandKind> targets;  // overrides keyed by estimator name
  std::optional<EstimandValues> truths;         // default: exact superpopulation values
  int threads = 1;

  void check() const;  // throws ConfigError
  std::vector<ModelSpec> grid() const;
  EstimandKind target(const ModelSpec& spec) const;
  EstimandValues truth_values() const;
};

constexpr std::size_t kMethodCount = 3;

struct ReplicateRow {
  int replicate = 0;
  ModelSpec spec;
  double estimate = 0.0;
  // Indexed by VarianceMethod; NaN when not requested or failed.
  std::array<double, kMethodCount> variance;
  std::array<double, kMethodCount> lower;
  std::array<double, kMethodCount> upper;
  std::optional<VarianceComponents> vc;
};

struct FailureRecord {
  int replicate = 0;
  std::string estimator;
  std::string stage;  // "fit" or a variance method name
  std::string message;
};

struct ScenarioResult {
  std::vector<ReplicateRow> rows;
  std::vector<FailureRecord> failures;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);
// One replicate, exposed for tests.
ScenarioResult run_replicate(const ScenarioConfig& cfg, int replicate);

struct MethodMetrics {
  std::size_t n = 0;  // replicates with a valid variance
  double mean_variance = 0.0;
  double coverage = 0.0;
  double power = 0.0;
};

struct SummaryRow {
  std::string estimator;
  std::string target;
  double truth = 0.0;
  std::size_t n = 0;
  std::size_t failures = 0;
  double mean_estimate = 0.0;
  double mc_se = 0.0;
  double relative_bias_pct = 0.0;  // NaN when truth == 0
  double bias = 0.0;
  double empirical_variance = 0.0;
  std::map<std::string, MethodMetrics> methods;  // keyed by method name
};

struct SimulationSummary {
  std::string scenario;
  int clusters = 0;
  int replicates = 0;
  std::vector<std::string> methods;
  std::vector<SummaryRow> rows;
};

SimulationSummary summarize_metrics(const ScenarioConfig& cfg, const ScenarioResult& result);

void write_replicate_csv(const ScenarioResult& result, const std::vector<VarianceMethod>& methods, std::ostream& out);
void write_summary_csv(const SimulationSummary& summary, std::ostream& out);
SimulationSummary read_summary_csv(std::istream& in);  // throws ConfigError when malformed

}  // namespace crxo
