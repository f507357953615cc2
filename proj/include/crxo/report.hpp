#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crxo/inference.hpp"
#include "crxo/simulation.hpp"
#include "crxo/trial_data.hpp"

namespace crxo {

struct MethodResult {
  VarianceMethod method = VarianceMethod::Model;
  double variance = 0.0;
  IntervalEstimate interval;
};

struct EstimatorResult {
  ModelSpec spec;
  EstimandKind target = EstimandKind::iATE;
  double estimate = 0.0;
  std::optional<VarianceComponents> vc;
  std::vector<MethodResult> methods;
};

struct InadmissibleEntry {
  std::string estimator;
  std::string reason;
};

// Weighted minus unweighted estimate within one working structure.
struct SensitivityEntry {
  std::string structure;
  std::string weighting;
  double unweighted = 0.0;
  double weighted = 0.0;
  double difference = 0.0;
};

struct AnalysisReport {
  ValidationReport diagnostics;
  std::size_t n_total = 0;
  double level = 0.95;
  std::vector<EstimatorResult> results;
  std::vector<InadmissibleEntry> inadmissible;
  std::vector<SensitivityEntry> sensitivity;
};

// Fits every requested spec. Inadmissible pairs are listed rather than thrown;
// data errors, jackknife degeneracy and numerical failures propagate.
AnalysisReport analyze_dataset(const TrialDataset& data, const std::vector<ModelSpec>& specs,
                               const std::vector<VarianceMethod>& methods, double level = 0.95);

nlohmann::json report_to_json(const AnalysisReport& r);
void write_report_csv(const AnalysisReport& r, std::ostream& out);
void write_report_markdown(const AnalysisReport& r, std::ostream& out);

// Tables for a simulation summary; cells outside the +/-5% relative-bias band are flagged.
void write_summary_markdown(const SimulationSummary& s, std::ostream& out);

}  // namespace crxo
