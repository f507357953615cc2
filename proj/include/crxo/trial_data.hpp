#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace crxo {

struct PeriodCell {
  int period = 1;  // 1 or 2
  int treated = 0;
  std::vector<double> outcomes;

  std::size_t size() const { return outcomes.size(); }
};

struct ClusterRecord {
  std::string cluster_id;
  int sequence = 0;  // 1: treated in period 1
  std::array<PeriodCell, 2> cells;

  std::size_t size(int period) const { return cells[period - 1].size(); }
};

// Treatment indicator implied by the crossover design.
inline int crossover_treatment(int sequence, int period) {
  return period == 1 ? sequence : 1 - sequence;
}

class TrialDataset {
 public:
  TrialDataset() = default;
  explicit TrialDataset(std::vector<ClusterRecord> clusters);

  const std::vector<ClusterRecord>& clusters() const { return clusters_; }
  std::size_t n_clusters() const { return clusters_.size(); }
  std::size_t n_total() const { return n_total_; }
  const ClusterRecord& operator[](std::size_t i) const { return clusters_[i]; }

  bool operator==(const TrialDataset& o) const;

 private:
  std::vector<ClusterRecord> clusters_;
  std::size_t n_total_ = 0;
};

struct SizeDiagnostics {
  std::string cluster_id;
  int sequence = 0;
  std::size_t k1 = 0, k2 = 0;
  double lambda = 0.0;  // k2 / k1, NaN when k1 == 0
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<SizeDiagnostics> clusters;
  std::array<std::size_t, 2> period_totals{0, 0};
  std::array<std::size_t, 2> sequence_counts{0, 0};  // [S=0, S=1]
  bool balanced_within_clusters = false;              // K_i1 == K_i2 for all i
  bool all_cells_equal = false;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(const TrialDataset& data);

// Throws ConfigError listing the violations when the report does not pass.
void require_valid(const TrialDataset& data);

TrialDataset read_trial_csv(std::istream& in);
TrialDataset load_trial_csv(const std::string& path);
void write_trial_csv(const TrialDataset& data, std::ostream& out);
void save_trial_csv(const TrialDataset& data, const std::string& path);

}  // namespace crxo
