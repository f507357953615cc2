#include "crxo/trial_data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "crxo/errors.hpp"
#include "crxo/text_util.hpp"

namespace crxo {

namespace {

const std::vector<std::string> kHeader = {"cluster_id", "period", "sequence", "treated",
                                          "outcome"};

int parse_flag(const std::string& field, const char* name, std::size_t line, int lo, int hi) {
  int v = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size() || v < lo || v > hi) {
    throw ConfigError("line " + std::to_string(line) + ": " + name + " must be in {" +
                      std::to_string(lo) + "," + std::to_string(hi) + "}, got '" + field + "'");
  }
  return v;
}

}  // namespace

TrialDataset::TrialDataset(std::vector<ClusterRecord> clusters) : clusters_(std::move(clusters)) {
  for (const auto& c : clusters_) n_total_ += c.cells[0].size() + c.cells[1].size();
}

bool TrialDataset::operator==(const TrialDataset& o) const {
  if (clusters_.size() != o.clusters_.size()) return false;
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    const auto& a = clusters_[i];
    const auto& b = o.clusters_[i];
    if (a.cluster_id != b.cluster_id || a.sequence != b.sequence) return false;
    for (int j = 0; j < 2; ++j) {
      if (a.cells[j].period != b.cells[j].period || a.cells[j].treated != b.cells[j].treated ||
          a.cells[j].outcomes != b.cells[j].outcomes)
        return false;
    }
  }
  return true;
}

ValidationReport validate_dataset(const TrialDataset& data) {
  ValidationReport rep;
  const auto& cl = data.clusters();
  if (cl.size() < 2) rep.violations.push_back("at least 2 clusters required");
  bool balanced = true;
  std::size_t first_k = 0;
  bool all_equal = true;
  std::size_t n = 0;
  for (const auto& c : cl) {
    if (c.sequence != 0 && c.sequence != 1) {
      rep.violations.push_back("cluster " + c.cluster_id + ": sequence must be 0 or 1");
      continue;
    }
    rep.sequence_counts[c.sequence]++;
    for (int j = 0; j < 2; ++j) {
      const auto& cell = c.cells[j];
      if (cell.period != j + 1)
        rep.violations.push_back("cluster " + c.cluster_id + ": cell " + std::to_string(j + 1) +
                                 " has period " + std::to_string(cell.period));
      if (cell.size() < 1)
        rep.violations.push_back("cluster " + c.cluster_id + " period " + std::to_string(j + 1) +
                                 ": K_ij >= 1 failed");
      if (cell.treated != crossover_treatment(c.sequence, j + 1))
        rep.violations.push_back("cluster " + c.cluster_id + " period " + std::to_string(j + 1) +
                                 ": treated flag inconsistent with sequence (crossover)");
      for (double y : cell.outcomes) {
        if (!std::isfinite(y)) {
          rep.violations.push_back("cluster " + c.cluster_id + ": non-finite outcome");
          break;
        }
      }
      rep.period_totals[j] += cell.size();
      n += cell.size();
    }
    SizeDiagnostics d;
    d.cluster_id = c.cluster_id;
    d.sequence = c.sequence;
    d.k1 = c.cells[0].size();
    d.k2 = c.cells[1].size();
    d.lambda = d.k1 > 0 ? double(d.k2) / double(d.k1) : std::nan("");
    if (d.k1 != d.k2) balanced = false;
    if (rep.clusters.empty()) first_k = d.k1;
    if (d.k1 != first_k || d.k2 != first_k) all_equal = false;
    rep.clusters.push_back(d);
  }
  if (rep.sequence_counts[0] == 0 || rep.sequence_counts[1] == 0)
    rep.violations.push_back("both sequences required");
  if (n != data.n_total()) rep.violations.push_back("n_total does not match cell sizes");
  rep.balanced_within_clusters = balanced && !cl.empty();
  rep.all_cells_equal = all_equal && !cl.empty();
  return rep;
}

void require_valid(const TrialDataset& data) {
  auto rep = validate_dataset(data);
  if (rep.ok()) return;
  std::string msg = "invalid dataset:";
  for (const auto& v : rep.violations) msg += "\n  " + v;
  throw ConfigError(msg);
}

TrialDataset read_trial_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    strip_cr(line);
    if (is_blank(line)) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw ConfigError("empty CSV: header required");
  for (const auto& name : kHeader) {
    bool found = false;
    for (const auto& h : header) found = found || h == name;
    if (!found) throw ConfigError("missing column '" + name + "'");
  }
  for (const auto& h : header) {
    bool known = false;
    for (const auto& name : kHeader) known = known || h == name;
    if (!known) throw ConfigError("unexpected column '" + h + "'");
  }
  if (header != kHeader)
    throw ConfigError("header must be exactly cluster_id,period,sequence,treated,outcome");

  std::vector<ClusterRecord> clusters;
  std::unordered_map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (is_blank(line)) continue;
    auto f = split_csv_line(line);
    if (f.size() != kHeader.size())
      throw ConfigError("line " + std::to_string(lineno) + ": expected 5 fields, got " +
                        std::to_string(f.size()));
    const std::string& id = f[0];
    int period = parse_flag(f[1], "period", lineno, 1, 2);
    int seq = parse_flag(f[2], "sequence", lineno, 0, 1);
    int trt = parse_flag(f[3], "treated", lineno, 0, 1);
    if (is_blank(f[4])) throw ConfigError("line " + std::to_string(lineno) + ": missing outcome");
    double y = 0.0;
    if (!parse_double(f[4], y) || !std::isfinite(y))
      throw ConfigError("line " + std::to_string(lineno) + ": non-numeric outcome '" + f[4] + "'");
    if (trt != crossover_treatment(seq, period))
      throw ConfigError("line " + std::to_string(lineno) + ": treated=" + std::to_string(trt) +
                        " with sequence=" + std::to_string(seq) + " in period " +
                        std::to_string(period) + " violates crossover consistency");
    auto it = index.find(id);
    if (it == index.end()) {
      ClusterRecord rec;
      rec.cluster_id = id;
      rec.sequence = seq;
      for (int j = 0; j < 2; ++j) {
        rec.cells[j].period = j + 1;
        rec.cells[j].treated = crossover_treatment(seq, j + 1);
      }
      it = index.emplace(id, clusters.size()).first;
      clusters.push_back(std::move(rec));
    } else if (clusters[it->second].sequence != seq) {
      throw ConfigError("line " + std::to_string(lineno) + ": cluster '" + id +
                        "' has conflicting sequence values");
    }
    clusters[it->second].cells[period - 1].outcomes.push_back(y);
  }
  TrialDataset data(std::move(clusters));
  require_valid(data);
  return data;
}

TrialDataset load_trial_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_trial_csv(in);
}

void write_trial_csv(const TrialDataset& data, std::ostream& out) {
  out << "cluster_id,period,sequence,treated,outcome\n";
  for (const auto& c : data.clusters()) {
    for (const auto& cell : c.cells) {
      for (double y : cell.outcomes) {
        out << csv_quote(c.cluster_id) << ',' << cell.period << ',' << c.sequence << ','
            << cell.treated << ',' << format_double(y) << '\n';
      }
    }
  }
}

void save_trial_csv(const TrialDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_trial_csv(data, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace crxo
