#include "crxo/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "crxo/cells.hpp"
#include "crxo/errors.hpp"
#include "crxo/text_util.hpp"

namespace crxo {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

GeneratedTrial generate_trial(const DgpSpec& dgp, int clusters, std::uint64_t seed) {
  dgp.check();
  if (clusters < 2 || clusters % 2 != 0) throw ConfigError("number of clusters must be even and >= 2");
  Rng rng(seed);

  std::vector<int> sequence(std::size_t(clusters), 0);
  std::fill(sequence.begin(), sequence.begin() + clusters / 2, 1);
  for (int i = clusters - 1; i > 0; --i) {
    boost::random::uniform_int_distribution<int> pick(0, i);
    std::swap(sequence[std::size_t(i)], sequence[std::size_t(pick(rng))]);
  }

  boost::random::normal_distribution<double> z;
  const double sa = std::sqrt(dgp.variance.tau2_alpha), sg = std::sqrt(dgp.variance.tau2_gamma),
               se = std::sqrt(dgp.variance.sigma2_w);

  std::vector<ClusterRecord> records;
  GeneratedTrial out;
  records.reserve(std::size_t(clusters));
  out.population.clusters.reserve(std::size_t(clusters));
  for (int i = 0; i < clusters; ++i) {
    const std::size_t u = draw_subpopulation(dgp, rng);
    const auto& sub = dgp.subpopulations[u];
    const auto k = draw_sizes(sub.size, rng);
    const double alpha = sa * z(rng);
    const std::array<double, 2> gamma{sg * z(rng), sg * z(rng)};

    ClusterRecord rec;
    rec.cluster_id = "c" + std::to_string(i + 1);
    rec.sequence = sequence[std::size_t(i)];
    PopulationCluster pc;
    pc.subpopulation = int(u);
    for (int j = 0; j < 2; ++j) {
      auto& cell = rec.cells[std::size_t(j)];
      auto& pcell = pc.cells[std::size_t(j)];
      cell.period = j + 1;
      cell.treated = crossover_treatment(rec.sequence, j + 1);
      cell.outcomes.resize(std::size_t(k[j]));
      pcell.y0.resize(std::size_t(k[j]));
      pcell.y1.resize(std::size_t(k[j]));
      const double base = dgp.period_effects[j] + alpha + gamma[j];
      for (int m = 0; m < k[j]; ++m) {
        const double y0 = base + se * z(rng);
        const double y1 = y0 + sub.effect[j];
        pcell.y0[std::size_t(m)] = y0;
        pcell.y1[std::size_t(m)] = y1;
        cell.outcomes[std::size_t(m)] = cell.treated ? y1 : y0;
      }
    }
    records.push_back(std::move(rec));
    out.population.clusters.push_back(std::move(pc));
  }
  out.data = TrialDataset(std::move(records));
  return out;
}

void ScenarioConfig::check() const {
  dgp.check();
  if (clusters < 2 || clusters % 2 != 0) throw ConfigError("clusters must be even and >= 2");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (methods.empty()) throw ConfigError("at least one variance method is required");
  for (auto m : methods)
    if (m == VarianceMethod::Jackknife && clusters < 4)
      throw ConfigError("jackknife needs at least 2 clusters per sequence");
  const bool balanced = dgp.sizes_equal_within_clusters();
  for (const auto& s : grid())
    if (auto why = inadmissibility(s, balanced)) throw ConfigError(*why);
  for (const auto& [name, kind] : targets) (void)parse_estimator(name);
}

std::vector<ModelSpec> ScenarioConfig::grid() const {
  return estimators.empty() ? simulation_grid(dgp.sizes_equal_within_clusters()) : estimators;
}

EstimandKind ScenarioConfig::target(const ModelSpec& spec) const {
  auto it = targets.find(estimator_name(spec));
  return it == targets.end() ? target_estimand(spec) : it->second;
}

EstimandValues ScenarioConfig::truth_values() const { return truths ? *truths : superpop_wate_exact(dgp); }

ScenarioResult run_replicate(const ScenarioConfig& cfg, int replicate) {
  ScenarioResult res;
  const auto grid = cfg.grid();
  const auto trial = generate_trial(cfg.dgp, cfg.clusters, substream_seed(cfg.seed, std::uint64_t(replicate)));
  const auto cells = summarize_cells(trial.data);
  const bool want_jk =
      std::find(cfg.methods.begin(), cfg.methods.end(), VarianceMethod::Jackknife) != cfg.methods.end();

  // Variance components: one REML fit per structure, shared across weightings.
  struct Components {
    std::optional<VarianceComponents> full;
    std::string error;
    std::vector<std::optional<VarianceComponents>> loo;
  };
  std::map<Structure, Components> comps;
  for (const auto& spec : grid) {
    if (!spec.mixed() || comps.count(spec.structure)) continue;
    auto& c = comps[spec.structure];
    try {
      c.full = profile_reml_fit_cells(cells, spec.structure).vc;
      if (want_jk) c.loo = leave_one_out_components(cells, spec.structure, c.full);
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  }

  for (const auto& spec : grid) {
    const std::string name = estimator_name(spec);
    std::optional<VarianceComponents> vc;
    if (spec.mixed()) {
      const auto& c = comps[spec.structure];
      if (!c.full) {
        res.failures.push_back({replicate, name, "fit", c.error});
        continue;
      }
      vc = c.full;
    }
    PointFit fit;
    try {
      fit = fit_cells(cells, spec, vc);
    } catch (const std::exception& e) {
      res.failures.push_back({replicate, name, "fit", e.what()});
      continue;
    }
    ReplicateRow row;
    row.replicate = replicate;
    row.spec = spec;
    row.estimate = fit.delta;
    row.vc = fit.vc;
    row.variance.fill(kNaN);
    row.lower.fill(kNaN);
    row.upper.fill(kNaN);
    for (auto m : cfg.methods) {
      try {
        VarianceEstimate v;
        switch (m) {
          case VarianceMethod::Model: v = model_based_variance(fit); break;
          case VarianceMethod::CR0: v = cr0_variance(fit); break;
          case VarianceMethod::Jackknife: {
            RefitPolicy policy;
            if (spec.mixed()) {
              policy.kind = RefitPolicy::Kind::Supplied;
              policy.supplied = comps[spec.structure].loo;
            }
            v = jackknife_variance_cells(cells, spec, policy);
            break;
          }
        }
        auto ci = confidence_interval(fit.delta, v.value, cfg.level, m);
        row.variance[std::size_t(m)] = v.value;
        row.lower[std::size_t(m)] = ci.lower();
        row.upper[std::size_t(m)] = ci.upper();
      } catch (const std::exception& e) {
        res.failures.push_back({replicate, name, variance_method_name(m), e.what()});
      }
    }
    res.rows.push_back(row);
  }
  return res;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.check();
  std::vector<ScenarioResult> parts(std::size_t(cfg.replicates));
  auto work = [&](int start, int stride) {
    for (int r = start; r < cfg.replicates; r += stride) parts[std::size_t(r)] = run_replicate(cfg, r);
  };
  const int t = std::min(cfg.threads, cfg.replicates);
  if (t <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
    for (int k = 0; k < t; ++k)
      pool.emplace_back([&, k] {
        try {
          work(k, t);
        } catch (...) {
          errors[std::size_t(k)] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  ScenarioResult out;
  for (auto& p : parts) {
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
    out.failures.insert(out.failures.end(), p.failures.begin(), p.failures.end());
  }
  return out;
}

SimulationSummary summarize_metrics(const ScenarioConfig& cfg, const ScenarioResult& result) {
  const auto truths = cfg.truth_values();
  SimulationSummary sum;
  sum.scenario = cfg.name;
  sum.clusters = cfg.clusters;
  sum.replicates = cfg.replicates;
  for (auto m : cfg.methods) sum.methods.push_back(variance_method_name(m));

  for (const auto& spec : cfg.grid()) {
    SummaryRow row;
    row.estimator = estimator_name(spec);
    const auto kind = cfg.target(spec);
    row.target = estimand_name(kind);
    row.truth = at(truths, kind);
    for (const auto& f : result.failures)
      if (f.estimator == row.estimator && f.stage == "fit") ++row.failures;

    std::vector<const ReplicateRow*> mine;
    for (const auto& r : result.rows)
      if (r.spec == spec) mine.push_back(&r);
    row.n = mine.size();
    double s = 0.0;
    for (auto* r : mine) s += r->estimate;
    row.mean_estimate = row.n ? s / double(row.n) : kNaN;
    double q = 0.0;
    for (auto* r : mine) q += (r->estimate - row.mean_estimate) * (r->estimate - row.mean_estimate);
    row.empirical_variance = row.n > 1 ? q / double(row.n - 1) : (row.n == 1 ? 0.0 : kNaN);
    row.mc_se = row.n > 0 ? std::sqrt(row.empirical_variance / double(row.n)) : kNaN;
    row.bias = row.mean_estimate - row.truth;
    row.relative_bias_pct = row.truth != 0.0 ? 100.0 * row.bias / row.truth : kNaN;

    for (auto m : cfg.methods) {
      MethodMetrics mm;
      double v = 0.0, cover = 0.0, reject = 0.0;
      for (auto* r : mine) {
        const auto k = std::size_t(m);
        if (std::isnan(r->variance[k])) continue;
        ++mm.n;
        v += r->variance[k];
        if (r->lower[k] <= row.truth && row.truth <= r->upper[k]) cover += 1;
        if (r->lower[k] > 0.0 || r->upper[k] < 0.0) reject += 1;
      }
      if (mm.n) {
        mm.mean_variance = v / double(mm.n);
        mm.coverage = cover / double(mm.n);
        mm.power = reject / double(mm.n);
      } else {
        mm.mean_variance = mm.coverage = mm.power = kNaN;
      }
      row.methods[variance_method_name(m)] = mm;
    }
    sum.rows.push_back(std::move(row));
  }
  return sum;
}

void write_replicate_csv(const ScenarioResult& result, const std::vector<VarianceMethod>& methods, std::ostream& out) {
  out << "replicate,estimator,estimate";
  for (auto m : methods) {
    auto n = variance_method_name(m);
    out << ',' << n << "_variance," << n << "_lower," << n << "_upper";
  }
  out << ",tau2_alpha,tau2_gamma,sigma2_w\n";
  for (const auto& r : result.rows) {
    out << r.replicate << ',' << estimator_name(r.spec) << ',' << format_double(r.estimate);
    for (auto m : methods) {
      auto k = std::size_t(m);
      out << ',' << format_double(r.variance[k]) << ',' << format_double(r.lower[k]) << ','
          << format_double(r.upper[k]);
    }
    if (r.vc)
      out << ',' << format_double(r.vc->tau2_alpha) << ',' << format_double(r.vc->tau2_gamma) << ','
          << format_double(r.vc->sigma2_w);
    else
      out << ",NA,NA,NA";
    out << '\n';
  }
}

namespace {

const std::vector<std::string> kSummaryBase{"scenario", "clusters",      "replicates", "estimator",        "target",
                                            "truth",    "n",             "failures",   "mean_estimate",    "mc_se",
                                            "relative_bias_pct", "bias", "empirical_variance"};
const std::vector<std::string> kMethodFields{"n", "mean_variance", "coverage", "power"};

}  // namespace

void write_summary_csv(const SimulationSummary& summary, std::ostream& out) {
  for (std::size_t i = 0; i < kSummaryBase.size(); ++i) out << (i ? "," : "") << kSummaryBase[i];
  for (const auto& m : summary.methods)
    for (const auto& f : kMethodFields) out << ',' << m << '_' << f;
  out << '\n';
  for (const auto& r : summary.rows) {
    out << csv_quote(summary.scenario) << ',' << summary.clusters << ',' << summary.replicates << ','
        << r.estimator << ',' << r.target << ',' << format_double(r.truth) << ',' << r.n << ','
        << r.failures << ',' << format_double(r.mean_estimate) << ',' << format_double(r.mc_se) << ','
        << format_double(r.relative_bias_pct) << ',' << format_double(r.bias) << ','
        << format_double(r.empirical_variance);
    for (const auto& m : summary.methods) {
      const auto& mm = r.methods.at(m);
      out << ',' << mm.n << ',' << format_double(mm.mean_variance) << ',' << format_double(mm.coverage) << ','
          << format_double(mm.power);
    }
    out << '\n';
  }
}

SimulationSummary read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("summary file is empty");
  strip_cr(line);
  auto header = split_csv_line(line);
  if (header.size() < kSummaryBase.size() || !std::equal(kSummaryBase.begin(), kSummaryBase.end(), header.begin()))
    throw ConfigError("summary header does not match the simulation summary layout");
  SimulationSummary sum;
  const std::size_t extra = header.size() - kSummaryBase.size();
  if (extra % kMethodFields.size() != 0) throw ConfigError("summary header has incomplete method columns");
  for (std::size_t m = 0; m < extra / kMethodFields.size(); ++m) {
    const auto& col = header[kSummaryBase.size() + m * kMethodFields.size()];
    if (col.size() < 3 || col.substr(col.size() - 2) != "_n") throw ConfigError("unexpected column " + col);
    const auto name = col.substr(0, col.size() - 2);
    for (std::size_t f = 0; f < kMethodFields.size(); ++f)
      if (header[kSummaryBase.size() + m * kMethodFields.size() + f] != name + "_" + kMethodFields[f])
        throw ConfigError("unexpected column " + header[kSummaryBase.size() + m * kMethodFields.size() + f]);
    sum.methods.push_back(name);
  }
  auto num = [](const std::string& s, const char* what) {
    if (s == "NA") return kNaN;
    double v = 0.0;
    if (!parse_double(s, v)) throw ConfigError(std::string("non-numeric ") + what + ": " + s);
    return v;
  };
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (is_blank(line)) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) throw ConfigError("summary line " + std::to_string(lineno) + " has wrong field count");
    sum.scenario = f[0];
    sum.clusters = int(num(f[1], "clusters"));
    sum.replicates = int(num(f[2], "replicates"));
    SummaryRow r;
    r.estimator = f[3];
    r.target = f[4];
    r.truth = num(f[5], "truth");
    r.n = std::size_t(num(f[6], "n"));
    r.failures = std::size_t(num(f[7], "failures"));
    r.mean_estimate = num(f[8], "mean_estimate");
    r.mc_se = num(f[9], "mc_se");
    r.relative_bias_pct = num(f[10], "relative_bias_pct");
    r.bias = num(f[11], "bias");
    r.empirical_variance = num(f[12], "empirical_variance");
    for (std::size_t m = 0; m < sum.methods.size(); ++m) {
      const std::size_t b = kSummaryBase.size() + m * kMethodFields.size();
      MethodMetrics mm;
      mm.n = std::size_t(num(f[b], "n"));
      mm.mean_variance = num(f[b + 1], "mean_variance");
      mm.coverage = num(f[b + 2], "coverage");
      mm.power = num(f[b + 3], "power");
      r.methods[sum.methods[m]] = mm;
    }
    sum.rows.push_back(std::move(r));
  }
  if (sum.rows.empty()) throw ConfigError("summary file has no estimator rows");
  return sum;
}

}  // namespace crxo
