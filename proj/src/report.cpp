#include "crxo/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "crxo/cells.hpp"
#include "crxo/errors.hpp"
#include "crxo/text_util.hpp"

namespace crxo {

using nlohmann::json;

AnalysisReport analyze_dataset(const TrialDataset& data, const std::vector<ModelSpec>& specs,
                               const std::vector<VarianceMethod>& methods, double level) {
  require_valid(data);
  AnalysisReport rep;
  rep.diagnostics = validate_dataset(data);
  rep.n_total = data.n_total();
  rep.level = level;
  const auto cells = summarize_cells(data);
  const bool balanced = balanced_within_clusters(cells);
  if (std::find(methods.begin(), methods.end(), VarianceMethod::Jackknife) != methods.end())
    require_jackknife_defined(cells);

  // One REML fit per mixed structure, shared by its weightings.
  std::map<Structure, VarianceComponents> vcs;
  std::map<Structure, std::vector<std::optional<VarianceComponents>>> loo;
  for (const auto& spec : specs) {
    if (auto why = inadmissibility(spec, balanced)) {
      rep.inadmissible.push_back({estimator_name(spec), *why});
      continue;
    }
    std::optional<VarianceComponents> vc;
    if (spec.mixed()) {
      if (!vcs.count(spec.structure)) vcs[spec.structure] = profile_reml_fit_cells(cells, spec.structure).vc;
      vc = vcs[spec.structure];
    }
    auto fit = fit_cells(cells, spec, vc);
    EstimatorResult er;
    er.spec = spec;
    er.target = target_estimand(spec);
    er.estimate = fit.delta;
    er.vc = fit.vc;
    for (auto m : methods) {
      VarianceEstimate v;
      switch (m) {
        case VarianceMethod::Model: v = model_based_variance(fit); break;
        case VarianceMethod::CR0: v = cr0_variance(fit); break;
        case VarianceMethod::Jackknife: {
          RefitPolicy policy;
          if (spec.mixed()) {
            if (!loo.count(spec.structure))
              loo[spec.structure] = leave_one_out_components(cells, spec.structure, vcs[spec.structure]);
            policy.kind = RefitPolicy::Kind::Supplied;
            policy.supplied = loo[spec.structure];
          }
          v = jackknife_variance_cells(cells, spec, policy);
          break;
        }
      }
      er.methods.push_back({m, v.value, confidence_interval(fit.delta, v.value, level, m)});
    }
    rep.results.push_back(std::move(er));
  }

  for (const auto& a : rep.results) {
    if (a.spec.weighting != Weighting::None) continue;
    for (const auto& b : rep.results) {
      if (b.spec.structure != a.spec.structure || b.spec.weighting == Weighting::None) continue;
      rep.sensitivity.push_back({structure_name(a.spec.structure), weighting_name(b.spec.weighting), a.estimate,
                                 b.estimate, b.estimate - a.estimate});
    }
  }
  return rep;
}

json report_to_json(const AnalysisReport& r) {
  json clusters = json::array();
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& c : r.diagnostics.clusters) {
    clusters.push_back({{"cluster_id", c.cluster_id},
                        {"sequence", c.sequence},
                        {"k1", c.k1},
                        {"k2", c.k2},
                        {"lambda", c.lambda}});
    lo = std::min(lo, c.lambda);
    hi = std::max(hi, c.lambda);
  }
  json diag = {{"clusters", r.diagnostics.clusters.size()},
               {"n_total", r.n_total},
               {"period_totals", {r.diagnostics.period_totals[0], r.diagnostics.period_totals[1]}},
               {"sequence_counts", {r.diagnostics.sequence_counts[0], r.diagnostics.sequence_counts[1]}},
               {"balanced_within_clusters", r.diagnostics.balanced_within_clusters},
               {"all_cells_equal", r.diagnostics.all_cells_equal},
               {"lambda_min", lo},
               {"lambda_max", hi},
               {"cluster_sizes", clusters}};
  json est = json::array();
  for (const auto& e : r.results) {
    json methods = json::object();
    for (const auto& m : e.methods)
      methods[variance_method_name(m.method)] = {{"variance", m.variance},
                                                 {"lower", m.interval.lower()},
                                                 {"upper", m.interval.upper()},
                                                 {"rejects_zero", m.interval.rejects_zero()}};
    json row = {{"estimator", estimator_name(e.spec)},
                {"structure", structure_name(e.spec.structure)},
                {"weighting", weighting_name(e.spec.weighting)},
                {"target", estimand_name(e.target)},
                {"estimate", e.estimate},
                {"variance", methods}};
    if (e.vc)
      row["variance_components"] = {{"tau2_alpha", e.vc->tau2_alpha},
                                    {"tau2_gamma", e.vc->tau2_gamma},
                                    {"sigma2_w", e.vc->sigma2_w}};
    est.push_back(row);
  }
  json inad = json::array();
  for (const auto& i : r.inadmissible) inad.push_back({{"estimator", i.estimator}, {"reason", i.reason}});
  json sens = json::array();
  for (const auto& s : r.sensitivity)
    sens.push_back({{"structure", s.structure},
                    {"weighting", s.weighting},
                    {"unweighted", s.unweighted},
                    {"weighted", s.weighted},
                    {"difference", s.difference}});
  return {{"level", r.level},
          {"diagnostics", diag},
          {"estimates", est},
          {"inadmissible", inad},
          {"sensitivity", sens}};
}

namespace {

std::vector<VarianceMethod> methods_of(const AnalysisReport& r) {
  std::vector<VarianceMethod> out;
  if (!r.results.empty())
    for (const auto& m : r.results.front().methods) out.push_back(m.method);
  return out;
}

std::string fixed(double x, int digits) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

}  // namespace

void write_report_csv(const AnalysisReport& r, std::ostream& out) {
  const auto methods = methods_of(r);
  out << "estimator,target,estimate";
  for (auto m : methods) {
    auto n = variance_method_name(m);
    out << ',' << n << "_variance," << n << "_lower," << n << "_upper";
  }
  out << ",status\n";
  for (const auto& e : r.results) {
    out << estimator_name(e.spec) << ',' << estimand_name(e.target) << ',' << format_double(e.estimate);
    for (const auto& m : e.methods)
      out << ',' << format_double(m.variance) << ',' << format_double(m.interval.lower()) << ','
          << format_double(m.interval.upper());
    out << ",ok\n";
  }
  for (const auto& i : r.inadmissible) {
    out << i.estimator << ",,NA";
    for (std::size_t k = 0; k < methods.size(); ++k) out << ",NA,NA,NA";
    out << ',' << csv_quote("inadmissible: " + i.reason) << '\n';
  }
}

void write_report_markdown(const AnalysisReport& r, std::ostream& out) {
  const auto& d = r.diagnostics;
  out << "## Dataset\n\n"
      << "- clusters: " << d.clusters.size() << " (sequence 1: " << d.sequence_counts[1]
      << ", sequence 0: " << d.sequence_counts[0] << ")\n"
      << "- individuals: " << r.n_total << " (period 1: " << d.period_totals[0] << ", period 2: " << d.period_totals[1]
      << ")\n"
      << "- equal cluster-period sizes within clusters: " << (d.balanced_within_clusters ? "yes" : "no") << "\n";
  if (!d.clusters.empty()) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& c : d.clusters) {
      lo = std::min(lo, c.lambda);
      hi = std::max(hi, c.lambda);
    }
    out << "- K2/K1 range: " << fixed(lo, 3) << " to " << fixed(hi, 3) << "\n";
  }
  const auto methods = methods_of(r);
  out << "\n## Estimates (" << fixed(100 * r.level, 0) << "% CI)\n\n| estimator | target | estimate |";
  for (auto m : methods) out << ' ' << variance_method_name(m) << " CI |";
  out << "\n|---|---|---|";
  for (std::size_t k = 0; k < methods.size(); ++k) out << "---|";
  out << '\n';
  for (const auto& e : r.results) {
    out << "| " << estimator_name(e.spec) << " | " << estimand_name(e.target) << " | " << fixed(e.estimate, 4)
        << " |";
    for (const auto& m : e.methods)
      out << " (" << fixed(m.interval.lower(), 4) << ", " << fixed(m.interval.upper(), 4) << ") |";
    out << '\n';
  }
  if (!r.inadmissible.empty()) {
    out << "\n## Not estimated\n\n";
    for (const auto& i : r.inadmissible) out << "- " << i.reason << '\n';
  }
  if (!r.sensitivity.empty()) {
    out << "\n## Sensitivity (weighted minus unweighted)\n\n| structure | weighting | unweighted | weighted | "
           "difference |\n|---|---|---|---|---|\n";
    for (const auto& s : r.sensitivity)
      out << "| " << s.structure << " | " << s.weighting << " | " << fixed(s.unweighted, 4) << " | "
          << fixed(s.weighted, 4) << " | " << fixed(s.difference, 4) << " |\n";
    out << "\nLarge differences suggest informative cluster or period sizes; the weighted and unweighted "
           "estimators then target different estimands.\n";
  }
}

void write_summary_markdown(const SimulationSummary& s, std::ostream& out) {
  if (s.rows.empty()) throw ConfigError("summary has no estimator rows");
  out << "## " << s.scenario << " (I = " << s.clusters << ", " << s.replicates << " replicates)\n\n";
  out << "| estimator | target | truth | mean | rel. bias % | band | emp. var |";
  for (const auto& m : s.methods) out << ' ' << m << " var | " << m << " cover | " << m << " power |";
  out << "\n|---|---|---|---|---|---|---|";
  for (std::size_t k = 0; k < s.methods.size(); ++k) out << "---|---|---|";
  out << '\n';
  for (const auto& r : s.rows) {
    std::string band;
    if (std::isnan(r.relative_bias_pct))
      band = "abs bias " + fixed(r.bias, 4);
    else
      band = std::abs(r.relative_bias_pct) < 5.0 ? "ok" : "outside +/-5%";
    out << "| " << r.estimator << " | " << r.target << " | " << fixed(r.truth, 4) << " | " << fixed(r.mean_estimate, 4)
        << " | " << fixed(r.relative_bias_pct, 2) << " | " << band << " | " << fixed(r.empirical_variance, 5) << " |";
    for (const auto& m : s.methods) {
      auto it = r.methods.find(m);
      if (it == r.methods.end()) {
        out << " NA | NA | NA |";
        continue;
      }
      out << ' ' << fixed(it->second.mean_variance, 5) << " | " << fixed(it->second.coverage, 3) << " | "
          << fixed(it->second.power, 3) << " |";
    }
    out << '\n';
  }
}

}  // namespace crxo
