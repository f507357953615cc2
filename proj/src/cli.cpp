#include "crxo/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "crxo/config_io.hpp"
#include "crxo/errors.hpp"
#include "crxo/report.hpp"
#include "crxo/text_util.hpp"

namespace crxo {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << content;
  if (!f) throw IoError("write failed for " + p.string());
}

struct SimulateArgs {
  std::string scenario, out = ".";
  std::optional<int> reps, threads;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto cfg = load_scenario(a.scenario);
  if (a.reps) cfg.replicates = *a.reps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  cfg.check();
  auto result = run_scenario(cfg);
  auto summary = summarize_metrics(cfg, result);
  std::filesystem::path dir(a.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream reps, sum;
  write_replicate_csv(result, cfg.methods, reps);
  write_summary_csv(summary, sum);
  write_file(dir / "replicates.csv", reps.str());
  write_file(dir / "summary.csv", sum.str());
  std::ostringstream fails;
  fails << "replicate,estimator,stage,message\n";
  for (const auto& f : result.failures)
    fails << f.replicate << ',' << f.estimator << ',' << f.stage << ',' << csv_quote(f.message) << '\n';
  write_file(dir / "failures.csv", fails.str());
  out << "scenario " << cfg.name << ": " << result.rows.size() << " estimates, " << result.failures.size()
      << " failures; wrote " << (dir / "summary.csv").string() << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string data, model = "all", weights, variance = "model,cr0,jackknife", format = "csv";
  double level = 0.95;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  auto data = load_trial_csv(a.data);
  std::vector<Structure> structures;
  if (a.model == "all")
    structures = {Structure::IEE, Structure::EME, Structure::NEME, Structure::FE};
  else
    structures = {parse_structure(a.model)};
  std::string weights = a.weights.empty() ? (a.model == "all" ? "all" : "none") : a.weights;
  std::vector<Weighting> ws;
  if (weights == "all")
    ws = {Weighting::None, Weighting::ClusterPeriod, Weighting::Cluster, Weighting::Period};
  else
    for (const auto& w : split_list(weights)) ws.push_back(parse_weighting(w));
  std::vector<ModelSpec> specs;
  for (auto s : structures)
    for (auto w : ws) specs.push_back({s, w});
  std::vector<VarianceMethod> methods;
  for (const auto& m : split_list(a.variance)) methods.push_back(parse_variance_method(m));
  if (!(a.level > 0 && a.level < 1)) throw ConfigError("level must lie in (0, 1)");

  auto rep = analyze_dataset(data, specs, methods, a.level);
  if (a.format == "json")
    out << report_to_json(rep).dump(2) << '\n';
  else if (a.format == "csv")
    write_report_csv(rep, out);
  else if (a.format == "markdown")
    write_report_markdown(rep, out);
  else
    throw ConfigError("unknown format '" + a.format + "'");
  return 0;
}

struct EstimandArgs {
  std::string dgp, format = "text";
  std::size_t draws = 0;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;
};

int cmd_estimand(const EstimandArgs& a, std::ostream& out) {
  auto dgp = load_dgp(a.dgp);
  if (!(a.tolerance > 0)) throw ConfigError("tolerance must be > 0");
  if (a.draws == 1) throw ConfigError("draws must be 0 (exact) or >= 2");
  auto rep = classify_informative_sizes(dgp, a.tolerance, a.draws, a.seed);
  const char* names[] = {"iATE", "cpATE", "cATE", "pATE"};
  auto flag_json = [](const SizeFlag& f) {
    return nlohmann::json{{"state", ternary_name(f.state)}, {"difference", f.difference}, {"se", f.se}};
  };
  if (a.format == "json") {
    nlohmann::json j;
    j["exact"] = rep.exact;
    j["tolerance"] = rep.tolerance;
    for (int k = 0; k < 4; ++k) j["estimands"][names[k]] = {{"value", rep.values[k]}, {"se", rep.se[k]}};
    j["flags"] = {{"ICS", flag_json(rep.ics)},
                  {"IPS", flag_json(rep.ips)},
                  {"ICPS_c", flag_json(rep.icps_c)},
                  {"ICPS_p", flag_json(rep.icps_p)},
                  {"ICPS", ternary_name(rep.icps())}};
    out << j.dump(2) << '\n';
    return 0;
  }
  if (a.format != "text") throw ConfigError("unknown format '" + a.format + "'");
  out << (rep.exact ? "exact enumeration\n" : "Monte Carlo (" + std::to_string(a.draws) + " draws)\n");
  out << std::setprecision(10);
  for (int k = 0; k < 4; ++k) {
    out << names[k] << " = " << rep.values[k];
    if (!rep.exact) out << " (se " << rep.se[k] << ")";
    out << '\n';
  }
  auto line = [&](const char* label, const SizeFlag& f) {
    out << label << ": " << ternary_name(f.state) << " (difference " << f.difference;
    if (!rep.exact) out << ", se " << f.se;
    out << ")\n";
  };
  line("ICS  (iATE - cATE)", rep.ics);
  line("IPS  (iATE - pATE)", rep.ips);
  line("ICPS (cpATE - cATE)", rep.icps_c);
  line("ICPS (cpATE - pATE)", rep.icps_p);
  out << "ICPS: " << ternary_name(rep.icps()) << '\n';
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& format, std::ostream& out) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path);
  auto summary = read_summary_csv(in);
  if (format == "markdown")
    write_summary_markdown(summary, out);
  else if (format == "csv")
    write_summary_csv(summary, out);
  else
    throw ConfigError("unknown format '" + format + "'");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Estimators, estimands and simulations for two-period cluster randomized crossover trials", "crxo"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "run a simulation scenario");
  s->add_option("--scenario", sim.scenario, "scenario JSON file")->required();
  s->add_option("--reps", sim.reps, "override the replicate count");
  s->add_option("--seed", sim.seed, "override the master seed");
  s->add_option("--threads", sim.threads, "worker threads");
  s->add_option("--out", sim.out, "output directory");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "fit estimators to a trial CSV");
  a->add_option("--data", an.data, "trial CSV")->required();
  a->add_option("--model", an.model, "iee, eme, neme, fe or all");
  a->add_option("--weights", an.weights, "none, cpw, cw, pw, a comma list, or all");
  a->add_option("--variance", an.variance, "comma list of model, cr0, jackknife");
  a->add_option("--out", an.format, "json, csv or markdown");
  a->add_option("--level", an.level, "confidence level");

  EstimandArgs es;
  auto* e = app.add_subcommand("estimand", "superpopulation estimands and informative-size flags");
  e->add_option("--dgp", es.dgp, "DGP JSON file")->required();
  e->add_option("--draws", es.draws, "Monte Carlo draws (0: exact enumeration)");
  e->add_option("--seed", es.seed, "Monte Carlo seed");
  e->add_option("--tolerance", es.tolerance, "difference tolerance");
  e->add_option("--format", es.format, "text or json");

  std::string rep_in, rep_format = "markdown";
  auto* r = app.add_subcommand("report", "render a simulation summary");
  r->add_option("--in", rep_in, "summary CSV")->required();
  r->add_option("--format", rep_format, "markdown or csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (a->parsed()) return cmd_analyze(an, out);
    if (e->parsed()) return cmd_estimand(es, out);
    if (r->parsed()) return cmd_report(rep_in, rep_format, out);
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return 3;
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return 4;
  }
  return 2;
}

}  // namespace crxo
