#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crxo/config_io.hpp"
#include "crxo/errors.hpp"
#include "crxo/plim.hpp"
#include "crxo/report.hpp"

namespace py = pybind11;
using namespace crxo;

namespace {

TrialDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  return read_trial_csv(in);
}

py::dict fit_dict(const PointFit& f) {
  py::dict d;
  d["estimator"] = estimator_name(f.spec);
  d["delta"] = f.delta;
  std::vector<double> theta(f.theta.data(), f.theta.data() + f.theta.size());
  d["theta"] = theta;
  d["theta_names"] = f.theta_names;
  if (f.vc) d["vc"] = py::make_tuple(f.vc->tau2_alpha, f.vc->tau2_gamma, f.vc->sigma2_w);
  else d["vc"] = py::none();
  return d;
}

std::optional<VarianceComponents> to_vc(const std::optional<std::tuple<double, double, double>>& t) {
  if (!t) return std::nullopt;
  return VarianceComponents{std::get<0>(*t), std::get<1>(*t), std::get<2>(*t)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Estimators, estimands and simulation for two-period cluster randomized crossover trials";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<TrialDataset>(m, "TrialDataset")
      .def_property_readonly("n_clusters", &TrialDataset::n_clusters)
      .def_property_readonly("n_total", &TrialDataset::n_total)
      .def("to_csv", [](const TrialDataset& d) {
        std::ostringstream os;
        write_trial_csv(d, os);
        return os.str();
      })
      .def("__eq__", [](const TrialDataset& a, const TrialDataset& b) { return a == b; });

  m.def("load_trial_csv", &load_trial_csv, py::arg("path"));
  m.def("read_trial_csv_text", &dataset_from_csv, py::arg("text"));
  m.def("validate", [](const TrialDataset& d) { return validate_dataset(d).violations; });

  m.def(
      "fit",
      [](const TrialDataset& d, const std::string& estimator, std::optional<std::tuple<double, double, double>> vc) {
        return fit_dict(fit_point_estimate(d, parse_estimator(estimator), to_vc(vc)));
      },
      py::arg("data"), py::arg("estimator"), py::arg("vc") = py::none());

  m.def(
      "variance",
      [](const TrialDataset& d, const std::string& estimator, const std::string& method) {
        const auto spec = parse_estimator(estimator);
        switch (parse_variance_method(method)) {
          case VarianceMethod::Model: return model_based_variance(fit_point_estimate(d, spec)).value;
          case VarianceMethod::CR0: return cr0_variance(fit_point_estimate(d, spec)).value;
          case VarianceMethod::Jackknife: return jackknife_variance(d, spec).value;
        }
        return 0.0;
      },
      py::arg("data"), py::arg("estimator"), py::arg("method"));

  m.def(
      "analyze_json",
      [](const TrialDataset& d, const std::vector<std::string>& estimators, const std::vector<std::string>& methods,
         double level) {
        std::vector<ModelSpec> specs;
        for (const auto& e : estimators) specs.push_back(parse_estimator(e));
        std::vector<VarianceMethod> ms;
        for (const auto& s : methods) ms.push_back(parse_variance_method(s));
        return report_to_json(analyze_dataset(d, specs, ms, level)).dump();
      },
      py::arg("data"), py::arg("estimators"), py::arg("methods"), py::arg("level") = 0.95);

  m.def(
      "estimands_json",
      [](const std::string& dgp_json, std::size_t draws, std::uint64_t seed, double tolerance) {
        auto dgp = parse_dgp(nlohmann::json::parse(dgp_json));
        auto rep = classify_informative_sizes(dgp, tolerance, draws, seed);
        nlohmann::json j;
        const char* names[] = {"iATE", "cpATE", "cATE", "pATE"};
        for (int k = 0; k < 4; ++k) j["values"][names[k]] = rep.values[k];
        for (int k = 0; k < 4; ++k) j["se"][names[k]] = rep.se[k];
        j["exact"] = rep.exact;
        j["ICS"] = ternary_name(rep.ics.state);
        j["IPS"] = ternary_name(rep.ips.state);
        j["ICPS"] = ternary_name(rep.icps());
        return j.dump();
      },
      py::arg("dgp_json"), py::arg("draws") = 0, py::arg("seed") = 1, py::arg("tolerance") = 1e-9);

  m.def(
      "probability_limit",
      [](const std::string& estimator, const std::string& dgp_json, std::tuple<double, double, double> vc,
         std::size_t draws, std::uint64_t seed) {
        return probability_limit(parse_estimator(estimator), parse_dgp(nlohmann::json::parse(dgp_json)),
                                 *to_vc(vc), draws, seed);
      },
      py::arg("estimator"), py::arg("dgp_json"), py::arg("vc"), py::arg("draws") = 0, py::arg("seed") = 1);

  m.def(
      "generate_trial",
      [](const std::string& dgp_json, int clusters, std::uint64_t seed) {
        auto g = generate_trial(parse_dgp(nlohmann::json::parse(dgp_json)), clusters, seed);
        py::dict truth;
        const char* names[] = {"iATE", "cpATE", "cATE", "pATE"};
        for (int k = 0; k < 4; ++k) truth[names[k]] = finite_wate(g.population, EstimandKind(k));
        return py::make_tuple(g.data, truth);
      },
      py::arg("dgp_json"), py::arg("clusters"), py::arg("seed"));

  m.def(
      "simulate_summary_csv",
      [](const std::string& scenario_json, const std::string& base_dir, std::optional<int> replicates,
         std::optional<std::uint64_t> seed, std::optional<int> threads) {
        auto cfg = parse_scenario(nlohmann::json::parse(scenario_json), base_dir);
        if (replicates) cfg.replicates = *replicates;
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        cfg.check();
        ScenarioResult res;
        {
          py::gil_scoped_release release;
          res = run_scenario(cfg);
        }
        std::ostringstream os;
        write_summary_csv(summarize_metrics(cfg, res), os);
        return os.str();
      },
      py::arg("scenario_json"), py::arg("base_dir") = ".", py::arg("replicates") = py::none(),
      py::arg("seed") = py::none(), py::arg("threads") = py::none());
}
