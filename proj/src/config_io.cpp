#include "crxo/config_io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "crxo/errors.hpp"

namespace crxo {

using nlohmann::json;

namespace {

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

std::array<double, 2> pair_or_scalar(const json& j, const std::string& what) {
  if (j.is_number()) {
    double v = j.get<double>();
    return {v, v};
  }
  if (j.is_array() && j.size() == 2) return {number(j[0], what), number(j[1], what)};
  throw ConfigError(what + " must be a number or a two-element array");
}

SizeSpec parse_size(const json& j) {
  only_keys(j, {"kind", "mean", "shared"}, "size");
  SizeSpec s;
  const std::string kind = j.value("kind", "poisson");
  if (kind == "fixed")
    s.kind = SizeSpec::Kind::Fixed;
  else if (kind == "poisson")
    s.kind = SizeSpec::Kind::Poisson;
  else if (kind == "poisson_two_stage")
    s.kind = SizeSpec::Kind::PoissonTwoStage;
  else
    throw ConfigError("unknown size kind '" + kind + "'");
  if (!j.contains("mean")) throw ConfigError("size needs a mean");
  s.mean = pair_or_scalar(j["mean"], "size mean");
  const bool default_shared = s.kind != SizeSpec::Kind::PoissonTwoStage && s.mean[0] == s.mean[1];
  if (j.contains("shared")) {
    if (!j["shared"].is_boolean()) throw ConfigError("size shared must be true or false");
    s.shared = j["shared"].get<bool>();
  } else {
    s.shared = default_shared;
  }
  return s;
}

const char* size_kind_name(SizeSpec::Kind k) {
  switch (k) {
    case SizeSpec::Kind::Fixed: return "fixed";
    case SizeSpec::Kind::Poisson: return "poisson";
    case SizeSpec::Kind::PoissonTwoStage: return "poisson_two_stage";
  }
  return "?";
}

}  // namespace

DgpSpec parse_dgp(const json& j) {
  only_keys(j, {"period_effects", "variance", "subpopulations"}, "dgp");
  DgpSpec d;
  if (j.contains("period_effects")) d.period_effects = pair_or_scalar(j["period_effects"], "period_effects");
  if (j.contains("variance")) {
    const auto& v = j["variance"];
    only_keys(v, {"tau2_alpha", "tau2_gamma", "sigma2_w"}, "variance");
    if (v.contains("tau2_alpha")) d.variance.tau2_alpha = number(v["tau2_alpha"], "tau2_alpha");
    if (v.contains("tau2_gamma")) d.variance.tau2_gamma = number(v["tau2_gamma"], "tau2_gamma");
    if (v.contains("sigma2_w")) d.variance.sigma2_w = number(v["sigma2_w"], "sigma2_w");
  }
  if (!j.contains("subpopulations") || !j["subpopulations"].is_array())
    throw ConfigError("dgp needs a subpopulations array");
  for (const auto& s : j["subpopulations"]) {
    only_keys(s, {"probability", "effect", "size", "label"}, "subpopulation");
    Subpopulation sp;
    sp.probability = s.contains("probability") ? number(s["probability"], "probability") : 1.0;
    if (!s.contains("effect")) throw ConfigError("subpopulation needs an effect");
    sp.effect = pair_or_scalar(s["effect"], "effect");
    if (!s.contains("size")) throw ConfigError("subpopulation needs a size");
    sp.size = parse_size(s["size"]);
    d.subpopulations.push_back(sp);
  }
  d.check();
  return d;
}

json dgp_to_json(const DgpSpec& d) {
  json subs = json::array();
  for (const auto& s : d.subpopulations)
    subs.push_back({{"probability", s.probability},
                    {"effect", {s.effect[0], s.effect[1]}},
                    {"size",
                     {{"kind", size_kind_name(s.size.kind)},
                      {"mean", {s.size.mean[0], s.size.mean[1]}},
                      {"shared", s.size.shared}}}});
  return {{"period_effects", {d.period_effects[0], d.period_effects[1]}},
          {"variance",
           {{"tau2_alpha", d.variance.tau2_alpha},
            {"tau2_gamma", d.variance.tau2_gamma},
            {"sigma2_w", d.variance.sigma2_w}}},
          {"subpopulations", subs}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

DgpSpec load_dgp(const std::string& path) { return parse_dgp(read_json_file(path)); }

ScenarioConfig parse_scenario(const json& j, const std::string& base_dir) {
  only_keys(j,
            {"name", "clusters", "replicates", "seed", "dgp", "dgp_file", "estimators", "variance_methods", "level",
             "targets", "truths", "threads"},
            "scenario");
  ScenarioConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("clusters")) c.clusters = j["clusters"].get<int>();
    if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("level")) c.level = number(j["level"], "level");
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("scenario field has the wrong type: ") + e.what());
  }
  if (j.contains("dgp") == j.contains("dgp_file")) throw ConfigError("scenario needs exactly one of dgp or dgp_file");
  if (j.contains("dgp")) {
    c.dgp = parse_dgp(j["dgp"]);
  } else {
    std::filesystem::path p = j["dgp_file"].get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.dgp = load_dgp(p.string());
  }
  if (j.contains("estimators")) {
    const auto& e = j["estimators"];
    if (e.is_string()) {
      const auto s = e.get<std::string>();
      if (s == "all")
        c.estimators = all_model_specs();
      else if (s != "grid")
        throw ConfigError("estimators must be \"grid\", \"all\" or a list of names");
      if (s == "all") {
        std::vector<ModelSpec> keep;
        for (const auto& m : c.estimators)
          if (!inadmissibility(m, c.dgp.sizes_equal_within_clusters())) keep.push_back(m);
        c.estimators = keep;
      }
    } else if (e.is_array()) {
      for (const auto& n : e) c.estimators.push_back(parse_estimator(n.get<std::string>()));
    } else {
      throw ConfigError("estimators must be a string or an array");
    }
  }
  if (j.contains("variance_methods")) {
    c.methods.clear();
    for (const auto& m : j["variance_methods"]) c.methods.push_back(parse_variance_method(m.get<std::string>()));
  }
  if (j.contains("targets")) {
    for (const auto& [k, v] : j["targets"].items()) c.targets[estimator_name(parse_estimator(k))] = parse_estimand(v.get<std::string>());
  }
  if (j.contains("truths")) {
    EstimandValues t = superpop_wate_exact(c.dgp);
    for (const auto& [k, v] : j["truths"].items()) t[std::size_t(parse_estimand(k))] = number(v, "truth");
    c.truths = t;
  }
  c.check();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  auto j = read_json_file(path);
  auto base = std::filesystem::path(path).parent_path().string();
  return parse_scenario(j, base.empty() ? "." : base);
}

}  // namespace crxo
