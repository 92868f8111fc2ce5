#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbpnet/errors.hpp"
#include "sbpnet/heavy_traffic.hpp"
#include "sbpnet/network.hpp"
#include "sbpnet/policy.hpp"
#include "sbpnet/simulator.hpp"

namespace sbpnet {

using Json = nlohmann::json;

// Everything one config file describes. Classes, stations and policy labels
// in the file are 1-based.
struct Config {
  std::string name;
  NetworkSpec spec;
  std::optional<PriorityPolicy> policy;
  std::optional<Vector> weights;
  SimConfig sim;
};

class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<Diagnostic> diags)
      : InvalidArgument(diags.empty() ? "invalid config" : diags.front().path + ": " + diags.front().message),
        diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

namespace detail {

class ConfigReader {
 public:
  std::vector<Diagnostic> diags;

  void error(const std::string& path, const std::string& msg) { diags.push_back({path, msg}); }

  std::optional<double> number(const Json& obj, const char* key, const std::string& path, bool required) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing");
      return std::nullopt;
    }
    const Json& v = obj.at(key);
    if (!v.is_number()) {
      error(path + "." + key, "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  // A 1-based positive integer label converted to 0-based.
  std::optional<int> index(const Json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 1) {
      error(path, "expected a positive integer label");
      return std::nullopt;
    }
    return static_cast<int>(v.get<long long>()) - 1;
  }

  // {family, scv} or {family: "gamma", shape}.
  DistributionSpec distribution(const Json& v, const std::string& path) {
    DistributionSpec d;
    if (!v.is_object()) {
      error(path, "expected an object with 'family'");
      return d;
    }
    const std::string fam = v.value("family", "");
    auto family = parse_family(fam);
    if (!family) {
      error(path + ".family", "unknown family '" + fam + "'");
      return d;
    }
    d.family = *family;
    switch (d.family) {
      case Family::exponential: d.scv = 1.0; break;
      case Family::deterministic: d.scv = 0.0; break;
      default: break;
    }
    if (v.contains("shape")) {
      if (d.family != Family::gamma) {
        error(path + ".shape", "only gamma takes a shape");
      } else if (auto a = number(v, "shape", path, true)) {
        if (*a > 0)
          d.scv = 1.0 / *a;
        else
          error(path + ".shape", "must be > 0");
      }
    } else if (auto s = number(v, "scv", path, d.family == Family::gamma || d.family == Family::hyperexponential2)) {
      d.scv = *s;
    }
    if (auto err = check_distribution(d)) error(path, *err);
    return d;
  }
};

}  // namespace detail

inline Config parse_config(const Json& root) {
  detail::ConfigReader rd;
  Config cfg;
  if (!root.is_object()) throw ConfigError(std::vector<Diagnostic>{{"", "config must be a JSON object"}});
  cfg.name = root.value("name", "");

  if (!root.contains("stations") || !root["stations"].is_array() || root["stations"].empty())
    rd.error("stations", "expected a non-empty array");
  else
    cfg.spec.num_stations = static_cast<int>(root["stations"].size());

  if (!root.contains("classes") || !root["classes"].is_array() || root["classes"].empty()) {
    rd.error("classes", "expected a non-empty array");
    throw ConfigError(rd.diags);
  }
  const auto& classes = root["classes"];
  const int K = static_cast<int>(classes.size());
  auto& spec = cfg.spec;
  spec.station_of.assign(K, 0);
  spec.arrival_rate = Vector::Zero(K);
  spec.mean_service = Vector::Ones(K);
  spec.arrival_dist.assign(K, DistributionSpec::exponential());
  spec.service_dist.assign(K, DistributionSpec::exponential());
  for (int k = 0; k < K; ++k) {
    const std::string path = "classes[" + label(k) + "]";
    const Json& c = classes[k];
    if (!c.is_object()) {
      rd.error(path, "expected an object");
      continue;
    }
    if (!c.contains("station"))
      rd.error(path + ".station", "missing");
    else if (auto s = rd.index(c["station"], path + ".station"))
      spec.station_of[k] = *s;
    spec.arrival_rate(k) = rd.number(c, "arrival_rate", path, false).value_or(0.0);
    if (auto m = rd.number(c, "mean_service", path, true)) spec.mean_service(k) = *m;
    const char* service_key = c.contains("service_dist") ? "service_dist" : "dist";
    if (c.contains(service_key)) spec.service_dist[k] = rd.distribution(c[service_key], path + "." + service_key);
    if (c.contains("arrival_dist")) spec.arrival_dist[k] = rd.distribution(c["arrival_dist"], path + ".arrival_dist");
  }

  spec.routing = Matrix::Zero(K, K);
  if (root.contains("routing")) {
    const auto& r = root["routing"];
    if (!r.is_array() || static_cast<int>(r.size()) != K) {
      rd.error("routing", "expected a " + std::to_string(K) + "x" + std::to_string(K) + " array");
    } else {
      for (int k = 0; k < K; ++k) {
        const std::string path = "routing[" + label(k) + "]";
        if (!r[k].is_array() || static_cast<int>(r[k].size()) != K) {
          rd.error(path, "expected " + std::to_string(K) + " entries");
          continue;
        }
        for (int l = 0; l < K; ++l) {
          if (!r[k][l].is_number())
            rd.error(path + "[" + label(l) + "]", "expected a number");
          else
            spec.routing(k, l) = r[k][l].get<double>();
        }
      }
    }
  }

  if (root.contains("stability_constraints")) {
    const auto& sc = root["stability_constraints"];
    for (std::size_t i = 0; sc.is_array() && i < sc.size(); ++i) {
      const std::string path = "stability_constraints[" + std::to_string(i + 1) + "]";
      StabilityConstraint c;
      c.name = sc[i].value("name", "constraint " + std::to_string(i + 1));
      if (!sc[i].contains("classes") || !sc[i]["classes"].is_array()) {
        rd.error(path + ".classes", "expected an array of class labels");
        continue;
      }
      for (const auto& v : sc[i]["classes"])
        if (auto k = rd.index(v, path + ".classes")) c.classes.push_back(*k);
      spec.stability_constraints.push_back(std::move(c));
    }
    if (!sc.is_array()) rd.error("stability_constraints", "expected an array");
  }

  // Optional: mean_service values describe a unit-load profile scaled to these
  // per-station loads.
  if (root.contains("load") && rd.diags.empty()) {
    const auto& ld = root["load"];
    if (!ld.is_array() || static_cast<int>(ld.size()) != spec.num_stations) {
      rd.error("load", "expected one load per station");
    } else {
      Vector rho(spec.num_stations);
      for (int j = 0; j < spec.num_stations; ++j) rho(j) = ld[j].is_number() ? ld[j].get<double>() : NAN;
      try {
        spec = build_load_profile(spec, rho);
      } catch (const Error& e) {
        rd.error("load", e.what());
      }
    }
  }

  if (root.contains("policy")) {
    const auto& p = root["policy"];
    if (p.is_string()) {
      try {
        cfg.policy = parse_policy(p.get<std::string>());
      } catch (const std::exception& e) {
        rd.error("policy", e.what());
      }
    } else if (p.is_array()) {
      PriorityPolicy pol;
      for (std::size_t j = 0; j < p.size(); ++j) {
        const std::string path = "policy[" + std::to_string(j + 1) + "]";
        std::vector<int> order;
        if (!p[j].is_array()) rd.error(path, "expected an array of class labels");
        for (std::size_t i = 0; p[j].is_array() && i < p[j].size(); ++i)
          if (auto k = rd.index(p[j][i], path)) order.push_back(*k);
        pol.order.push_back(std::move(order));
      }
      cfg.policy = std::move(pol);
    } else {
      rd.error("policy", "expected per-station arrays of class labels");
    }
  }

  if (root.contains("weights")) {
    const auto& w = root["weights"];
    if (!w.is_array() || static_cast<int>(w.size()) != K) {
      rd.error("weights", "expected " + std::to_string(K) + " numbers");
    } else {
      Vector v(K);
      for (int k = 0; k < K; ++k) v(k) = w[k].is_number() ? w[k].get<double>() : NAN;
      cfg.weights = v;
    }
  }

  if (root.contains("sim")) {
    const auto& s = root["sim"];
    auto& sim = cfg.sim;
    if (auto v = rd.number(s, "arrivals", "sim", false)) {
      if (*v >= 1) sim.arrivals = static_cast<std::uint64_t>(*v);
      else rd.error("sim.arrivals", "must be >= 1");
    }
    if (auto v = rd.number(s, "replications", "sim", false)) sim.replications = static_cast<int>(*v);
    if (s.contains("seed")) {
      if (s["seed"].is_number_unsigned() || s["seed"].is_number_integer())
        sim.seed = s["seed"].get<std::uint64_t>();
      else
        rd.error("sim.seed", "expected a non-negative integer");
    }
    if (auto v = rd.number(s, "warmup_frac", "sim", false)) sim.warmup_frac = *v;
    if (auto v = rd.number(s, "threads", "sim", false)) sim.threads = static_cast<int>(*v);
    if (s.contains("joints")) {
      for (std::size_t i = 0; i < s["joints"].size(); ++i) {
        const auto& pr = s["joints"][i];
        const std::string path = "sim.joints[" + std::to_string(i + 1) + "]";
        if (!pr.is_array() || pr.size() != 2) {
          rd.error(path, "expected a pair of class labels");
          continue;
        }
        auto a = rd.index(pr[0], path), b = rd.index(pr[1], path);
        if (a && b) sim.joint_pairs.emplace_back(*a, *b);
      }
    }
  }

  if (rd.diags.empty()) {
    auto more = validate_spec(spec);
    rd.diags.insert(rd.diags.end(), more.begin(), more.end());
  }
  if (rd.diags.empty() && cfg.policy) {
    auto more = validate_policy(spec, *cfg.policy);
    rd.diags.insert(rd.diags.end(), more.begin(), more.end());
  }
  if (!rd.diags.empty()) throw ConfigError(rd.diags);
  return cfg;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Config parse_config_text(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::vector<Diagnostic>{{"", std::string("JSON parse error: ") + e.what()}});
  }
  return parse_config(root);
}

inline Config load_config(const std::string& path) { return parse_config_text(read_file(path)); }

inline Json distribution_to_json(const DistributionSpec& d) { return {{"family", family_name(d.family)}, {"scv", d.scv}}; }

// Inverse of parse_config (means written as absolute values, no `load` block).
inline Json config_to_json(const Config& cfg) {
  const auto& spec = cfg.spec;
  Json root;
  if (!cfg.name.empty()) root["name"] = cfg.name;
  root["stations"] = Json::array();
  for (int j = 0; j < spec.num_stations; ++j) root["stations"].push_back({{"name", "station " + label(j)}});
  root["classes"] = Json::array();
  for (int k = 0; k < spec.num_classes(); ++k) {
    Json c{{"station", spec.station_of[k] + 1},
           {"arrival_rate", spec.arrival_rate(k)},
           {"mean_service", spec.mean_service(k)},
           {"service_dist", distribution_to_json(spec.service_dist[k])}};
    if (spec.arrival_rate(k) > 0) c["arrival_dist"] = distribution_to_json(spec.arrival_dist[k]);
    root["classes"].push_back(c);
  }
  root["routing"] = Json::array();
  for (int k = 0; k < spec.num_classes(); ++k) {
    Json row = Json::array();
    for (int l = 0; l < spec.num_classes(); ++l) row.push_back(spec.routing(k, l));
    root["routing"].push_back(row);
  }
  if (cfg.policy) {
    root["policy"] = Json::array();
    for (const auto& ord : cfg.policy->order) {
      Json row = Json::array();
      for (int k : ord) row.push_back(k + 1);
      root["policy"].push_back(row);
    }
  }
  if (!spec.stability_constraints.empty()) {
    root["stability_constraints"] = Json::array();
    for (const auto& c : spec.stability_constraints) {
      Json cls = Json::array();
      for (int k : c.classes) cls.push_back(k + 1);
      root["stability_constraints"].push_back({{"name", c.name}, {"classes", cls}});
    }
  }
  if (cfg.weights) root["weights"] = std::vector<double>(cfg.weights->data(), cfg.weights->data() + cfg.weights->size());
  Json sim{{"arrivals", cfg.sim.arrivals},
           {"replications", cfg.sim.replications},
           {"seed", cfg.sim.seed},
           {"warmup_frac", cfg.sim.warmup_frac}};
  if (!cfg.sim.joint_pairs.empty()) {
    sim["joints"] = Json::array();
    for (auto [a, b] : cfg.sim.joint_pairs) sim["joints"].push_back({a + 1, b + 1});
  }
  root["sim"] = sim;
  return root;
}

}  // namespace sbpnet
