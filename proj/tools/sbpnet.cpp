// sbpnet: heavy-traffic analysis and simulation of multiclass queueing
// networks under static buffer priority.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sbpnet/sbpnet.hpp"

namespace fs = std::filesystem;
using namespace sbpnet;

namespace {

enum Exit { kOk = 0, kValidation = 1, kAssumption = 2, kRuntime = 3 };

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::string policy;
  bool fatal_assumptions = false;
};

struct SimFlags {
  std::optional<double> arrivals;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<double> warmup_frac;
  std::vector<std::string> joints;
  std::optional<int> threads;
};

class Manifest {
 public:
  Manifest(std::string command, const Common& c, std::string config_text)
      : command_(std::move(command)), common_(c), config_text_(std::move(config_text)), started_(utc_timestamp()) {}

  void add_file(const fs::path& p) { files_.push_back(p.filename().string()); }
  void set_seeds(std::uint64_t master, const std::vector<std::uint64_t>& reps) {
    master_seed_ = master;
    seeds_ = reps;
  }

  void write(const fs::path& dir) {
    Json j{{"command", command_},
           {"config", {{"path", common_.config_path}, {"fnv1a64", hex64(fnv1a(config_text_))}}},
           {"tool_version", kVersion},
           {"started", started_},
           {"finished", utc_timestamp()},
           {"files", files_}};
    if (master_seed_) {
      j["seed"] = *master_seed_;
      j["replication_seeds"] = seeds_;
    }
    std::ofstream(dir / "manifest.json") << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  Common common_;
  std::string config_text_;
  std::string started_;
  std::vector<std::string> files_;
  std::optional<std::uint64_t> master_seed_;
  std::vector<std::uint64_t> seeds_;
};

struct Loaded {
  std::string text;
  Config cfg;
};

Loaded load(const Common& c) {
  Loaded l;
  l.text = read_file(c.config_path);
  l.cfg = parse_config_text(l.text);
  if (!c.policy.empty()) {
    l.cfg.policy = parse_policy(c.policy);
    if (auto d = validate_policy(l.cfg.spec, *l.cfg.policy); !d.empty()) throw ConfigError(d);
  }
  return l;
}

const PriorityPolicy& require_policy(const Config& cfg) {
  if (!cfg.policy) throw ConfigError(std::vector<Diagnostic>{{"policy", "missing (set it in the config or pass --policy)"}});
  return *cfg.policy;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Json labels(const std::vector<int>& v) {
  Json out = Json::array();
  for (int k : v) out.push_back(k + 1);
  return out;
}

void print_loads(const AnalysisReport& rep) {
  std::cout << "stations:\n";
  for (Index j = 0; j < rep.rho.size(); ++j)
    std::cout << "  " << j + 1 << "  rho=" << format_number(rep.rho(j)) << (rep.rho(j) >= 1 ? "  OVERLOADED" : "")
              << '\n';
  for (const auto& c : rep.constraints)
    std::cout << "  constraint '" << c.name << "': load " << format_number(c.load)
              << (c.satisfied ? " < 1" : " >= 1 (VIOLATED)") << '\n';
  std::cout << "note: " << kBusyFractionCaveat << '\n';
}

int cmd_validate(const Common& c) {
  Loaded l = load(c);
  const auto& spec = l.cfg.spec;
  const Vector lambda = solve_traffic(spec);
  const Vector rho = traffic_intensities(spec, lambda);
  std::cout << "config ok: " << spec.num_stations << " stations, " << spec.num_classes() << " classes";
  if (l.cfg.policy) {
    canonicalize(spec, *l.cfg.policy);
    std::cout << ", policy " << to_string(*l.cfg.policy);
  }
  std::cout << '\n';
  for (Index j = 0; j < rho.size(); ++j) std::cout << "  station " << j + 1 << " rho=" << format_number(rho(j)) << '\n';
  for (const auto& chk : check_stability_constraints(spec, lambda))
    std::cout << "  constraint '" << chk.name << "': load " << format_number(chk.load)
              << (chk.satisfied ? " < 1" : " >= 1 (VIOLATED)") << '\n';
  return kOk;
}

int cmd_analyze(const Common& c) {
  Loaded l = load(c);
  const auto& policy = require_policy(l.cfg);
  const AnalysisReport rep = analyze(l.cfg.spec, policy);
  const fs::path dir = prepare_dir(c.out_dir);
  Manifest manifest("analyze", c, l.text);

  Json dump;
  dump["status"] = rep.ok() ? "ok" : "assumption_failure";
  dump["policy"] = to_string(policy);
  dump["canonical_order"] = labels(rep.indexing.to_user);
  if (rep.matrices) {
    const auto& mb = *rep.matrices;
    dump["A"] = matrix_json(mb.A);
    dump["Q"] = matrix_json(mb.Q);
    dump["R"] = matrix_json(mb.R);
    dump["w"] = matrix_json(mb.w);
    Json u = Json::array();
    for (const auto& v : mb.u) u.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    dump["u"] = u;
    const auto& d = mb.diagnostics;
    dump["diagnostics"] = {{"A_H_condition_1norm", d.ah_condition},
                           {"R_P_matrix", verdict_name(d.p_matrix.verdict)},
                           {"R_minors_checked", d.p_matrix.minors_checked},
                           {"one_minus_wkk", d.one_minus_wkk},
                           {"w_identity_residual", d.w_identity_residual},
                           {"station_identity_residual", d.max_station_identity_residual},
                           {"reflection_tilde_residual", d.reflection_tilde_residual},
                           {"reflection_bar_residual", d.reflection_bar_residual}};
  } else {
    dump["diagnostics"] = Json::object();
  }
  if (!rep.ok()) {
    dump["diagnostics"]["failure_tag"] = rep.failure_tag;
    dump["diagnostics"]["failure_message"] = rep.failure_message;
  }
  std::ofstream(dir / "matrices.json") << dump.dump(2) << '\n';
  manifest.add_file(dir / "matrices.json");

  {
    CsvWriter csv(dir / "constants.csv", {"class_label", "canonical_index", "role", "sigma2", "one_minus_wkk",
                                          "mean_estimate", "geom_p"});
    for (int k = 0; k < l.cfg.spec.num_classes(); ++k) {
      const int canon = rep.indexing.to_canonical[k];
      auto row = csv.row();
      row << label(k) << canon + 1 << (rep.indexing.is_low(canon) ? "low" : "high");
      if (rep.ok() && rep.indexing.is_low(canon)) {
        const auto& lc = rep.constants.low[canon];
        row << lc.sigma2 << lc.one_minus_wkk << lc.mean_estimate << lc.geom_p;
      } else if (rep.ok()) {
        row << "" << "" << 0.0 << "";
      } else {
        row << "" << "" << rep.failure_tag << "";
      }
    }
    csv.row() << "cycle_time" << "" << "summary" << "" << "" << (rep.ok() ? format_number(rep.cycle_time) : rep.failure_tag)
              << "";
  }
  manifest.add_file(dir / "constants.csv");
  manifest.add_file(dir / "manifest.json");
  manifest.write(dir);

  std::cout << "policy " << to_string(policy) << '\n';
  print_loads(rep);
  if (!rep.ok()) {
    std::cout << "status: assumption_failure [" << rep.failure_tag << "] " << rep.failure_message << '\n';
    return c.fatal_assumptions ? kAssumption : kOk;
  }
  std::cout << "status: ok\n";
  for (const auto& lc : rep.constants.low)
    std::cout << "  class " << lc.user_class + 1 << " (station " << lc.station + 1
              << "): mean " << format_number(lc.mean_estimate) << '\n';
  std::cout << "cycle time estimate: " << format_number(rep.cycle_time) << '\n';
  return kOk;
}

SimConfig sim_config(const Config& cfg, const SimFlags& f) {
  SimConfig s = cfg.sim;
  if (f.arrivals) {
    if (!(*f.arrivals >= 2)) throw NonpositiveHorizon("--arrivals must be at least 2");
    s.arrivals = static_cast<std::uint64_t>(*f.arrivals);
  }
  if (f.reps) s.replications = *f.reps;
  if (f.seed) s.seed = *f.seed;
  if (f.warmup_frac) s.warmup_frac = *f.warmup_frac;
  if (f.threads) s.threads = *f.threads;
  if (!f.joints.empty()) {
    s.joint_pairs.clear();
    for (const auto& j : f.joints) {
      const auto comma = j.find(',');
      try {
        if (comma == std::string::npos) throw std::invalid_argument(j);
        s.joint_pairs.emplace_back(std::stoi(j.substr(0, comma)) - 1, std::stoi(j.substr(comma + 1)) - 1);
      } catch (const std::logic_error&) {
        throw InvalidArgument("--joint expects i,j with 1-based class labels, got '" + j + "'");
      }
    }
  }
  return s;
}

int cmd_simulate(const Common& c, const SimFlags& f) {
  Loaded l = load(c);
  const auto& spec = l.cfg.spec;
  const auto& policy = require_policy(l.cfg);
  const SimConfig sc = sim_config(l.cfg, f);
  const AnalysisReport rep = analyze(spec, policy);
  if (!rep.ok() && c.fatal_assumptions) {
    std::cerr << "assumption failure [" << rep.failure_tag << "] " << rep.failure_message << '\n';
    return kAssumption;
  }
  const SimulationResult res = run_experiment(spec, policy, sc);
  const fs::path dir = prepare_dir(c.out_dir);
  Manifest manifest("simulate", c, l.text);
  manifest.set_seeds(res.master_seed, res.seeds);
  const Vector ht = rep.ok() ? rep.mean_by_class() : Vector::Constant(spec.num_classes(), NAN);

  {
    CsvWriter csv(dir / "summary.csv", {"class", "mean", "ci", "idle_frac", "idle_ci", "beta_exact", "ht_mean"});
    for (int k = 0; k < spec.num_classes(); ++k)
      csv.row() << label(k) << res.mean_queue[k].mean << res.mean_queue[k].half_width << res.idle_fraction[k].mean
                << res.idle_fraction[k].half_width << rep.beta(k) << ht(k);
    for (std::size_t p = 0; p < res.joint_pairs.size(); ++p) {
      const auto [a, b] = res.joint_pairs[p];
      csv.row() << "iqr_" + label(a) + "_" + label(b) << res.iqr[p].mean << res.iqr[p].half_width << "" << ""
                << "" << res.iqr_pooled[p];
    }
  }
  manifest.add_file(dir / "summary.csv");

  for (int k = 0; k < spec.num_classes(); ++k) {
    const auto& emp = res.hist[k];
    const long cap = static_cast<long>(emp.size()) - 1;
    std::optional<std::vector<double>> ref;
    if (std::isfinite(ht(k)) && ht(k) > 0) ref = GeometricApprox(ht(k)).binned(cap);
    const fs::path hp = dir / ("hist_" + label(k) + ".csv");
    {
      CsvWriter csv(hp, {"value", "probability", "geom_reference"});
      for (long n = 0; n <= cap; ++n) {
        auto row = csv.row();
        row << n << emp[n];
        if (ref) row << (*ref)[n];
        else row << "";
      }
    }
    manifest.add_file(hp);
    if (ref) {
      const auto cmp = hist_compare(emp, *ref);
      const fs::path rp = dir / ("hist_report_" + label(k) + ".csv");
      CsvWriter csv(rp, {"class", "total_variation", "q90", "q99", "tail_ratio_q90", "tail_ratio_q99", "overflow_bin"});
      csv.row() << label(k) << cmp.total_variation << cmp.q90 << cmp.q99 << cmp.tail_ratio_q90 << cmp.tail_ratio_q99
                << cap;
      manifest.add_file(rp);
    }
  }

  for (std::size_t p = 0; p < res.joint_pairs.size(); ++p) {
    const auto [a, b] = res.joint_pairs[p];
    const fs::path jp = dir / ("joint_" + label(a) + "_" + label(b) + ".csv");
    {
      CsvWriter csv(jp, {"x", "y", "probability"});
      const auto& j = res.joints[p];
      for (std::size_t x = 0; x < j.nx(); ++x)
        for (std::size_t y = 0; y < j.ny(); ++y)
          if (j.at(x, y) > 0) csv.row() << static_cast<long>(x) << static_cast<long>(y) << j.at(x, y);
    }
    manifest.add_file(jp);
  }

  {
    CsvWriter csv(dir / "cycletime.csv", {"source", "cycle_time", "ci"});
    csv.row() << "simulation" << res.cycle_time.mean << res.cycle_time.half_width;
    csv.row() << "heavy_traffic" << rep.cycle_time << "";
  }
  manifest.add_file(dir / "cycletime.csv");
  manifest.add_file(dir / "manifest.json");
  manifest.write(dir);

  std::cout << "simulated " << res.replications << " x " << res.arrivals << " arrivals (warm-up "
            << format_number(res.warmup_frac) << ")\n";
  for (int k = 0; k < spec.num_classes(); ++k)
    std::cout << "  class " << k + 1 << ": mean " << format_number(res.mean_queue[k].mean) << " +- "
              << format_number(res.mean_queue[k].half_width) << '\n';
  if (!rep.ok()) std::cout << "analysis: assumption_failure [" << rep.failure_tag << "]\n";
  return kOk;
}

int cmd_optimize(const Common& c) {
  Loaded l = load(c);
  RankingOptions opts;
  opts.weights = l.cfg.weights;
  const PolicyRanking ranking = rank_policies(l.cfg.spec, opts);
  const fs::path dir = prepare_dir(c.out_dir);
  Manifest manifest("optimize", c, l.text);
  {
    CsvWriter csv(dir / "ranking.csv", {"policy", "estimate_or_tag", "group_id"});
    for (const auto& e : ranking.entries)
      csv.row() << to_string(e.policy) << (e.estimate ? format_number(*e.estimate) : e.failure_tag) << e.group_id;
  }
  manifest.add_file(dir / "ranking.csv");
  manifest.add_file(dir / "manifest.json");
  manifest.write(dir);

  int failures = 0;
  for (const auto& e : ranking.entries) {
    std::cout << "  " << to_string(e.policy) << "  "
              << (e.estimate ? format_number(*e.estimate) : "[" + e.failure_tag + "]");
    if (e.group_id > 0) std::cout << "  group " << e.group_id;
    std::cout << '\n';
    failures += e.estimate ? 0 : 1;
  }
  if (ranking.num_groups() > 0)
    std::cout << "note: policies in one group differ only in high-priority order; the limit cannot separate them, "
                 "simulate to break ties\n";
  return failures > 0 && c.fatal_assumptions ? kAssumption : kOk;
}

int cmd_idle_check(const Common& c, const SimFlags& f) {
  Loaded l = load(c);
  const auto& spec = l.cfg.spec;
  const auto& policy = require_policy(l.cfg);
  SimConfig sc = sim_config(l.cfg, f);
  sc.default_joints = false;
  sc.joint_pairs.clear();
  const CanonicalIndexing idx = canonicalize(spec, policy);
  const Vector beta = idle_probabilities(spec, idx, solve_traffic(spec));
  const SimulationResult res = run_experiment(spec, policy, sc);
  const fs::path dir = prepare_dir(c.out_dir);
  Manifest manifest("idle-check", c, l.text);
  manifest.set_seeds(res.master_seed, res.seeds);
  int failed = 0;
  {
    CsvWriter csv(dir / "idle_check.csv", {"class", "beta_exact", "idle_sim", "ci", "pass"});
    std::cout << "class  beta_exact  idle_sim  ci  result\n";
    for (int k = 0; k < spec.num_classes(); ++k) {
      const auto& ci = res.idle_fraction[k];
      const bool pass = std::abs(ci.mean - beta(k)) <= 3.0 * ci.half_width + 1e-9;
      failed += pass ? 0 : 1;
      csv.row() << label(k) << beta(k) << ci.mean << ci.half_width << (pass ? "PASS" : "FAIL");
      std::cout << "  " << k + 1 << "  " << format_number(beta(k)) << "  " << format_number(ci.mean) << "  "
                << format_number(ci.half_width) << "  " << (pass ? "PASS" : "FAIL") << '\n';
    }
  }
  manifest.add_file(dir / "idle_check.csv");
  manifest.add_file(dir / "manifest.json");
  manifest.write(dir);
  std::cout << (failed ? std::to_string(failed) + " class(es) outside 3 CI\n" : "all classes within 3 CI\n");
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool with_out) {
  sub->add_option("config", c.config_path, "Network config (JSON)")->required()->check(CLI::ExistingFile);
  if (with_out) sub->add_option("-o,--out", c.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--policy", c.policy, "Override the config policy, e.g. \"{(5,3,1),(2,4)}\"");
  sub->add_flag("--fatal-assumptions", c.fatal_assumptions, "Exit 2 when the heavy-traffic assumptions fail");
}

void add_sim(CLI::App* sub, SimFlags& f) {
  sub->add_option("--arrivals", f.arrivals, "External arrivals per replication (e.g. 2e7)");
  sub->add_option("--reps", f.reps, "Replications")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--warmup-frac", f.warmup_frac, "Fraction of arrivals discarded as warm-up")->check(CLI::Range(0.0, 0.999));
  sub->add_option("--joint", f.joints, "Class pair i,j for a joint histogram (repeatable)");
  sub->add_option("--threads", f.threads, "Worker threads (default: SBPNET_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heavy-traffic analysis and simulation of multiclass queueing networks under static buffer priority"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  SimFlags sim;

  auto* validate = app.add_subcommand("validate", "Check a config and print loads");
  add_common(validate, common, false);
  auto* an = app.add_subcommand("analyze", "Matrix pipeline and heavy-traffic constants");
  add_common(an, common, true);
  auto* simulate = app.add_subcommand("simulate", "Discrete-event simulation");
  add_common(simulate, common, true);
  add_sim(simulate, sim);
  auto* optimize = app.add_subcommand("optimize", "Rank all priority policies by the cycle-time estimate");
  add_common(optimize, common, true);
  auto* idle = app.add_subcommand("idle-check", "Compare simulated idle fractions with the exact idle probabilities");
  add_common(idle, common, true);
  add_sim(idle, sim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (validate->parsed()) return cmd_validate(common);
    if (an->parsed()) return cmd_analyze(common);
    if (simulate->parsed()) return cmd_simulate(common, sim);
    if (optimize->parsed()) return cmd_optimize(common);
    if (idle->parsed()) return cmd_idle_check(common, sim);
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << "error: " << (d.path.empty() ? "config" : d.path) << ": " << d.message << '\n';
    return kValidation;
  } catch (const CombinatorialGuard& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const AssumptionFailure& e) {
    std::cerr << "assumption failure [" << e.tag() << "] " << e.what() << '\n';
    return kAssumption;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
