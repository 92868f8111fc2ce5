#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sbpnet/distributions.hpp"
#include "sbpnet/errors.hpp"
#include "sbpnet/event_calendar.hpp"
#include "sbpnet/heavy_traffic.hpp"
#include "sbpnet/network.hpp"
#include "sbpnet/policy.hpp"
#include "sbpnet/stats.hpp"

namespace sbpnet {

inline constexpr long kMinHistCap = 100;
inline constexpr double kHistCapMultiple = 20.0;

struct SimConfig {
  std::uint64_t arrivals = 1'000'000;  // external arrival budget per replication
  int replications = 5;
  std::uint64_t seed = 1;
  double warmup_frac = 0.1;
  // Class pairs (0-based) with time-weighted joint histograms. When
  // `default_joints` is set and the list is empty, all pairs of station-lowest
  // classes are used.
  std::vector<std::pair<int, int>> joint_pairs;
  bool default_joints = true;
  // Per-class histogram caps; the last bin collects Z >= cap. Empty: derived
  // from the analytic mean estimates.
  std::vector<long> hist_caps;
  int threads = 0;  // 0: SBPNET_THREADS, else hardware concurrency
  bool check_invariants = false;
};

struct ReplicationStats {
  std::uint64_t seed = 0;
  double warmup_end = 0, horizon = 0;
  double observed_time = 0;
  std::uint64_t events = 0;
  std::vector<double> mean_queue;     // per class, time average
  std::vector<double> idle_fraction;  // per class, fraction of time Z_{H(k)} = 0
  std::vector<double> throughput;     // per class, completions per unit time
  std::vector<std::vector<double>> hist;  // per class, time-weighted pmf on 0..cap
  std::vector<std::pair<int, int>> joint_pairs;
  std::vector<JointPMF> joints;
  double cycle_time = NAN;  // mean sojourn of jobs leaving after warm-up
  std::uint64_t exits = 0;
  double max_service_mismatch = 0;  // max |service received - drawn requirement| over departures
};

class NonpositiveHorizon : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DistributionParameterInvalid : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

namespace detail {

struct Job {
  double entry;
  double remaining = 0;
  double drawn = 0;
  double received = 0;
  bool started = false;  // requirement drawn at first entry into service at the current class
};

struct EventTag {};

class Replication {
 public:
  Replication(const NetworkSpec& spec, const PriorityPolicy& policy, const SimConfig& cfg,
              const std::vector<long>& caps, const std::vector<std::pair<int, int>>& pairs, std::uint64_t seed)
      : spec_(spec), policy_(policy), cfg_(cfg), K_(spec.num_classes()), J_(spec.num_stations),
        calendar_(static_cast<std::size_t>(J_ + K_)), queues_(static_cast<std::size_t>(K_)),
        serving_(static_cast<std::size_t>(J_), -1), seg_start_(static_cast<std::size_t>(J_), 0.0),
        rank_(static_cast<std::size_t>(K_), 0), caps_(caps), pairs_(pairs) {
    stats_.seed = seed;
    for (int j = 0; j < J_; ++j) {
      const auto& ord = policy_.order[j];
      for (std::size_t i = 0; i < ord.size(); ++i) rank_[ord[i]] = static_cast<int>(i);
    }
    for (int k = 0; k < K_; ++k) {
      arrival_rng_.emplace_back(stream_seed(seed, StreamKind::arrival, k));
      service_rng_.emplace_back(stream_seed(seed, StreamKind::service, k));
      routing_rng_.emplace_back(stream_seed(seed, StreamKind::routing, k));
      arrival_sampler_.emplace_back(spec.arrival_dist[k]);
      service_sampler_.emplace_back(spec.service_dist[k]);
      std::vector<double> cum;
      double acc = 0;
      for (int l = 0; l < K_; ++l) cum.push_back(acc += spec.routing(k, l));
      routing_cdf_.push_back(std::move(cum));
    }
    area_.assign(static_cast<std::size_t>(K_), 0.0);
    completions_.assign(static_cast<std::size_t>(K_), 0);
    hist_.resize(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k) hist_[k].assign(static_cast<std::size_t>(caps_[k] + 1), 0.0);
    station_time_.resize(static_cast<std::size_t>(J_));
    for (int j = 0; j < J_; ++j)
      station_time_[j].assign(policy_.order[j].size() + 1, 0.0);
    for (auto [a, b] : pairs_)
      joints_.emplace_back(static_cast<std::size_t>(caps_[a] + 1),
                           static_cast<std::size_t>(caps_[b] + 1));
  }

  ReplicationStats run() {
    const std::uint64_t budget = cfg_.arrivals;
    const auto warm_count = static_cast<std::uint64_t>(std::floor(cfg_.warmup_frac * static_cast<double>(budget)));
    recording_ = warm_count == 0;
    for (int k = 0; k < K_; ++k)
      if (spec_.arrival_rate(k) > 0) schedule_arrival(k, 0.0);

    std::uint64_t arrivals = 0;
    Event ev{};
    while (calendar_.pop(ev)) {
      const double now = ev.time;
      advance(now);
      ++stats_.events;
      if (ev.key < static_cast<std::uint32_t>(J_)) {
        complete(static_cast<int>(ev.key), now);
      } else {
        ++arrivals;
        if (arrivals == budget) {
          stats_.horizon = now;
          break;
        }
        const int k = static_cast<int>(ev.key) - J_;
        queues_[k].push_back(Job{now});
        ++in_system_;
        schedule_arrival(k, now);
        update_station(spec_.station_of[k], now);
        if (arrivals == warm_count) {
          recording_ = true;
          stats_.warmup_end = now;
        }
      }
      if (cfg_.check_invariants) check_invariants();
    }
    finish();
    return std::move(stats_);
  }

 private:
  using Event = EventCalendar<EventTag>::Event;

  void schedule_arrival(int k, double now) {
    const double gap = arrival_sampler_[k](arrival_rng_[k]) / spec_.arrival_rate(k);
    calendar_.schedule(static_cast<std::uint32_t>(J_ + k), now + gap, {});
  }

  // Integrates the piecewise-constant state over [last_, now].
  void advance(double now) {
    const double dt = now - last_;
    last_ = now;
    if (!recording_ || dt <= 0) return;
    for (int k = 0; k < K_; ++k) {
      const auto z = static_cast<long>(queues_[k].size());
      area_[k] += static_cast<double>(z) * dt;
      hist_[k][static_cast<std::size_t>(std::min(z, caps_[k]))] += dt;
    }
    for (int j = 0; j < J_; ++j) {
      const int s = serving_[j];
      auto& t = station_time_[j];
      t[s < 0 ? t.size() - 1 : static_cast<std::size_t>(rank_[s])] += dt;
    }
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto [a, b] = pairs_[p];
      const auto za = std::min(static_cast<long>(queues_[a].size()), caps_[a]);
      const auto zb = std::min(static_cast<long>(queues_[b].size()), caps_[b]);
      joints_[p].at(static_cast<std::size_t>(za), static_cast<std::size_t>(zb)) += dt;
    }
  }

  // Serve the highest-priority nonempty class; preempted work keeps its remaining time.
  void update_station(int j, double now) {
    int top = -1;
    for (int k : policy_.order[j])
      if (!queues_[k].empty()) {
        top = k;
        break;
      }
    int& serving = serving_[j];
    if (top == serving) return;
    if (serving >= 0) {
      Job& job = queues_[serving].front();
      const double elapsed = now - seg_start_[j];
      job.remaining = std::max(0.0, job.remaining - elapsed);
      job.received += elapsed;
    }
    serving = top;
    if (top < 0) {
      calendar_.cancel(static_cast<std::uint32_t>(j));
      return;
    }
    Job& job = queues_[top].front();
    if (!job.started) {
      job.started = true;
      job.drawn = spec_.mean_service(top) * service_sampler_[top](service_rng_[top]);
      job.remaining = job.drawn;
    }
    seg_start_[j] = now;
    calendar_.schedule(static_cast<std::uint32_t>(j), now + job.remaining, {});
  }

  void complete(int j, double now) {
    const int k = serving_[j];
    auto& q = queues_[k];
    Job job = q.front();
    q.pop_front();
    job.received += now - seg_start_[j];
    stats_.max_service_mismatch = std::max(stats_.max_service_mismatch, std::abs(job.received - job.drawn));
    serving_[j] = -1;
    if (recording_) ++completions_[k];

    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(routing_rng_[k]);
    const auto& cdf = routing_cdf_[k];
    int next = -1;
    for (int l = 0; l < K_; ++l)
      if (u < cdf[l]) {
        next = l;
        break;
      }
    if (next < 0) {
      --in_system_;
      ++exits_total_;
      if (recording_) {
        sojourn_sum_ += now - job.entry;
        ++stats_.exits;
      }
    } else {
      queues_[next].push_back(Job{job.entry});
      const int sn = spec_.station_of[next];
      if (sn != j) update_station(sn, now);
    }
    update_station(j, now);
  }

  void check_invariants() const {
    std::uint64_t total = 0;
    for (int k = 0; k < K_; ++k) total += queues_[k].size();
    if (total != in_system_) throw InternalConsistencyError("job count does not match arrivals - departures");
    for (int j = 0; j < J_; ++j) {
      int top = -1;
      for (int k : policy_.order[j])
        if (!queues_[k].empty()) {
          top = k;
          break;
        }
      if (top != serving_[j])
        throw InternalConsistencyError("station " + label(j) + " is not serving its highest-priority nonempty class");
      if (top >= 0 && !calendar_.pending(static_cast<std::uint32_t>(j)))
        throw InternalConsistencyError("busy station " + label(j) + " has no pending completion");
    }
  }

  void finish() {
    const double T = stats_.horizon - stats_.warmup_end;
    stats_.observed_time = T;
    if (!(T > 0)) throw NonpositiveHorizon("observation window after warm-up is empty");
    stats_.mean_queue.resize(static_cast<std::size_t>(K_));
    stats_.throughput.resize(static_cast<std::size_t>(K_));
    stats_.idle_fraction.resize(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k) {
      stats_.mean_queue[k] = area_[k] / T;
      stats_.throughput[k] = static_cast<double>(completions_[k]) / T;
      auto h = hist_[k];
      for (double& v : h) v /= T;
      stats_.hist.push_back(std::move(h));
      const int j = spec_.station_of[k];
      const auto& t = station_time_[j];
      double idle = 0;
      for (std::size_t r = static_cast<std::size_t>(rank_[k]) + 1; r < t.size(); ++r) idle += t[r];
      stats_.idle_fraction[k] = idle / T;
    }
    stats_.joint_pairs = pairs_;
    for (auto& jt : joints_) {
      JointPMF scaled(jt.nx(), jt.ny(), jt.data());
      scaled.normalize();
      stats_.joints.push_back(std::move(scaled));
    }
    stats_.cycle_time = stats_.exits ? sojourn_sum_ / static_cast<double>(stats_.exits) : NAN;
  }

  const NetworkSpec& spec_;
  const PriorityPolicy& policy_;
  const SimConfig& cfg_;
  int K_, J_;
  EventCalendar<EventTag> calendar_;
  std::vector<std::deque<Job>> queues_;
  std::vector<int> serving_;
  std::vector<double> seg_start_;
  std::vector<int> rank_;
  std::vector<long> caps_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<Rng> arrival_rng_, service_rng_, routing_rng_;
  std::vector<UnitSampler> arrival_sampler_, service_sampler_;
  std::vector<std::vector<double>> routing_cdf_;

  bool recording_ = false;
  double last_ = 0;
  std::uint64_t in_system_ = 0;
  std::uint64_t exits_total_ = 0;
  double sojourn_sum_ = 0;
  std::vector<double> area_;
  std::vector<std::uint64_t> completions_;
  std::vector<std::vector<double>> hist_;
  std::vector<std::vector<double>> station_time_;
  std::vector<JointPMF> joints_;
  ReplicationStats stats_;
};

inline void check_sim_inputs(const NetworkSpec& spec, const PriorityPolicy& policy, const SimConfig& cfg) {
  if (auto diags = validate_spec(spec); !diags.empty())
    throw InvalidArgument("invalid network: " + diags.front().path + ": " + diags.front().message);
  if (auto diags = validate_policy(spec, policy); !diags.empty())
    throw InvalidArgument("invalid policy: " + diags.front().path + ": " + diags.front().message);
  for (int k = 0; k < spec.num_classes(); ++k) {
    if (spec.arrival_rate(k) > 0)
      if (auto e = check_distribution(spec.arrival_dist[k]))
        throw DistributionParameterInvalid("class " + label(k) + " arrival distribution: " + *e);
    if (auto e = check_distribution(spec.service_dist[k]))
      throw DistributionParameterInvalid("class " + label(k) + " service distribution: " + *e);
  }
  if (cfg.arrivals < 2) throw NonpositiveHorizon("arrival budget must be at least 2");
  if (!(cfg.warmup_frac >= 0 && cfg.warmup_frac < 1)) throw NonpositiveHorizon("warm-up fraction must lie in [0,1)");
  if (!cfg.hist_caps.empty() && static_cast<int>(cfg.hist_caps.size()) != spec.num_classes())
    throw InvalidArgument("hist_caps needs one entry per class");
  for (auto [a, b] : cfg.joint_pairs)
    if (a < 0 || b < 0 || a >= spec.num_classes() || b >= spec.num_classes())
      throw InvalidArgument("joint pair references an unknown class");
}

}  // namespace detail

// Histogram caps: 20x the analytic mean for station-lowest classes when the
// analysis applies, never below kMinHistCap.
inline std::vector<long> default_hist_caps(const NetworkSpec& spec, const PriorityPolicy& policy) {
  std::vector<long> caps(static_cast<std::size_t>(spec.num_classes()), kMinHistCap);
  try {
    const AnalysisReport rep = analyze(spec, policy);
    if (rep.ok())
      for (const auto& c : rep.constants.low)
        caps[c.user_class] =
            std::max(kMinHistCap, static_cast<long>(std::ceil(kHistCapMultiple * c.mean_estimate)));
  } catch (const Error&) {
  }
  return caps;
}

inline std::vector<std::pair<int, int>> resolve_joint_pairs(const NetworkSpec& spec, const PriorityPolicy& policy,
                                                            const SimConfig& cfg) {
  if (!cfg.joint_pairs.empty() || !cfg.default_joints) return cfg.joint_pairs;
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < spec.num_stations; ++a)
    for (int b = a + 1; b < spec.num_stations; ++b)
      pairs.emplace_back(policy.order[a].back(), policy.order[b].back());
  return pairs;
}

// One deterministic single-threaded replication.
inline ReplicationStats run_replication(const NetworkSpec& spec, const PriorityPolicy& policy, const SimConfig& cfg,
                                        std::uint64_t seed) {
  detail::check_sim_inputs(spec, policy, cfg);
  const auto caps = cfg.hist_caps.empty() ? default_hist_caps(spec, policy) : cfg.hist_caps;
  const auto pairs = resolve_joint_pairs(spec, policy, cfg);
  return detail::Replication(spec, policy, cfg, caps, pairs, seed).run();
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SBPNET_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct SimulationResult {
  int replications = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::uint64_t arrivals = 0;
  double warmup_frac = 0;
  std::vector<long> hist_caps;
  std::vector<ConfidenceInterval> mean_queue;
  std::vector<ConfidenceInterval> idle_fraction;
  std::vector<ConfidenceInterval> throughput;
  std::vector<std::vector<double>> hist;  // replication-averaged pmfs
  std::vector<std::pair<int, int>> joint_pairs;
  std::vector<JointPMF> joints;              // replication-averaged
  std::vector<ConfidenceInterval> iqr;       // across replications; NaN when undefined
  std::vector<double> iqr_pooled;            // IQR of the averaged joint
  ConfidenceInterval cycle_time;
  double max_service_mismatch = 0;
  std::vector<ReplicationStats> runs;
};

inline ConfidenceInterval ci_or_nan(const std::vector<double>& xs) {
  std::vector<double> finite;
  for (double x : xs)
    if (std::isfinite(x)) finite.push_back(x);
  if (finite.size() < 2) return {finite.empty() ? NAN : finite.front(), NAN, static_cast<int>(finite.size())};
  return ci(finite);
}

// Independent replications with seeds derived from cfg.seed, run concurrently;
// aggregation is ordered by replication index.
inline SimulationResult run_experiment(const NetworkSpec& spec, const PriorityPolicy& policy, const SimConfig& cfg) {
  if (cfg.replications < 2) throw InvalidArgument("run_experiment needs at least 2 replications for confidence intervals");
  detail::check_sim_inputs(spec, policy, cfg);
  SimConfig resolved = cfg;
  if (resolved.hist_caps.empty()) resolved.hist_caps = default_hist_caps(spec, policy);
  resolved.joint_pairs = resolve_joint_pairs(spec, policy, cfg);
  resolved.default_joints = false;

  const int R = cfg.replications;
  std::vector<ReplicationStats> runs(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < R; r = next++) {
      try {
        runs[r] =
            detail::Replication(spec, policy, resolved, resolved.hist_caps, resolved.joint_pairs,
                                replication_seed(cfg.seed, static_cast<std::uint64_t>(r)))
                .run();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int nthreads = std::min(resolve_threads(cfg.threads), R);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SimulationResult res;
  res.replications = R;
  res.master_seed = cfg.seed;
  res.arrivals = cfg.arrivals;
  res.warmup_frac = cfg.warmup_frac;
  res.hist_caps = resolved.hist_caps;
  res.joint_pairs = resolved.joint_pairs;
  const int K = spec.num_classes();
  for (const auto& run : runs) res.seeds.push_back(run.seed);
  auto collect = [&](auto field) {
    std::vector<ConfidenceInterval> out;
    for (int k = 0; k < K; ++k) {
      std::vector<double> xs;
      for (const auto& run : runs) xs.push_back((run.*field)[k]);
      out.push_back(ci(xs));
    }
    return out;
  };
  res.mean_queue = collect(&ReplicationStats::mean_queue);
  res.idle_fraction = collect(&ReplicationStats::idle_fraction);
  res.throughput = collect(&ReplicationStats::throughput);
  for (int k = 0; k < K; ++k) {
    std::vector<double> avg(runs.front().hist[k].size(), 0.0);
    for (const auto& run : runs)
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += run.hist[k][i] / R;
    res.hist.push_back(std::move(avg));
  }
  for (std::size_t p = 0; p < res.joint_pairs.size(); ++p) {
    const auto& first = runs.front().joints[p];
    std::vector<double> avg(first.data().size(), 0.0);
    std::vector<double> per_rep;
    for (const auto& run : runs) {
      const auto& d = run.joints[p].data();
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += d[i] / R;
      try {
        per_rep.push_back(sbpnet::iqr(run.joints[p]));
      } catch (const DegenerateJoint&) {
        per_rep.push_back(NAN);
      }
    }
    res.joints.emplace_back(first.nx(), first.ny(), std::move(avg));
    res.iqr.push_back(ci_or_nan(per_rep));
    try {
      res.iqr_pooled.push_back(sbpnet::iqr(res.joints.back()));
    } catch (const DegenerateJoint&) {
      res.iqr_pooled.push_back(NAN);
    }
  }
  std::vector<double> cts;
  for (const auto& run : runs) {
    cts.push_back(run.cycle_time);
    res.max_service_mismatch = std::max(res.max_service_mismatch, run.max_service_mismatch);
  }
  res.cycle_time = ci_or_nan(cts);
  res.runs = std::move(runs);
  return res;
}

}  // namespace sbpnet
