#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sbpnet/errors.hpp"
#include "sbpnet/heavy_traffic.hpp"
#include "sbpnet/policy.hpp"

namespace sbpnet {

inline constexpr double kDefaultPolicyLimit = 1e6;
inline constexpr double kTieTolerance = 1e-9;

inline double policy_count(const NetworkSpec& spec) {
  double n = 1;
  for (int j = 0; j < spec.num_stations; ++j)
    for (int i = 2; i <= static_cast<int>(spec.classes_at(j).size()); ++i) n *= i;
  return n;
}

// Cartesian product of per-station permutations. Station 0 varies slowest;
// each station's permutations run in lexicographic order of class index.
inline std::vector<PriorityPolicy> enumerate_policies(const NetworkSpec& spec, double limit = kDefaultPolicyLimit) {
  const double count = policy_count(spec);
  if (count > limit)
    throw CombinatorialGuard("policy enumeration would produce " + std::to_string(static_cast<long double>(count)) +
                             " policies (limit " + std::to_string(static_cast<long long>(limit)) + ")");
  std::vector<std::vector<std::vector<int>>> perms(spec.num_stations);
  for (int j = 0; j < spec.num_stations; ++j) {
    auto cls = spec.classes_at(j);
    std::sort(cls.begin(), cls.end());
    do perms[j].push_back(cls);
    while (std::next_permutation(cls.begin(), cls.end()));
  }
  std::vector<PriorityPolicy> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> pos(spec.num_stations, 0);
  while (true) {
    PriorityPolicy p;
    for (int j = 0; j < spec.num_stations; ++j) p.order.push_back(perms[j][pos[j]]);
    out.push_back(std::move(p));
    int j = spec.num_stations - 1;
    while (j >= 0 && ++pos[j] == perms[j].size()) pos[j--] = 0;
    if (j < 0) break;
  }
  return out;
}

struct RankedPolicy {
  PriorityPolicy policy;
  std::optional<double> estimate;  // empty when the analysis failed
  std::string failure_tag;
  int group_id = -1;               // 1-based degeneracy group, -1 for failures
};

struct PolicyRanking {
  std::vector<RankedPolicy> entries;  // ranked entries first, failures after (enumeration order)

  int num_groups() const {
    int g = 0;
    for (const auto& e : entries) g = std::max(g, e.group_id);
    return g;
  }
};

struct RankingOptions {
  double policy_limit = kDefaultPolicyLimit;
  // Per-class weights (user indexing). When set, the objective is
  // sum_k w_k * mean_k instead of the cycle-time estimate.
  std::optional<Vector> weights;
};

inline double objective(const AnalysisReport& rep, const RankingOptions& opts) {
  if (!opts.weights) return rep.cycle_time;
  return opts.weights->dot(rep.mean_by_class());
}

inline bool ties(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max(std::abs(a), std::abs(b));
}

inline PolicyRanking rank_policies(const NetworkSpec& spec, const RankingOptions& opts = {}) {
  if (opts.weights && opts.weights->size() != spec.num_classes())
    throw InvalidArgument("weights: expected " + std::to_string(spec.num_classes()) + " entries");
  PolicyRanking ranking;
  std::vector<RankedPolicy> failed;
  for (auto& policy : enumerate_policies(spec, opts.policy_limit)) {
    const AnalysisReport rep = analyze(spec, policy);
    RankedPolicy e{std::move(policy), std::nullopt, {}, -1};
    if (rep.ok())
      e.estimate = objective(rep, opts);
    else
      e.failure_tag = rep.failure_tag;
    (e.estimate ? ranking.entries : failed).push_back(std::move(e));
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankedPolicy& a, const RankedPolicy& b) { return *a.estimate < *b.estimate; });
  int group = 0;
  double anchor = NAN;
  for (auto& e : ranking.entries) {
    if (group == 0 || !ties(*e.estimate, anchor)) {
      ++group;
      anchor = *e.estimate;
    }
    e.group_id = group;
  }
  for (auto& e : failed) ranking.entries.push_back(std::move(e));
  return ranking;
}

}  // namespace sbpnet
