#pragma once

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "sbpnet/errors.hpp"
#include "sbpnet/network.hpp"

namespace sbpnet {

// Static buffer priority policy: for each station, its classes from highest to
// lowest priority (0-based class indices).
struct PriorityPolicy {
  std::vector<std::vector<int>> order;

  bool operator==(const PriorityPolicy&) const = default;
};

// "{(5,3,1),(2,4)}" with 1-based labels.
inline std::string to_string(const PriorityPolicy& policy) {
  std::ostringstream os;
  os << '{';
  for (std::size_t j = 0; j < policy.order.size(); ++j) {
    if (j) os << ',';
    os << '(';
    for (std::size_t i = 0; i < policy.order[j].size(); ++i) {
      if (i) os << ',';
      os << policy.order[j][i] + 1;
    }
    os << ')';
  }
  os << '}';
  return os.str();
}

// Accepts "{(5,3,1),(2,4)}", "5,3,1;2,4" or "(5 3 1)(2 4)"; labels are 1-based.
inline PriorityPolicy parse_policy(const std::string& text) {
  PriorityPolicy policy;
  std::vector<int> current;
  bool in_group = false;
  bool bracketed = text.find('(') != std::string::npos;
  std::string number;
  auto flush_number = [&] {
    if (!number.empty()) {
      current.push_back(std::stoi(number) - 1);
      number.clear();
    }
  };
  auto flush_group = [&] {
    flush_number();
    if (!current.empty()) policy.order.push_back(current);
    current.clear();
  };
  for (char c : text) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      if (bracketed && !in_group) throw InvalidArgument("policy '" + text + "': label outside parentheses");
      number.push_back(c);
    } else if (c == '(') {
      in_group = true;
    } else if (c == ')') {
      flush_group();
      in_group = false;
    } else if (c == ';') {
      flush_group();
    } else if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      flush_number();
    } else if (c != '{' && c != '}') {
      throw InvalidArgument("policy '" + text + "': unexpected character '" + std::string(1, c) + "'");
    }
  }
  flush_group();
  return policy;
}

inline std::vector<Diagnostic> validate_policy(const NetworkSpec& spec, const PriorityPolicy& policy) {
  std::vector<Diagnostic> out;
  const int K = spec.num_classes();
  if (static_cast<int>(policy.order.size()) != spec.num_stations) {
    out.push_back({"policy", "expected " + std::to_string(spec.num_stations) + " station lists, got " +
                                 std::to_string(policy.order.size())});
    return out;
  }
  std::vector<int> seen(static_cast<std::size_t>(K), 0);
  for (int j = 0; j < spec.num_stations; ++j) {
    const std::string path = "policy[" + label(j) + "]";
    for (int k : policy.order[j]) {
      if (k < 0 || k >= K) {
        out.push_back({path, "unknown class " + label(k)});
        continue;
      }
      if (seen[k]++) out.push_back({path, "class " + label(k) + " listed twice"});
      if (spec.station_of[k] != j)
        out.push_back({path, "class " + label(k) + " belongs to station " + label(spec.station_of[k])});
    }
  }
  for (int k = 0; k < K; ++k)
    if (!seen[k]) out.push_back({"policy", "class " + label(k) + " missing from policy"});
  return out;
}

// Canonical class order: the J station-lowest classes first (canonical index j is
// station j's lowest-priority class), then high classes by station and ascending
// priority. All indices 0-based.
struct CanonicalIndexing {
  int num_low = 0;
  std::vector<int> to_canonical;  // user class -> canonical index
  std::vector<int> to_user;       // canonical index -> user class
  std::vector<int> station;       // canonical -> station
  std::vector<int> rank;          // canonical -> priority rank at its station, 0 = highest
  std::vector<int> successor;     // canonical k -> canonical k+ (one priority above), -1 for station top

  int num_classes() const { return static_cast<int>(to_user.size()); }
  bool is_low(int c) const { return c < num_low; }

  // H(k): classes at k's station with priority at least k's (k included).
  std::vector<int> at_least_as_high(int c) const {
    std::vector<int> out;
    for (int l = 0; l < num_classes(); ++l)
      if (station[l] == station[c] &&
          rank[l] <= rank[c])
        out.push_back(l);
    return out;
  }

  // H_+(k): strictly higher priority.
  std::vector<int> strictly_higher(int c) const {
    auto out = at_least_as_high(c);
    out.erase(std::remove(out.begin(), out.end(), c), out.end());
    return out;
  }

  std::vector<int> low_set() const { return iota_indices(0, num_low); }
  std::vector<int> high_set() const { return iota_indices(num_low, num_classes()); }
};

inline CanonicalIndexing canonicalize(const NetworkSpec& spec, const PriorityPolicy& policy) {
  if (auto diags = validate_policy(spec, policy); !diags.empty())
    throw InvalidArgument("policy does not match network: " + diags.front().path + ": " + diags.front().message);
  const int K = spec.num_classes();
  const int J = spec.num_stations;
  CanonicalIndexing idx;
  idx.num_low = J;
  idx.to_canonical.assign(static_cast<std::size_t>(K), -1);
  for (int j = 0; j < J; ++j) idx.to_user.push_back(policy.order[j].back());
  for (int j = 0; j < J; ++j) {
    const auto& ord = policy.order[j];
    for (int i = static_cast<int>(ord.size()) - 2; i >= 0; --i) idx.to_user.push_back(ord[i]);
  }
  idx.station.resize(static_cast<std::size_t>(K));
  idx.rank.resize(static_cast<std::size_t>(K));
  idx.successor.assign(static_cast<std::size_t>(K), -1);
  for (int c = 0; c < K; ++c) idx.to_canonical[static_cast<std::size_t>(idx.to_user[c])] = c;
  for (int j = 0; j < J; ++j) {
    const auto& ord = policy.order[j];
    for (std::size_t i = 0; i < ord.size(); ++i) {
      const int c = idx.to_canonical[ord[i]];
      idx.station[c] = j;
      idx.rank[c] = static_cast<int>(i);
      if (i > 0) idx.successor[c] = idx.to_canonical[static_cast<std::size_t>(ord[i - 1])];
    }
  }
  return idx;
}

// The same network with classes permuted into canonical order.
inline NetworkSpec to_canonical_spec(const NetworkSpec& spec, const CanonicalIndexing& idx) {
  const int K = spec.num_classes();
  NetworkSpec out;
  out.num_stations = spec.num_stations;
  out.station_of.resize(static_cast<std::size_t>(K));
  out.arrival_rate.resize(K);
  out.mean_service.resize(K);
  out.routing.resize(K, K);
  out.arrival_dist.resize(static_cast<std::size_t>(K));
  out.service_dist.resize(static_cast<std::size_t>(K));
  for (int a = 0; a < K; ++a) {
    const int u = idx.to_user[a];
    out.station_of[a] = spec.station_of[u];
    out.arrival_rate(a) = spec.arrival_rate(u);
    out.mean_service(a) = spec.mean_service(u);
    out.arrival_dist[a] = spec.arrival_dist[u];
    out.service_dist[a] = spec.service_dist[u];
    for (int b = 0; b < K; ++b) out.routing(a, b) = spec.routing(u, idx.to_user[b]);
  }
  for (const auto& c : spec.stability_constraints) {
    StabilityConstraint mapped{c.name, {}};
    for (int k : c.classes) mapped.classes.push_back(idx.to_canonical[k]);
    out.stability_constraints.push_back(std::move(mapped));
  }
  return out;
}

// Exact steady-state probability that every class of priority >= k at k's
// station is empty: beta_k = 1 - sum_{l in H(k)} lambda_l m_l. User indexing.
inline Vector idle_probabilities(const NetworkSpec& spec, const CanonicalIndexing& idx, const Vector& lambda) {
  const int K = spec.num_classes();
  Vector beta(K);
  for (int k = 0; k < K; ++k) {
    double load = 0;
    for (int c : idx.at_least_as_high(idx.to_canonical[k])) {
      const int u = idx.to_user[c];
      load += lambda(u) * spec.mean_service(u);
    }
    beta(k) = 1.0 - load;
  }
  return beta;
}

}  // namespace sbpnet
