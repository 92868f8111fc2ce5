#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sbpnet/errors.hpp"
#include "sbpnet/linalg.hpp"

namespace sbpnet {

// Primitive times are unitized: every distribution below has mean 1 and is
// scaled by 1/alpha_k (inter-arrivals) or m_k (services) at the use site.
enum class Family { gamma, exponential, deterministic, hyperexponential2 };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gamma: return "gamma";
    case Family::exponential: return "exponential";
    case Family::deterministic: return "deterministic";
    case Family::hyperexponential2: return "hyperexponential2";
  }
  return "?";
}

inline std::optional<Family> parse_family(const std::string& s) {
  if (s == "gamma") return Family::gamma;
  if (s == "exponential" || s == "exp") return Family::exponential;
  if (s == "deterministic" || s == "det") return Family::deterministic;
  if (s == "hyperexponential2" || s == "h2") return Family::hyperexponential2;
  return std::nullopt;
}

struct DistributionSpec {
  Family family = Family::exponential;
  double scv = 1.0;  // declared squared coefficient of variation

  static DistributionSpec gamma_shape(double shape) { return {Family::gamma, 1.0 / shape}; }
  static DistributionSpec exponential() { return {Family::exponential, 1.0}; }
  static DistributionSpec deterministic() { return {Family::deterministic, 0.0}; }
  static DistributionSpec hyperexponential(double scv) { return {Family::hyperexponential2, scv}; }

  // Gamma(shape a, scale 1/a): mean 1, SCV 1/a.
  double gamma_shape() const { return 1.0 / scv; }
  double gamma_scale() const { return scv; }

  // Two-phase hyperexponential with balanced means, mean 1.
  struct H2 {
    double p1, rate1, rate2;
  };
  H2 h2() const {
    const double p = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
    return {p, 2.0 * p, 2.0 * (1.0 - p)};
  }
};

struct Moments {
  double mean;
  double scv;
};

// Mean and SCV implied by the sampler parameters (not the declared scv field).
inline Moments realized_moments(const DistributionSpec& d) {
  switch (d.family) {
    case Family::gamma: {
      const double a = d.gamma_shape(), theta = d.gamma_scale();
      const double mean = a * theta;
      return {mean, a * theta * theta / (mean * mean)};
    }
    case Family::exponential: return {1.0, 1.0};
    case Family::deterministic: return {1.0, 0.0};
    case Family::hyperexponential2: {
      const auto h = d.h2();
      const double mean = h.p1 / h.rate1 + (1.0 - h.p1) / h.rate2;
      const double m2 = 2.0 * h.p1 / (h.rate1 * h.rate1) + 2.0 * (1.0 - h.p1) / (h.rate2 * h.rate2);
      return {mean, (m2 - mean * mean) / (mean * mean)};
    }
  }
  return {NAN, NAN};
}

// Returns an error message when the parameters cannot realize the declared SCV.
inline std::optional<std::string> check_distribution(const DistributionSpec& d) {
  if (!std::isfinite(d.scv) || d.scv < 0) return "scv must be finite and >= 0";
  switch (d.family) {
    case Family::gamma:
      if (d.scv <= 0) return "gamma requires scv > 0 (scv = 1/shape)";
      break;
    case Family::exponential:
      if (std::abs(d.scv - 1.0) > 1e-12) return "exponential has scv 1";
      break;
    case Family::deterministic:
      if (d.scv != 0.0) return "deterministic has scv 0";
      break;
    case Family::hyperexponential2:
      if (d.scv < 1.0) return "hyperexponential2 requires scv >= 1";
      break;
  }
  return std::nullopt;
}

// A user-declared load constraint: sum over `classes` of lambda_k m_k must be < 1.
struct StabilityConstraint {
  std::string name;
  std::vector<int> classes;  // 0-based class indices
};

// Multiclass open network. Classes and stations are 0-based internally; all
// user-facing text uses 1-based labels. Station order is also the heavy-traffic
// scale order (station j saturates at rate r^(j+1)).
struct NetworkSpec {
  int num_stations = 0;
  std::vector<int> station_of;  // class -> station
  Vector arrival_rate;          // alpha
  Vector mean_service;          // m
  Matrix routing;               // P, K x K
  std::vector<DistributionSpec> arrival_dist;
  std::vector<DistributionSpec> service_dist;
  std::vector<StabilityConstraint> stability_constraints;

  int num_classes() const { return static_cast<int>(station_of.size()); }

  std::vector<int> classes_at(int station) const {
    std::vector<int> out;
    for (int k = 0; k < num_classes(); ++k)
      if (station_of[k] == station) out.push_back(k);
    return out;
  }

  Vector scv_arrival() const {
    Vector v(num_classes());
    for (int k = 0; k < num_classes(); ++k) v(k) = arrival_rate(k) > 0 ? arrival_dist[k].scv : 0.0;
    return v;
  }

  Vector scv_service() const {
    Vector v(num_classes());
    for (int k = 0; k < num_classes(); ++k) v(k) = service_dist[k].scv;
    return v;
  }

  double total_arrival_rate() const { return arrival_rate.sum(); }
};

struct Diagnostic {
  std::string path;
  std::string message;
};

inline std::string label(int zero_based) { return std::to_string(zero_based + 1); }

inline double spectral_radius(const Matrix& p) {
  if (p.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(p, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline std::vector<Diagnostic> validate_spec(const NetworkSpec& spec) {
  std::vector<Diagnostic> out;
  const int K = spec.num_classes();
  const int J = spec.num_stations;
  auto add = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };

  if (J <= 0) add("stations", "need at least one station");
  if (K <= 0) {
    add("classes", "need at least one class");
    return out;
  }
  bool shapes_ok = true;
  if (spec.arrival_rate.size() != K) add("classes[].arrival_rate", "size mismatch"), shapes_ok = false;
  if (spec.mean_service.size() != K) add("classes[].mean_service", "size mismatch"), shapes_ok = false;
  if (spec.routing.rows() != K || spec.routing.cols() != K)
    add("routing", "must be " + std::to_string(K) + "x" + std::to_string(K)), shapes_ok = false;
  if (static_cast<int>(spec.arrival_dist.size()) != K) add("classes[].arrival_dist", "size mismatch"), shapes_ok = false;
  if (static_cast<int>(spec.service_dist.size()) != K) add("classes[].service_dist", "size mismatch"), shapes_ok = false;
  if (!shapes_ok) return out;

  std::vector<int> per_station(static_cast<std::size_t>(std::max(J, 0)), 0);
  for (int k = 0; k < K; ++k) {
    const std::string base = "classes[" + label(k) + "]";
    const int s = spec.station_of[k];
    if (s < 0 || s >= J)
      add(base + ".station", "station " + label(s) + " out of range 1.." + std::to_string(J));
    else
      ++per_station[s];
    const double m = spec.mean_service(k);
    if (!(m > 0) || !std::isfinite(m)) add(base + ".mean_service", "must be > 0");
    const double a = spec.arrival_rate(k);
    if (!(a >= 0) || !std::isfinite(a)) add(base + ".arrival_rate", "must be >= 0");
    if (a > 0) {
      if (auto err = check_distribution(spec.arrival_dist[k])) add(base + ".arrival_dist", *err);
    }
    if (auto err = check_distribution(spec.service_dist[k])) add(base + ".service_dist", *err);
  }
  for (int j = 0; j < J; ++j)
    if (per_station[j] == 0) add("stations[" + label(j) + "]", "station has no classes");
  if (!(spec.arrival_rate.array() > 0).any()) add("classes[].arrival_rate", "at least one class needs external arrivals");

  bool routing_ok = true;
  for (int k = 0; k < K; ++k) {
    const std::string row = "routing[" + label(k) + "]";
    for (int l = 0; l < K; ++l) {
      const double p = spec.routing(k, l);
      if (!(p >= 0.0 && p <= 1.0)) {
        add(row + "[" + label(l) + "]", "probability outside [0,1]");
        routing_ok = false;
      }
    }
    const double sum = spec.routing.row(k).sum();
    if (sum > 1.0 + 1e-12) {
      add(row, "row sums to " + std::to_string(sum) + " > 1");
      routing_ok = false;
    }
  }
  if (routing_ok) {
    const Matrix ip = Matrix::Identity(K, K) - spec.routing;
    Eigen::PartialPivLU<Matrix> lu(ip);
    if (!pivots_ok(lu, max_abs(ip)) || spectral_radius(spec.routing) >= 1.0 - 1e-12)
      add("routing", "I-P singular: network is not open (spectral radius of P must be < 1)");
  }
  for (std::size_t c = 0; c < spec.stability_constraints.size(); ++c) {
    for (int k : spec.stability_constraints[c].classes)
      if (k < 0 || k >= K)
        add("stability_constraints[" + std::to_string(c + 1) + "]", "unknown class " + label(k));
  }
  return out;
}

// lambda = (I - P^T)^{-1} alpha.
inline Vector solve_traffic(const NetworkSpec& spec) {
  const int K = spec.num_classes();
  const Matrix ipt = Matrix::Identity(K, K) - spec.routing.transpose();
  Vector lambda = solve(ipt, spec.arrival_rate, "I-P^T");
  const double residual = (lambda - spec.arrival_rate - spec.routing.transpose() * lambda).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * std::max(lambda.cwiseAbs().maxCoeff(), 1.0))
    throw InternalConsistencyError("traffic equation residual " + std::to_string(residual));
  return lambda;
}

inline Vector traffic_intensities(const NetworkSpec& spec, const Vector& lambda) {
  Vector rho = Vector::Zero(spec.num_stations);
  for (int k = 0; k < spec.num_classes(); ++k) rho(spec.station_of[k]) += lambda(k) * spec.mean_service(k);
  return rho;
}

inline std::vector<int> overloaded_stations(const Vector& rho) {
  std::vector<int> out;
  for (Index j = 0; j < rho.size(); ++j)
    if (rho(j) >= 1.0) out.push_back(static_cast<int>(j));
  return out;
}

inline constexpr const char* kBusyFractionCaveat =
    "rho_j is the nominal load; in multiclass networks it is not guaranteed to equal the long-run busy "
    "fraction of station j (stability is assumed, not verified).";

struct ConstraintCheck {
  std::string name;
  double load;
  bool satisfied;
};

inline std::vector<ConstraintCheck> check_stability_constraints(const NetworkSpec& spec, const Vector& lambda) {
  std::vector<ConstraintCheck> out;
  for (const auto& c : spec.stability_constraints) {
    double load = 0;
    for (int k : c.classes) load += lambda(k) * spec.mean_service(k);
    out.push_back({c.name, load, load < 1.0});
  }
  return out;
}

}  // namespace sbpnet
