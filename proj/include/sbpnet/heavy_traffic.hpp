#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sbpnet/errors.hpp"
#include "sbpnet/linalg.hpp"
#include "sbpnet/matrices.hpp"
#include "sbpnet/network.hpp"
#include "sbpnet/policy.hpp"

namespace sbpnet {

// ---------------------------------------------------------------------------
// Quadratic variance functional and its per-class pieces.

// zeta_bar_l(theta) = -theta_l + sum_l' P_ll' theta_l'
inline Vector zeta_bar(const NetworkSpec& spec, const Vector& theta) { return -theta + spec.routing * theta; }

inline Vector zeta_tilde(const NetworkSpec& spec, const Vector& theta) {
  const Vector pt = spec.routing * theta;
  const Vector pt2 = spec.routing * theta.cwiseAbs2();
  const Vector zb = -theta + pt;
  return 0.5 * (pt2 - pt.cwiseAbs2() + spec.scv_service().cwiseProduct(zb.cwiseAbs2()));
}

inline Vector zeta_star(const NetworkSpec& spec, const Vector& theta) {
  return zeta_bar(spec, theta) + zeta_tilde(spec, theta);
}

// gamma_bar_l = theta_l for l in E; zero outside E.
inline Vector gamma_bar(const NetworkSpec& spec, const Vector& theta) {
  return (spec.arrival_rate.array() > 0).select(theta, Vector::Zero(theta.size()));
}

inline Vector gamma_tilde(const NetworkSpec& spec, const Vector& theta) {
  return (spec.arrival_rate.array() > 0).select(0.5 * spec.scv_arrival().cwiseProduct(theta.cwiseAbs2()),
                                                Vector::Zero(theta.size()));
}

inline Vector gamma_star(const NetworkSpec& spec, const Vector& theta) {
  return gamma_bar(spec, theta) + gamma_tilde(spec, theta);
}

inline double qstar(const NetworkSpec& spec, const Vector& lambda, const Vector& theta) {
  const Vector ce2 = spec.scv_arrival();
  const Vector cs2 = spec.scv_service();
  double arrivals = 0.0;
  for (int l = 0; l < spec.num_classes(); ++l)
    if (spec.arrival_rate(l) > 0) arrivals += spec.arrival_rate(l) * ce2(l) * theta(l) * theta(l);
  double routing_and_service = 0.0;
  for (int l = 0; l < spec.num_classes(); ++l) {
    double sum_sq = 0.0, sum = 0.0;
    for (int lp = 0; lp < spec.num_classes(); ++lp) {
      sum_sq += spec.routing(l, lp) * theta(lp) * theta(lp);
      sum += spec.routing(l, lp) * theta(lp);
    }
    const double move = -theta(l) + sum;
    routing_and_service += lambda(l) * (sum_sq - sum * sum + cs2(l) * move * move);
  }
  return 0.5 * arrivals + 0.5 * routing_and_service;
}

// sum_{l in E} alpha_l gamma*_l + sum_l lambda_l zeta*_l; the first-order parts
// cancel through the traffic equations.
inline double qstar_decomposed(const NetworkSpec& spec, const Vector& lambda, const Vector& theta) {
  return spec.arrival_rate.dot(gamma_star(spec, theta)) + lambda.dot(zeta_star(spec, theta));
}

// ---------------------------------------------------------------------------
// Geometric approximation on {0,1,2,...} with the exponential limit's mean.

class GeometricApprox {
 public:
  explicit GeometricApprox(double mean) : mean_(mean) {
    if (!(mean > 0) || !std::isfinite(mean)) throw InvalidArgument("geometric approximation needs a positive mean");
    ratio_ = mean / (1.0 + mean);
  }

  double mean() const { return mean_; }
  double success_probability() const { return 1.0 / (1.0 + mean_); }
  double ratio() const { return ratio_; }
  double pmf(long n) const { return n < 0 ? 0.0 : success_probability() * std::pow(ratio_, static_cast<double>(n)); }
  // P(Z > n)
  double tail(long n) const { return n < 0 ? 1.0 : std::pow(ratio_, static_cast<double>(n + 1)); }

  // Probabilities on bins 0..cap with the last bin holding P(Z >= cap).
  std::vector<double> binned(long cap) const {
    std::vector<double> out(static_cast<std::size_t>(cap + 1));
    for (long n = 0; n < cap; ++n) out[n] = pmf(n);
    out[cap] = tail(cap - 1);
    return out;
  }

 private:
  double mean_;
  double ratio_;
};

// ---------------------------------------------------------------------------
// Limit constants and the steady-state approximation.

struct LowClassConstants {
  int canonical = 0;
  int user_class = 0;
  int station = 0;
  double sigma2 = 0;         // 2 q*(u^(k))
  double one_minus_wkk = 0;
  double mu = 0;             // service rate of the class
  double d = 0;              // exponential mean of the scaled limit
  double mean_estimate = 0;  // d / (1 - rho_station), jobs
  double geom_p = 0;         // 1 / (1 + mean_estimate)
};

struct HeavyTrafficConstants {
  std::vector<LowClassConstants> low;  // canonical order = station order

  double total_low_mean() const {
    double s = 0;
    for (const auto& c : low) s += c.mean_estimate;
    return s;
  }
};

enum class AnalysisStatus { ok, assumption_failure };

struct AnalysisReport {
  NetworkSpec spec;  // user indexing
  PriorityPolicy policy;
  CanonicalIndexing indexing;
  NetworkSpec canonical;
  Vector lambda;  // user indexing
  Vector rho;
  Vector beta;    // user indexing
  std::vector<ConstraintCheck> constraints;
  std::optional<MatrixBundle> matrices;
  HeavyTrafficConstants constants;
  double cycle_time = NAN;
  AnalysisStatus status = AnalysisStatus::ok;
  std::string failure_tag;
  std::string failure_message;

  bool ok() const { return status == AnalysisStatus::ok; }

  // Approximate mean queue length per user class: the estimate for low classes,
  // zero for high classes (they vanish in the limit).
  Vector mean_by_class() const {
    Vector out = Vector::Zero(spec.num_classes());
    for (const auto& c : constants.low) out(c.user_class) = c.mean_estimate;
    return out;
  }
};

struct AnalysisOptions {
  MatrixOptions matrix;
};

inline HeavyTrafficConstants constants_from_bundle(const NetworkSpec& canon, const CanonicalIndexing& idx,
                                                   const Vector& lambda_canon, const Vector& rho,
                                                   const MatrixBundle& mb) {
  HeavyTrafficConstants out;
  for (int k = 0; k < idx.num_low; ++k) {
    LowClassConstants c;
    c.canonical = k;
    c.user_class = idx.to_user[k];
    c.station = k;
    c.sigma2 = 2.0 * qstar(canon, lambda_canon, mb.u[k]);
    c.one_minus_wkk = mb.diagnostics.one_minus_wkk[k];
    c.mu = 1.0 / canon.mean_service(k);
    c.d = c.sigma2 / (2.0 * c.one_minus_wkk * c.mu);
    c.mean_estimate = c.d / (1.0 - rho(k));
    c.geom_p = 1.0 / (1.0 + c.mean_estimate);
    out.low.push_back(c);
  }
  return out;
}

// Runs the whole analytic pipeline. Assumption failures are recorded in the
// report; malformed input throws.
inline AnalysisReport analyze(const NetworkSpec& spec, const PriorityPolicy& policy, const AnalysisOptions& opts = {}) {
  if (auto diags = validate_spec(spec); !diags.empty())
    throw InvalidArgument("invalid network: " + diags.front().path + ": " + diags.front().message);
  AnalysisReport rep;
  rep.spec = spec;
  rep.policy = policy;
  rep.indexing = canonicalize(spec, policy);
  rep.canonical = to_canonical_spec(spec, rep.indexing);
  rep.lambda = solve_traffic(spec);
  rep.rho = traffic_intensities(spec, rep.lambda);
  rep.beta = idle_probabilities(spec, rep.indexing, rep.lambda);
  rep.constraints = check_stability_constraints(spec, rep.lambda);
  Vector lambda_canon(spec.num_classes());
  for (int c = 0; c < spec.num_classes(); ++c) lambda_canon(c) = rep.lambda(rep.indexing.to_user[c]);
  try {
    rep.matrices = build_matrix_bundle(rep.canonical, rep.indexing, opts.matrix);
    if (auto over = overloaded_stations(rep.rho); !over.empty())
      throw AssumptionFailure(AssumptionFailure::Kind::unstable_load,
                              "station " + label(over.front()) + " has rho >= 1");
    rep.constants = constants_from_bundle(rep.canonical, rep.indexing, lambda_canon, rep.rho, *rep.matrices);
    rep.cycle_time = rep.constants.total_low_mean() / spec.total_arrival_rate();
  } catch (const AssumptionFailure& e) {
    rep.status = AnalysisStatus::assumption_failure;
    rep.failure_tag = e.tag();
    rep.failure_message = e.what();
  }
  return rep;
}

// Throws AssumptionFailure when the theory does not apply to the policy.
inline HeavyTrafficConstants compute_constants(const NetworkSpec& spec, const PriorityPolicy& policy) {
  AnalysisReport rep = analyze(spec, policy);
  if (!rep.ok()) {
    using K = AssumptionFailure::Kind;
    K kind = K::not_p_matrix;
    if (rep.failure_tag == "singular_A_H") kind = K::singular_high_block;
    if (rep.failure_tag == "R_P_matrix_indeterminate") kind = K::p_matrix_indeterminate;
    if (rep.failure_tag == "rho_ge_1") kind = K::unstable_load;
    throw AssumptionFailure(kind, rep.failure_message);
  }
  return rep.constants;
}

// Little's law over the whole system with the high-priority queues dropped.
inline double cycle_time_estimate(const HeavyTrafficConstants& constants, const NetworkSpec& spec) {
  return constants.total_low_mean() / spec.total_arrival_rate();
}

// ---------------------------------------------------------------------------
// Hand-derived limit means for the two-station five-class re-entrant line
// (route 1->2->3->4->5, stations 1,2,1,2,1) under {(5,3,1),(2,4)}.

inline bool is_reentrant_2s5c(const NetworkSpec& spec) {
  if (spec.num_stations != 2 || spec.num_classes() != 5) return false;
  const std::vector<int> stations{0, 1, 0, 1, 0};
  if (spec.station_of != stations) return false;
  Matrix chain = Matrix::Zero(5, 5);
  for (int k = 0; k < 4; ++k) chain(k, k + 1) = 1.0;
  if (max_abs(spec.routing - chain) > 0) return false;
  return spec.arrival_rate(0) > 0 && spec.arrival_rate.tail(4).isZero(0);
}

struct ReentrantD {
  double d1;
  double d4;
};

inline ReentrantD closed_form_d(const NetworkSpec& spec, const PriorityPolicy& policy) {
  if (!is_reentrant_2s5c(spec) || policy != PriorityPolicy{{{4, 2, 0}, {1, 3}}})
    throw InvalidArgument("closed_form_d applies only to the 2-station 5-class re-entrant line under {(5,3,1),(2,4)}");
  const double a = spec.arrival_rate(0);
  const double ce = spec.arrival_dist[0].scv;
  const auto& m = spec.mean_service;
  const Vector cs = spec.scv_service();
  const double m1 = m(0), m2 = m(1), m3 = m(2), m4 = m(3), m5 = m(4);
  const double eff = m1 + m3 - m5 * m2 / m4;
  const double d1 = a / (2.0 * eff) *
                    (eff * eff * ce + m1 * m1 * cs(0) + m3 * m3 * cs(2) + m5 * m5 * cs(4) +
                     (m5 / m4) * (m5 / m4) * (m2 * m2 * cs(1) + m4 * m4 * cs(3)));
  const double d4 = a / (2.0 * m4) * ((m2 + m4) * (m2 + m4) * ce + m2 * m2 * cs(1) + m4 * m4 * cs(3));
  return {d1, d4};
}

// ---------------------------------------------------------------------------
// Families of networks.

class NegativeServiceMean : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline void require_unit_load(const NetworkSpec& spec, const char* who) {
  const Vector rho = traffic_intensities(spec, solve_traffic(spec));
  if ((rho - Vector::Ones(rho.size())).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidArgument(std::string(who) + ": base network must have rho = 1 at every station");
}

// Means rescaled so every station carries unit load.
inline NetworkSpec unit_load_base(const NetworkSpec& spec) {
  const Vector rho = traffic_intensities(spec, solve_traffic(spec));
  NetworkSpec out = spec;
  for (int k = 0; k < spec.num_classes(); ++k) out.mean_service(k) /= rho(spec.station_of[k]);
  return out;
}

// m_k = rho_{s(k)} * base_m_k.
inline NetworkSpec build_load_profile(const NetworkSpec& base, const Vector& rho) {
  require_unit_load(base, "build_load_profile");
  if (rho.size() != base.num_stations) throw InvalidArgument("build_load_profile: one load per station required");
  for (Index j = 0; j < rho.size(); ++j)
    if (!(rho(j) > 0 && rho(j) <= 1)) throw InvalidArgument("build_load_profile: loads must lie in (0,1]");
  NetworkSpec out = base;
  for (int k = 0; k < base.num_classes(); ++k) out.mean_service(k) *= rho(base.station_of[k]);
  return out;
}

// m_k(r) = m_k + r^{s(k)} m*_k with s(k) the 1-based station index. The
// perturbation sits on each station's lowest-priority class.
class MultiScaleFamily {
 public:
  MultiScaleFamily(NetworkSpec base, const PriorityPolicy& policy, Vector b) : base_(std::move(base)), b_(std::move(b)) {
    require_unit_load(base_, "build_multiscale_family");
    if (b_.size() != base_.num_stations) throw InvalidArgument("build_multiscale_family: one b per station required");
    if (!(b_.array() > 0).all()) throw InvalidArgument("build_multiscale_family: b must be positive");
    if (auto diags = validate_policy(base_, policy); !diags.empty())
      throw InvalidArgument("build_multiscale_family: " + diags.front().message);
    const Vector lambda = solve_traffic(base_);
    perturbation_ = Vector::Zero(base_.num_classes());
    max_r_ = INFINITY;
    for (int j = 0; j < base_.num_stations; ++j) {
      const int k = policy.order[j].back();
      if (!(lambda(k) > 0)) throw InvalidArgument("build_multiscale_family: low class " + label(k) + " has zero flow");
      perturbation_(k) = -b_(j) / lambda(k);
      max_r_ = std::min(max_r_, std::pow(base_.mean_service(k) * lambda(k) / b_(j), 1.0 / (j + 1)));
    }
  }

  const NetworkSpec& base() const { return base_; }
  const Vector& b() const { return b_; }
  const Vector& perturbation() const { return perturbation_; }
  // Members exist (all means positive) for r < max_r().
  double max_r() const { return max_r_; }

  NetworkSpec member(double r) const {
    if (!(r > 0)) throw InvalidArgument("multi-scale member index r must be positive");
    NetworkSpec out = base_;
    for (int k = 0; k < base_.num_classes(); ++k)
      out.mean_service(k) += std::pow(r, base_.station_of[k] + 1) * perturbation_(k);
    for (int k = 0; k < base_.num_classes(); ++k)
      if (!(out.mean_service(k) > 0))
        throw NegativeServiceMean("r = " + std::to_string(r) + " makes the mean service time of class " + label(k) +
                                  " non-positive (need r < " + std::to_string(max_r_) + ")");
    return out;
  }

 private:
  NetworkSpec base_;
  Vector b_;
  Vector perturbation_;
  double max_r_;
};

inline MultiScaleFamily build_multiscale_family(const NetworkSpec& base, const PriorityPolicy& policy, const Vector& b) {
  return MultiScaleFamily(base, policy, b);
}

}  // namespace sbpnet
