#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's linear algebra except for container types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "sbpnet/network.hpp"
#include "sbpnet/policy.hpp"

namespace oracle {

using sbpnet::Matrix;
using sbpnet::Vector;

// Cofactor expansion along the first row.
inline double laplace_det(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0) return 1.0;
  if (n == 1) return a[0][0];
  if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (a[0][c] == 0.0) continue;
    std::vector<std::vector<double>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t cc = 0; cc < n; ++cc)
        if (cc != c) row.push_back(a[r][cc]);
      minor.push_back(std::move(row));
    }
    det += ((c % 2) ? -1.0 : 1.0) * a[0][c] * laplace_det(minor);
  }
  return det;
}

enum class Verdict { yes, no, indeterminate };

// Principal minors enumerated by bitmask, evaluated by cofactor expansion,
// with the same positivity band as the library (1e-12 times the Hadamard bound).
inline Verdict brute_force_p_matrix(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  bool indeterminate = false;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    std::vector<std::vector<double>> sub(idx.size(), std::vector<double>(idx.size()));
    double bound = 1.0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      double norm2 = 0.0;
      for (std::size_t c = 0; c < idx.size(); ++c) {
        sub[r][c] = m(idx[r], idx[c]);
        norm2 += sub[r][c] * sub[r][c];
      }
      bound *= std::sqrt(norm2);
    }
    const double det = laplace_det(sub);
    const double tol = 1e-12 * bound;
    if (det <= -tol || (det <= tol && bound == 0.0)) return Verdict::no;
    if (det <= tol) indeterminate = true;
  }
  return indeterminate ? Verdict::indeterminate : Verdict::yes;
}

// Traffic equations by fixed-point iteration lambda = alpha + P^T lambda.
inline Vector traffic_by_iteration(const sbpnet::NetworkSpec& spec, int iters = 20000) {
  Vector lambda = spec.arrival_rate;
  for (int i = 0; i < iters; ++i) {
    Vector next = spec.arrival_rate + spec.routing.transpose() * lambda;
    if ((next - lambda).cwiseAbs().maxCoeff() < 1e-15) return next;
    lambda = next;
  }
  return lambda;
}

inline double mm1_mean(double rho) { return rho / (1.0 - rho); }

// Pollaczek-Khinchine number in system for M/G/1.
inline double pk_mean(double arrival_rate, double mean_service, double scv) {
  const double rho = arrival_rate * mean_service;
  const double es2 = (1.0 + scv) * mean_service * mean_service;
  return rho + arrival_rate * arrival_rate * es2 / (2.0 * (1.0 - rho));
}

struct PriorityCtmcResult {
  double mean_high = 0, mean_low = 0;
  double idle_high = 0, idle_all = 0;
  double boundary_mass = 0;  // probability on the truncation faces
};

// Single station, two exponential classes, class 0 preemptive over class 1.
// State (n0, n1) truncated at n_i <= cap; arrivals into a full buffer are lost.
inline PriorityCtmcResult priority_ctmc(double a0, double a1, double mu0, double mu1, int cap) {
  const int side = cap + 1;
  const int n = side * side;
  auto id = [side](int i, int j) { return i * side + j; };
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> out_rate(n, 0.0);
  auto add = [&](int from, int to, double rate) {
    trips.emplace_back(to, from, rate);  // transposed generator
    out_rate[from] += rate;
  };
  for (int i = 0; i <= cap; ++i)
    for (int j = 0; j <= cap; ++j) {
      const int s = id(i, j);
      if (i < cap) add(s, id(i + 1, j), a0);
      if (j < cap) add(s, id(i, j + 1), a1);
      if (i > 0) add(s, id(i - 1, j), mu0);
      else if (j > 0) add(s, id(i, j - 1), mu1);
    }
  for (int s = 0; s < n; ++s) trips.emplace_back(s, s, -out_rate[s]);
  // Replace the first balance equation by the normalization.
  std::vector<Eigen::Triplet<double>> final_trips;
  for (const auto& t : trips)
    if (t.row() != 0) final_trips.push_back(t);
  for (int s = 0; s < n; ++s) final_trips.emplace_back(0, s, 1.0);
  Eigen::SparseMatrix<double> g(n, n);
  g.setFromTriplets(final_trips.begin(), final_trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(g);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = 1.0;
  const Eigen::VectorXd pi = lu.solve(rhs);
  PriorityCtmcResult r;
  for (int i = 0; i <= cap; ++i)
    for (int j = 0; j <= cap; ++j) {
      const double p = pi(id(i, j));
      r.mean_high += i * p;
      r.mean_low += j * p;
      if (i == 0) r.idle_high += p;
      if (i == 0 && j == 0) r.idle_all += p;
      if (i == cap || j == cap) r.boundary_mass += p;
    }
  return r;
}

struct RandomInstance {
  sbpnet::NetworkSpec spec;
  sbpnet::PriorityPolicy policy;
};

// Open network with J <= max_stations stations and K <= max_classes classes,
// every station nonempty, station loads in [0.3, 0.95].
inline RandomInstance random_instance(std::mt19937_64& rng, int max_stations = 3, int max_classes = 8) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int J = std::uniform_int_distribution<int>(1, max_stations)(rng);
  const int K = std::uniform_int_distribution<int>(J, std::max(J, max_classes))(rng);
  sbpnet::NetworkSpec spec;
  spec.num_stations = J;
  spec.station_of.resize(K);
  for (int k = 0; k < K; ++k) spec.station_of[k] = k < J ? k : std::uniform_int_distribution<int>(0, J - 1)(rng);
  std::shuffle(spec.station_of.begin(), spec.station_of.end(), rng);
  spec.arrival_rate = Vector::Zero(K);
  for (int k = 0; k < K; ++k)
    if (u01(rng) < 0.4) spec.arrival_rate(k) = 0.2 + u01(rng);
  if (!(spec.arrival_rate.array() > 0).any()) spec.arrival_rate(0) = 1.0;
  spec.routing = Matrix::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    const double total = 0.9 * u01(rng);
    Vector w = Vector::Zero(K);
    for (int l = 0; l < K; ++l)
      if (u01(rng) < 0.5) w(l) = u01(rng);
    if (w.sum() > 0) spec.routing.row(k) = total * w.transpose() / w.sum();
  }
  spec.mean_service = Vector::Zero(K);
  for (int k = 0; k < K; ++k) spec.mean_service(k) = 0.1 + u01(rng);
  spec.arrival_dist.assign(K, sbpnet::DistributionSpec::exponential());
  spec.service_dist.resize(K);
  for (int k = 0; k < K; ++k) {
    spec.arrival_dist[k] = sbpnet::DistributionSpec::gamma_shape(0.3 + 2.0 * u01(rng));
    spec.service_dist[k] = sbpnet::DistributionSpec::gamma_shape(0.3 + 2.0 * u01(rng));
  }
  Vector lambda = traffic_by_iteration(spec);
  for (int k = 0; k < K; ++k)
    if (!(lambda(k) > 1e-6)) spec.arrival_rate(k) = 0.1 + 0.5 * u01(rng);
  lambda = traffic_by_iteration(spec);
  Vector rho = Vector::Zero(J);
  for (int k = 0; k < K; ++k) rho(spec.station_of[k]) += lambda(k) * spec.mean_service(k);
  Vector target(J);
  for (int j = 0; j < J; ++j) target(j) = 0.3 + 0.65 * u01(rng);
  for (int k = 0; k < K; ++k) spec.mean_service(k) *= target(spec.station_of[k]) / rho(spec.station_of[k]);
  RandomInstance inst{spec, {}};
  for (int j = 0; j < J; ++j) {
    auto cls = spec.classes_at(j);
    std::shuffle(cls.begin(), cls.end(), rng);
    inst.policy.order.push_back(cls);
  }
  return inst;
}

}  // namespace oracle
