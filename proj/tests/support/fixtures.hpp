#pragma once

#include <string>

#include "sbpnet/network.hpp"
#include "sbpnet/policy.hpp"

namespace fixture {

using sbpnet::DistributionSpec;
using sbpnet::Matrix;
using sbpnet::NetworkSpec;
using sbpnet::PriorityPolicy;
using sbpnet::Vector;

// Two-station five-class re-entrant line 1->2->3->4->5, stations (1,2,1,2,1),
// alpha_1 = 1, gamma primitives with shapes 0.75 (arrivals) and
// (0.95, 0.6, 0.95, 0.6, 0.95) (services).
inline NetworkSpec reentrant(double rho1, double rho2) {
  NetworkSpec s;
  s.num_stations = 2;
  s.station_of = {0, 1, 0, 1, 0};
  s.arrival_rate = Vector::Zero(5);
  s.arrival_rate(0) = 1.0;
  s.mean_service.resize(5);
  s.mean_service << rho1 / 2.0, rho2 / 3.0, rho1 / 4.0, 2.0 * rho2 / 3.0, rho1 / 4.0;
  s.routing = Matrix::Zero(5, 5);
  for (int k = 0; k < 4; ++k) s.routing(k, k + 1) = 1.0;
  s.arrival_dist.assign(5, DistributionSpec::gamma_shape(0.75));
  const double shapes[5] = {0.95, 0.6, 0.95, 0.6, 0.95};
  for (double a : shapes) s.service_dist.push_back(DistributionSpec::gamma_shape(a));
  return s;
}

inline PriorityPolicy lbfs() { return sbpnet::parse_policy("{(5,3,1),(2,4)}"); }
inline PriorityPolicy policy(const std::string& text) { return sbpnet::parse_policy(text); }

inline NetworkSpec single_station(double arrival_rate, double mean_service, DistributionSpec arrival,
                                  DistributionSpec service) {
  NetworkSpec s;
  s.num_stations = 1;
  s.station_of = {0};
  s.arrival_rate = Vector::Constant(1, arrival_rate);
  s.mean_service = Vector::Constant(1, mean_service);
  s.routing = Matrix::Zero(1, 1);
  s.arrival_dist = {arrival};
  s.service_dist = {service};
  return s;
}

inline NetworkSpec mm1(double rho) {
  return single_station(1.0, rho, DistributionSpec::exponential(), DistributionSpec::exponential());
}

inline PriorityPolicy single() { return PriorityPolicy{{{0}}}; }

// One station, two exponential classes with external arrivals; class 1 has
// priority under policy {(1,2)}.
inline NetworkSpec two_class_station(double a0, double a1, double m0, double m1) {
  NetworkSpec s;
  s.num_stations = 1;
  s.station_of = {0, 0};
  s.arrival_rate.resize(2);
  s.arrival_rate << a0, a1;
  s.mean_service.resize(2);
  s.mean_service << m0, m1;
  s.routing = Matrix::Zero(2, 2);
  s.arrival_dist.assign(2, DistributionSpec::exponential());
  s.service_dist.assign(2, DistributionSpec::exponential());
  return s;
}

}  // namespace fixture
