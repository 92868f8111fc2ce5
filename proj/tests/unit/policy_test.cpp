#include <random>

#include <gtest/gtest.h>

#include "sbpnet/policy.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace sbpnet;

TEST(PolicyText, RoundTrip) {
  const auto p = parse_policy("{(5,3,1),(2,4)}");
  ASSERT_EQ(p.order.size(), 2u);
  EXPECT_EQ(p.order[0], (std::vector<int>{4, 2, 0}));
  EXPECT_EQ(p.order[1], (std::vector<int>{1, 3}));
  EXPECT_EQ(to_string(p), "{(5,3,1),(2,4)}");
  EXPECT_EQ(parse_policy("5,3,1;2,4"), p);
  EXPECT_EQ(parse_policy("(5 3 1)(2 4)"), p);
}

TEST(PolicyText, RejectsJunk) {
  EXPECT_THROW(parse_policy("{(5,x,1)}"), InvalidArgument);
  EXPECT_THROW(parse_policy("5,(3,1)"), InvalidArgument);
}

TEST(ValidatePolicy, UnknownDuplicateMisplacedMissing) {
  const auto s = fixture::reentrant(0.9, 0.9);
  EXPECT_TRUE(validate_policy(s, fixture::lbfs()).empty());
  EXPECT_EQ(validate_policy(s, parse_policy("{(6,3,1),(2,4)}")).front().message, "unknown class 6");
  EXPECT_FALSE(validate_policy(s, parse_policy("{(3,3,1),(2,4)}")).empty());
  EXPECT_FALSE(validate_policy(s, parse_policy("{(5,3,2),(1,4)}")).empty());
  EXPECT_FALSE(validate_policy(s, parse_policy("{(5,3,1),(4)}")).empty());
  EXPECT_FALSE(validate_policy(s, parse_policy("{(5,3,1)}")).empty());
}

TEST(Canonicalize, ReentrantLbfs) {
  const auto idx = canonicalize(fixture::reentrant(0.9, 0.99), fixture::lbfs());
  EXPECT_EQ(idx.num_low, 2);
  // L = (class 1, class 4); H = (3, 5, 2): by station, ascending priority.
  EXPECT_EQ(idx.to_user, (std::vector<int>{0, 3, 2, 4, 1}));
  EXPECT_EQ(idx.to_canonical[0], 0);
  EXPECT_EQ(idx.to_canonical[3], 1);
  // k+ of class 3 is class 5; class 5 and class 2 are station tops.
  EXPECT_EQ(idx.to_user[idx.successor[idx.to_canonical[2]]], 4);
  EXPECT_EQ(idx.successor[idx.to_canonical[4]], -1);
  EXPECT_EQ(idx.successor[idx.to_canonical[1]], -1);
  EXPECT_EQ(idx.to_user[idx.successor[idx.to_canonical[0]]], 2);
}

TEST(Canonicalize, AlternativeSecondStation) {
  const auto idx = canonicalize(fixture::reentrant(0.9, 0.99), fixture::policy("{(5,3,1),(4,2)}"));
  EXPECT_EQ(idx.to_user[1], 1);
}

TEST(Canonicalize, SingleClass) {
  const auto idx = canonicalize(fixture::mm1(0.5), fixture::single());
  EXPECT_EQ(idx.num_low, 1);
  EXPECT_TRUE(idx.high_set().empty());
  EXPECT_EQ(idx.successor[0], -1);
}

TEST(Canonicalize, MismatchThrows) {
  EXPECT_THROW(canonicalize(fixture::reentrant(0.9, 0.9), fixture::policy("{(1,3,5),(2)}")), InvalidArgument);
}

TEST(Canonicalize, BijectionOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracle::random_instance(rng);
    const auto idx = canonicalize(inst.spec, inst.policy);
    const int K = inst.spec.num_classes();
    for (int k = 0; k < K; ++k) {
      EXPECT_EQ(idx.to_user[idx.to_canonical[k]], k);
      EXPECT_EQ(idx.to_canonical[idx.to_user[k]], k);
    }
    for (int j = 0; j < idx.num_low; ++j) {
      EXPECT_EQ(idx.station[j], j);
      EXPECT_EQ(idx.to_user[j], inst.policy.order[j].back());
    }
    const auto canon = to_canonical_spec(inst.spec, idx);
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) EXPECT_EQ(canon.routing(a, b), inst.spec.routing(idx.to_user[a], idx.to_user[b]));
  }
}

TEST(IdleProbabilities, ReentrantValues) {
  const auto s = fixture::reentrant(0.96, 0.99);
  const auto idx = canonicalize(s, fixture::lbfs());
  const Vector beta = idle_probabilities(s, idx, solve_traffic(s));
  EXPECT_NEAR(beta(0), 0.04, 1e-14);
  EXPECT_NEAR(beta(4), 0.76, 1e-14);
  EXPECT_NEAR(beta(2), 1.0 - 0.96 * 0.5, 1e-14);  // classes 3 and 5
  EXPECT_NEAR(beta(1), 1.0 - 0.33, 1e-14);
  EXPECT_NEAR(beta(3), 0.01, 1e-14);
}

TEST(IdleProbabilities, LowClassesEqualStationIdle) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracle::random_instance(rng);
    const auto idx = canonicalize(inst.spec, inst.policy);
    const Vector lambda = solve_traffic(inst.spec);
    const Vector rho = traffic_intensities(inst.spec, lambda);
    const Vector beta = idle_probabilities(inst.spec, idx, lambda);
    for (int j = 0; j < inst.spec.num_stations; ++j)
      EXPECT_NEAR(beta(inst.policy.order[j].back()), 1.0 - rho(j), 1e-12);
    for (int k = 0; k < inst.spec.num_classes(); ++k) EXPECT_LT(beta(k), 1.0);
  }
}
