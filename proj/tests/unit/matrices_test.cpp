#include <random>

#include <gtest/gtest.h>

#include "sbpnet/matrices.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace sbpnet;

namespace {

struct Built {
  NetworkSpec canon;
  CanonicalIndexing idx;
};

Built build(const NetworkSpec& s, const PriorityPolicy& p) {
  auto idx = canonicalize(s, p);
  return {to_canonical_spec(s, idx), idx};
}

oracle::Verdict as_oracle(PVerdict v) {
  switch (v) {
    case PVerdict::yes: return oracle::Verdict::yes;
    case PVerdict::no: return oracle::Verdict::no;
    default: return oracle::Verdict::indeterminate;
  }
}

}  // namespace

TEST(BuildB, ReentrantClassThreeSuccessorIsFive) {
  const auto b = build(fixture::reentrant(0.9, 0.99), fixture::lbfs());
  const Matrix B = build_B(b.idx);
  const int c3 = b.idx.to_canonical[2], c5 = b.idx.to_canonical[4];
  EXPECT_EQ(B.row(c3).sum(), 1.0);
  EXPECT_EQ(B(c3, c5), 1.0);
  EXPECT_TRUE(B.row(c5).isZero(0));
  EXPECT_TRUE(B.row(b.idx.to_canonical[1]).isZero(0));
  EXPECT_EQ(B(b.idx.to_canonical[3], b.idx.to_canonical[1]), 1.0);
}

TEST(BuildB, SingleClassIsZero) {
  const auto b = build(fixture::mm1(0.5), fixture::single());
  EXPECT_EQ(build_B(b.idx), Matrix::Zero(1, 1));
}

TEST(BuildB, ChainOfThree) {
  NetworkSpec s = fixture::two_class_station(1, 1, 0.1, 0.1);
  s.station_of.push_back(0);
  s.arrival_rate.conservativeResize(3);
  s.arrival_rate(2) = 1;
  s.mean_service.conservativeResize(3);
  s.mean_service(2) = 0.1;
  s.routing = Matrix::Zero(3, 3);
  s.arrival_dist.resize(3);
  s.service_dist.resize(3);
  const auto b = build(s, fixture::policy("{(1,2,3)}"));  // a=1 > b=2 > c=3
  const Matrix B = build_B(b.idx);
  auto at = [&](int from, int to) { return B(b.idx.to_canonical[from], b.idx.to_canonical[to]); };
  EXPECT_EQ(at(1, 0), 1.0);
  EXPECT_EQ(at(2, 1), 1.0);
  EXPECT_TRUE(B.row(b.idx.to_canonical[0]).isZero(0));
  EXPECT_EQ(B.sum(), 2.0);
}

TEST(BuildA, DefinitionAndBlocks) {
  const auto b = build(fixture::reentrant(0.96, 0.99), fixture::lbfs());
  const Matrix B = build_B(b.idx);
  const auto blocks = build_A_and_blocks(b.canon, b.idx, B);
  // Entry-wise: A_{ij} = sum_l (I - P^T)_{il} mu_l (I - B)_{lj}.
  const int K = 5;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      double v = 0;
      for (int l = 0; l < K; ++l)
        v += ((i == l) - b.canon.routing(l, i)) / b.canon.mean_service(l) * ((l == j) - B(l, j));
      EXPECT_NEAR(blocks.A(i, j), v, 1e-12);
    }
  EXPECT_EQ(blocks.A_H.rows(), 3);
  EXPECT_EQ(blocks.A_L.rows(), 2);
  EXPECT_EQ(blocks.A_LH.cols(), 3);
  EXPECT_EQ(blocks.A_HL.rows(), 3);
  EXPECT_TRUE(std::isfinite(blocks.ah_condition));
  EXPECT_NE(oracle::laplace_det({{blocks.A_H(0, 0), blocks.A_H(0, 1), blocks.A_H(0, 2)},
                                 {blocks.A_H(1, 0), blocks.A_H(1, 1), blocks.A_H(1, 2)},
                                 {blocks.A_H(2, 0), blocks.A_H(2, 1), blocks.A_H(2, 2)}}),
            0.0);
}

TEST(BuildA, SingleClass) {
  const auto b = build(fixture::mm1(0.5), fixture::single());
  const auto blocks = build_A_and_blocks(b.canon, b.idx, build_B(b.idx));
  EXPECT_NEAR(blocks.A(0, 0), 2.0, 1e-15);
  EXPECT_EQ(blocks.A_H.size(), 0);
}

TEST(BuildQR, EmptyHighSetGivesRoutingBlock) {
  NetworkSpec s = fixture::two_class_station(1, 0, 0.3, 0.3);
  s.num_stations = 2;
  s.station_of = {0, 1};
  s.routing(0, 1) = 0.7;
  s.routing(1, 0) = 0.2;
  const auto b = build(s, fixture::policy("{(1),(2)}"));
  const auto blocks = build_A_and_blocks(b.canon, b.idx, build_B(b.idx));
  const auto qr = build_Q_R(blocks, b.canon.routing, b.idx);
  EXPECT_EQ(qr.Q, b.canon.routing);
  EXPECT_EQ(qr.R, Matrix(Matrix::Identity(2, 2) - b.canon.routing.transpose()));
}

TEST(BuildQR, NoRoutingGivesZeroQ) {
  // Two independent flows at one station; P_LH = 0.
  NetworkSpec s = fixture::two_class_station(0.3, 0.3, 0.5, 0.5);
  const auto b = build(s, fixture::policy("{(1,2)}"));
  const auto blocks = build_A_and_blocks(b.canon, b.idx, build_B(b.idx));
  const auto qr = build_Q_R(blocks, b.canon.routing, b.idx);
  EXPECT_NEAR(qr.Q(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(qr.R(0, 0), 1.0, 1e-15);
}

TEST(BuildQR, ReentrantIsPMatrix) {
  const auto b = build(fixture::reentrant(0.96, 0.99), fixture::lbfs());
  const auto blocks = build_A_and_blocks(b.canon, b.idx, build_B(b.idx));
  const auto qr = build_Q_R(blocks, b.canon.routing, b.idx);
  EXPECT_EQ(qr.R.rows(), 2);
  EXPECT_EQ(check_P_matrix(qr.R).verdict, PVerdict::yes);
  EXPECT_LT(max_abs(qr.R - (Matrix::Identity(2, 2) - qr.Q.transpose())), 1e-15);
}

TEST(PMatrix, Identity) {
  const auto r = check_P_matrix(Matrix::Identity(4, 4));
  EXPECT_EQ(r.verdict, PVerdict::yes);
  EXPECT_EQ(r.minors_checked, 15);
}

TEST(PMatrix, TwoByTwoCounterexample) {
  Matrix m(2, 2);
  m << 1, -2, -2, 1;
  const auto r = check_P_matrix(m);
  EXPECT_EQ(r.verdict, PVerdict::no);
  EXPECT_EQ(r.witness, (std::vector<int>{0, 1}));
  EXPECT_NEAR(r.witness_minor, -3.0, 1e-12);
}

TEST(PMatrix, ZeroMinorIsIndeterminate) {
  Matrix m(2, 2);
  m << 1, 1, 1, 1;
  const auto r = check_P_matrix(m);
  EXPECT_EQ(r.verdict, PVerdict::indeterminate);
  EXPECT_EQ(r.witness, (std::vector<int>{0, 1}));
}

TEST(PMatrix, WitnessIsLexicographicallyFirst) {
  Matrix m = Matrix::Identity(3, 3);
  m(2, 2) = -1;
  m(0, 1) = 3;
  m(1, 0) = 3;
  const auto r = check_P_matrix(m);
  EXPECT_EQ(r.verdict, PVerdict::no);
  EXPECT_EQ(r.witness, (std::vector<int>{0, 1}));
}

TEST(PMatrix, GuardTriggers) { EXPECT_THROW(check_P_matrix(Matrix::Identity(5, 5), 4), DimensionTooLarge); }

TEST(PMatrix, MatchesBruteForceOnRandomMatrices) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  int counts[3] = {0, 0, 0};
  for (int t = 0; t < 400; ++t) {
    const int n = 1 + t % 6;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = n01(rng) * (i == j ? 1.0 : 0.4) + (i == j ? 1.0 : 0.0);
    const auto v = check_P_matrix(m).verdict;
    EXPECT_EQ(as_oracle(v), oracle::brute_force_p_matrix(m)) << m;
    ++counts[static_cast<int>(v)];
  }
  EXPECT_GT(counts[0], 20);
  EXPECT_GT(counts[1], 20);
}

TEST(BuildW, SingleStation) {
  Matrix q(1, 1);
  q << 0.3;
  EXPECT_NEAR(build_w(q).w(0, 0), 0.3, 1e-15);
}

TEST(BuildW, StrictlyLowerTriangular) {
  Matrix q = Matrix::Zero(3, 3);
  q(1, 0) = 0.5;
  q(2, 0) = 0.25;
  q(2, 1) = 0.4;
  const auto w = build_w(q);
  // Column 1 is Q's; upper blocks of later columns vanish; w_{3,2} = Q_32 + Q_31 w_12 = 0.4.
  EXPECT_LT((w.w.col(0) - q.col(0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(w.w(2, 1), 0.4, 1e-15);
  EXPECT_NEAR(w.w(0, 1), 0.0, 1e-15);
  EXPECT_LE(w.identity_residual, 1e-15);
}

TEST(BuildW, DiagonalMatchesLeadingInverse) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 0.3);
  for (int t = 0; t < 50; ++t) {
    Matrix q(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) q(i, j) = u(rng);
    const auto w = build_w(q);
    for (int k = 0; k < 4; ++k) {
      const Matrix lead = Matrix::Identity(k + 1, k + 1) - q.topLeftCorner(k + 1, k + 1);
      EXPECT_NEAR(1.0 / (1.0 - w.w(k, k)), lead.inverse()(k, k), 1e-10);
    }
    EXPECT_LE(w.identity_residual, 1e-12);
  }
}

TEST(BuildU, FirstVectorIsUnitOnLowBlock) {
  const auto b = build(fixture::reentrant(0.96, 0.99), fixture::lbfs());
  const auto mb = build_matrix_bundle(b.canon, b.idx);
  EXPECT_EQ(mb.u[0](0), 1.0);
  EXPECT_EQ(mb.u[0](1), 0.0);
  EXPECT_EQ(mb.u[1](1), 1.0);
  EXPECT_NEAR(mb.u[1](0), mb.w(0, 1), 1e-15);
}

TEST(BuildU, EmptyHighSet) {
  NetworkSpec s = fixture::two_class_station(1, 0.2, 0.3, 0.3);
  s.num_stations = 2;
  s.station_of = {0, 1};
  s.routing(0, 1) = 0.7;
  const auto b = build(s, fixture::policy("{(1),(2)}"));
  const auto mb = build_matrix_bundle(b.canon, b.idx);
  ASSERT_EQ(mb.u[1].size(), 2);
  EXPECT_NEAR(mb.u[1](0), mb.w(0, 1), 1e-15);
  EXPECT_EQ(mb.u[1](1), 1.0);
}

TEST(StationIdentity, ReentrantBothPolicies) {
  for (auto pol : {"{(5,3,1),(2,4)}", "{(5,3,1),(4,2)}"}) {
    const auto b = build(fixture::reentrant(0.96, 0.99), fixture::policy(pol));
    const auto mb = build_matrix_bundle(b.canon, b.idx);
    for (const auto& u : mb.u) EXPECT_LE(station_identity_check(b.canon, u), 1e-8);
    EXPECT_LE(mb.diagnostics.reflection_tilde_residual, 1e-8);
    EXPECT_LE(mb.diagnostics.reflection_bar_residual, 1e-8);
  }
}

TEST(Reflection, SingleClassForms) {
  const auto b = build(fixture::mm1(0.5), fixture::single());
  const auto blocks = build_A_and_blocks(b.canon, b.idx, build_B(b.idx));
  const auto qr = build_Q_R(blocks, b.canon.routing, b.idx);
  const auto f = reflection_equivalence_check(b.canon, blocks, qr.R);
  EXPECT_NEAR(qr.R(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(f.R_tilde(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(f.R_bar(0, 0), 1.0, 1e-15);
  EXPECT_EQ(f.tilde_residual, 0.0);
  EXPECT_EQ(f.bar_residual, 0.0);
}

// Structural identities on random instances: P-matrix verdict vs brute force,
// w identity, both u routes, station identity, and equivalence of the
// three reflection forms (including identical P-matrix verdicts).
TEST(MatrixProperty, RandomInstances) {
  std::mt19937_64 rng(99);
  int analysed = 0;
  for (int t = 0; t < 200; ++t) {
    const auto inst = oracle::random_instance(rng);
    const auto b = build(inst.spec, inst.policy);
    ABlocks blocks;
    try {
      blocks = build_A_and_blocks(b.canon, b.idx, build_B(b.idx));
    } catch (const AssumptionFailure&) {
      continue;
    }
    const auto qr = build_Q_R(blocks, b.canon.routing, b.idx);
    const auto verdict = check_P_matrix(qr.R);
    ASSERT_EQ(as_oracle(verdict.verdict), oracle::brute_force_p_matrix(qr.R));
    if (verdict.verdict != PVerdict::yes) continue;
    ++analysed;
    const auto w = build_w(qr.Q);
    EXPECT_LE(w.identity_residual, 1e-10);
    for (int k = 0; k < b.idx.num_low; ++k) {
      EXPECT_GT(1.0 - w.w(k, k), 0.0);
      const Vector u1 = u_primary(blocks, w.w, k);
      const Vector u2 = u_alternative(b.canon, qr.Q, w.w, k);
      EXPECT_LE((u1 - u2).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, u1.cwiseAbs().maxCoeff()));
      EXPECT_LE(station_identity_check(b.canon, u1), 1e-8);
      for (int l = k + 1; l < b.idx.num_low; ++l) EXPECT_EQ(u1(l), 0.0);
    }
    const auto f = reflection_equivalence_check(b.canon, blocks, qr.R);
    EXPECT_LE(f.tilde_residual, 1e-8);
    EXPECT_LE(f.bar_residual, 1e-8);
    EXPECT_EQ(check_P_matrix(f.R_tilde).verdict, PVerdict::yes);
    EXPECT_EQ(check_P_matrix(f.R_bar).verdict, PVerdict::yes);
  }
  EXPECT_GT(analysed, 100);
}
