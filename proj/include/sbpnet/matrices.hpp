#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sbpnet/errors.hpp"
#include "sbpnet/linalg.hpp"
#include "sbpnet/network.hpp"
#include "sbpnet/policy.hpp"

// Matrix objects of the multi-scale heavy-traffic analysis. Every function here
// takes the network in canonical class order (see to_canonical_spec): indices
// 0..J-1 are the station-lowest classes L, J..K-1 the high classes H.

namespace sbpnet {

// B_{k,k+} = 1; rows of station-top classes are zero.
inline Matrix build_B(const CanonicalIndexing& idx) {
  const int K = idx.num_classes();
  Matrix B = Matrix::Zero(K, K);
  for (int k = 0; k < K; ++k)
    if (const int up = idx.successor[k]; up >= 0) B(k, up) = 1.0;
  return B;
}

struct ABlocks {
  Matrix A, A_L, A_H, A_LH, A_HL;
  double ah_condition = 1.0;  // 1-norm condition number of A_H (1 when H is empty)
};

// A = (I - P^T) diag(mu) (I - B), split along L/H. Throws AssumptionFailure when
// A_H is singular.
inline ABlocks build_A_and_blocks(const NetworkSpec& canon, const CanonicalIndexing& idx, const Matrix& B) {
  const int K = canon.num_classes();
  const Matrix I = Matrix::Identity(K, K);
  const Vector mu = canon.mean_service.cwiseInverse();
  ABlocks b;
  b.A = (I - canon.routing.transpose()) * mu.asDiagonal() * (I - B);
  const auto L = idx.low_set();
  const auto H = idx.high_set();
  b.A_L = submatrix(b.A, L, L);
  b.A_H = submatrix(b.A, H, H);
  b.A_LH = submatrix(b.A, L, H);
  b.A_HL = submatrix(b.A, H, L);
  if (!H.empty()) {
    Eigen::PartialPivLU<Matrix> lu(b.A_H);
    if (!pivots_ok(lu, max_abs(b.A_H)))
      throw AssumptionFailure(AssumptionFailure::Kind::singular_high_block,
                              "A_H is singular (smallest pivot " + std::to_string(min_abs_pivot(lu)) + ")");
    b.ah_condition = condition_1norm(b.A_H);
  }
  return b;
}

struct QR {
  Matrix Q, R;
};

// Q = P_L - P_LH A_H^{-T} A_LH^T and R = I - Q^T. With H empty, Q = P_L.
inline QR build_Q_R(const ABlocks& blocks, const Matrix& routing, const CanonicalIndexing& idx) {
  const auto L = idx.low_set();
  const auto H = idx.high_set();
  const int J = idx.num_low;
  QR out;
  out.Q = submatrix(routing, L, L);
  if (!H.empty()) {
    const Matrix P_LH = submatrix(routing, L, H);
    // A_H^{-T} A_LH^T = (A_LH A_H^{-1})^T
    const Matrix x = factorize(blocks.A_H.transpose(), "A_H^T").solve(blocks.A_LH.transpose());
    out.Q -= P_LH * x;
  }
  out.R = Matrix::Identity(J, J) - out.Q.transpose();
  return out;
}

enum class PVerdict { yes, no, indeterminate };

inline const char* verdict_name(PVerdict v) {
  switch (v) {
    case PVerdict::yes: return "yes";
    case PVerdict::no: return "no";
    case PVerdict::indeterminate: return "indeterminate";
  }
  return "?";
}

struct PMatrixResult {
  PVerdict verdict = PVerdict::yes;
  std::vector<int> witness;  // lowest-lexicographic offending principal index set
  double witness_minor = 0.0;
  long long minors_checked = 0;
};

inline constexpr int kDefaultPMatrixGuard = 20;

// Exhaustive principal-minor test. A minor counts as positive when it exceeds
// 1e-12 times the product of its rows' Euclidean norms (Hadamard bound); minors
// within that band are "indeterminate". Subsets are visited in lexicographic
// order and the first clearly non-positive one is the witness.
inline PMatrixResult check_P_matrix(const Matrix& R, int max_dim = kDefaultPMatrixGuard) {
  if (R.rows() != R.cols()) throw InvalidArgument("check_P_matrix: matrix is not square");
  const int n = static_cast<int>(R.rows());
  if (n > max_dim)
    throw DimensionTooLarge("P-matrix check on " + std::to_string(n) + "x" + std::to_string(n) +
                            " exceeds the guard of " + std::to_string(max_dim));
  PMatrixResult result;
  std::optional<std::pair<std::vector<int>, double>> first_indeterminate;
  std::vector<int> subset;
  bool failed = false;

  auto visit = [&](auto&& self, int next) -> void {
    for (int i = next; i < n && !failed; ++i) {
      subset.push_back(i);
      const Matrix sub = submatrix(R, subset, subset);
      const double det = sub.rows() == 1 ? sub(0, 0) : sub.partialPivLu().determinant();
      double bound = 1.0;
      for (Index r = 0; r < sub.rows(); ++r) bound *= sub.row(r).norm();
      const double tol = 1e-12 * bound;
      ++result.minors_checked;
      if (det <= -tol || (det <= tol && bound == 0.0)) {
        failed = true;
        result.verdict = PVerdict::no;
        result.witness = subset;
        result.witness_minor = det;
        return;
      }
      if (det <= tol && !first_indeterminate) first_indeterminate.emplace(subset, det);
      self(self, i + 1);
      subset.pop_back();
    }
  };
  visit(visit, 0);
  if (!failed && first_indeterminate) {
    result.verdict = PVerdict::indeterminate;
    result.witness = first_indeterminate->first;
    result.witness_minor = first_indeterminate->second;
  }
  return result;
}

struct WMatrix {
  Matrix w;
  double identity_residual = 0.0;  // max |w_ij - Q_ij - sum_{l<j} Q_il w_lj|
};

// Columns per the w recursion; column k uses (I - Q_{1:k-1,1:k-1})^{-1}.
inline WMatrix build_w(const Matrix& Q) {
  const int J = static_cast<int>(Q.rows());
  WMatrix out;
  out.w = Matrix::Zero(J, J);
  for (int k = 0; k < J; ++k) {
    if (k == 0) {
      out.w.col(0) = Q.col(0);
      continue;
    }
    const Matrix lead = Matrix::Identity(k, k) - Q.topLeftCorner(k, k);
    const Vector head = factorize(lead, "I - Q_{1:" + std::to_string(k) + ",1:" + std::to_string(k) + "}")
                            .solve(Vector(Q.col(k).head(k)));
    out.w.col(k).head(k) = head;
    out.w.col(k).tail(J - k) = Q.col(k).tail(J - k) + Q.bottomLeftCorner(J - k, k) * head;
  }
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < J; ++i) {
      double rhs = Q(i, j);
      for (int l = 0; l < j; ++l) rhs += Q(i, l) * out.w(l, j);
      out.identity_residual = std::max(out.identity_residual, std::abs(out.w(i, j) - rhs));
    }
  if (out.identity_residual > 1e-10 * std::max(1.0, max_abs(out.w)))
    throw InternalConsistencyError("w fixed-point identity residual " + std::to_string(out.identity_residual));
  return out;
}

// u_L^{(k)} = (w_{1:k-1,k}, 1, 0, ..., 0).
inline Vector u_low(const Matrix& w, int k) {
  const int J = static_cast<int>(w.rows());
  Vector uL = Vector::Zero(J);
  uL.head(k) = w.col(k).head(k);
  uL(k) = 1.0;
  return uL;
}

// u^{(k)} via u_H = -A_H^{-T} A_LH^T u_L.
inline Vector u_primary(const ABlocks& blocks, const Matrix& w, int k) {
  const int J = static_cast<int>(w.rows());
  const Index nH = blocks.A_H.rows();
  Vector u(J + nH);
  const Vector uL = u_low(w, k);
  u.head(J) = uL;
  if (nH > 0) u.tail(nH) = -factorize(blocks.A_H.transpose(), "A_H^T").solve(blocks.A_LH.transpose() * uL);
  return u;
}

// Constituency matrix C (J x K): C_{jk} = 1 iff class k sits at station j.
inline Matrix constituency(const NetworkSpec& spec) {
  Matrix C = Matrix::Zero(spec.num_stations, spec.num_classes());
  for (int k = 0; k < spec.num_classes(); ++k) C(spec.station_of[k], k) = 1.0;
  return C;
}

// u^{(k)} = (I - P)^{-1} M C^T diag(mu_L) (I - Q) u_L.
inline Vector u_alternative(const NetworkSpec& canon, const Matrix& Q, const Matrix& w, int k) {
  const int K = canon.num_classes();
  const int J = static_cast<int>(Q.rows());
  const Vector uL = u_low(w, k);
  const Vector muL = canon.mean_service.head(J).cwiseInverse();
  const Vector rhs = canon.mean_service.asDiagonal() * (constituency(canon).transpose() *
                                                         (muL.asDiagonal() * ((Matrix::Identity(J, J) - Q) * uL)));
  return solve(Matrix::Identity(K, K) - canon.routing, rhs, "I-P");
}

inline Vector build_u(const NetworkSpec& canon, const ABlocks& blocks, const Matrix& Q, const Matrix& w, int k) {
  Vector u = u_primary(blocks, w, k);
  const Vector alt = u_alternative(canon, Q, w, k);
  const double diff = (u - alt).cwiseAbs().maxCoeff();
  if (diff > 1e-8 * std::max(1.0, u.cwiseAbs().maxCoeff()))
    throw InternalConsistencyError("u^(" + label(k) + ") routes disagree by " + std::to_string(diff));
  return u;
}

// max_l |(u_l - (Pu)_l) mu_l - (u_s - (Pu)_s) mu_s| with s = s(l) read as its
// canonical low class. Returned relative to max(1, max_l |(u_l - (Pu)_l) mu_l|).
inline double station_identity_check(const NetworkSpec& canon, const Vector& u) {
  const Vector net = (u - canon.routing * u).cwiseProduct(canon.mean_service.cwiseInverse());
  double resid = 0.0;
  for (int l = 0; l < canon.num_classes(); ++l)
    resid = std::max(resid, std::abs(net(l) - net(canon.station_of[l])));
  return resid / std::max(1.0, net.cwiseAbs().maxCoeff());
}

struct ReflectionForms {
  Matrix R_tilde;  // A_L - A_LH A_H^{-1} A_HL
  Matrix R_bar;    // (I + G)^{-1}
  double tilde_residual = 0.0;  // |R_tilde - R diag(mu_L)|_max, relative
  double bar_residual = 0.0;    // |R_bar - diag(m_L) R_tilde|_max, relative
};

inline ReflectionForms reflection_equivalence_check(const NetworkSpec& canon, const ABlocks& blocks, const Matrix& R) {
  const int K = canon.num_classes();
  const int J = static_cast<int>(R.rows());
  const Vector mL = canon.mean_service.head(J);
  const Vector muL = mL.cwiseInverse();
  ReflectionForms f;
  f.R_tilde = blocks.A_L;
  if (blocks.A_H.rows() > 0) f.R_tilde -= blocks.A_LH * factorize(blocks.A_H, "A_H").solve(blocks.A_HL);
  Matrix lift = Matrix::Zero(K, J);
  lift.topRows(J) = muL.asDiagonal();
  const Matrix G = constituency(canon) * canon.mean_service.asDiagonal() *
                   factorize(Matrix::Identity(K, K) - canon.routing.transpose(), "I-P^T")
                       .solve(canon.routing.transpose() * lift);
  f.R_bar = inverse(Matrix::Identity(J, J) + G, "I+G");
  const Matrix rt = R * muL.asDiagonal();
  f.tilde_residual = max_abs(f.R_tilde - rt) / std::max(1.0, max_abs(rt));
  const Matrix rb = mL.asDiagonal() * f.R_tilde;
  f.bar_residual = max_abs(f.R_bar - rb) / std::max(1.0, max_abs(rb));
  return f;
}

struct MatrixDiagnostics {
  double ah_condition = 1.0;
  PMatrixResult p_matrix;
  std::vector<double> one_minus_wkk;
  double w_identity_residual = 0.0;
  double max_station_identity_residual = 0.0;
  double reflection_tilde_residual = 0.0;
  double reflection_bar_residual = 0.0;
};

struct MatrixBundle {
  Matrix B, A, A_L, A_H, A_LH, A_HL, Q, R, w;
  std::vector<Vector> u;  // u^{(k)} for k in L, canonical indexing
  MatrixDiagnostics diagnostics;
};

struct MatrixOptions {
  int p_matrix_guard = kDefaultPMatrixGuard;
  bool require_p_matrix = true;  // false: continue past a failed verdict if w is still computable
};

// Full matrix pipeline. Throws AssumptionFailure when A_H is singular or R is
// not (verifiably) a P-matrix.
inline MatrixBundle build_matrix_bundle(const NetworkSpec& canon, const CanonicalIndexing& idx,
                                        const MatrixOptions& opts = {}) {
  MatrixBundle mb;
  mb.B = build_B(idx);
  const ABlocks blocks = build_A_and_blocks(canon, idx, mb.B);
  mb.A = blocks.A;
  mb.A_L = blocks.A_L;
  mb.A_H = blocks.A_H;
  mb.A_LH = blocks.A_LH;
  mb.A_HL = blocks.A_HL;
  mb.diagnostics.ah_condition = blocks.ah_condition;
  const QR qr = build_Q_R(blocks, canon.routing, idx);
  mb.Q = qr.Q;
  mb.R = qr.R;
  mb.diagnostics.p_matrix = check_P_matrix(mb.R, opts.p_matrix_guard);
  if (opts.require_p_matrix && mb.diagnostics.p_matrix.verdict != PVerdict::yes) {
    std::string set;
    for (int i : mb.diagnostics.p_matrix.witness) set += (set.empty() ? "" : ",") + label(i);
    const bool no = mb.diagnostics.p_matrix.verdict == PVerdict::no;
    throw AssumptionFailure(no ? AssumptionFailure::Kind::not_p_matrix : AssumptionFailure::Kind::p_matrix_indeterminate,
                            std::string("R is ") + (no ? "not" : "not verifiably") + " a P-matrix: principal minor {" +
                                set + "} = " + std::to_string(mb.diagnostics.p_matrix.witness_minor));
  }
  const WMatrix w = build_w(mb.Q);
  mb.w = w.w;
  mb.diagnostics.w_identity_residual = w.identity_residual;
  for (int k = 0; k < idx.num_low; ++k) {
    mb.diagnostics.one_minus_wkk.push_back(1.0 - mb.w(k, k));
    mb.u.push_back(build_u(canon, blocks, mb.Q, mb.w, k));
    mb.diagnostics.max_station_identity_residual =
        std::max(mb.diagnostics.max_station_identity_residual, station_identity_check(canon, mb.u.back()));
  }
  const ReflectionForms rf = reflection_equivalence_check(canon, blocks, mb.R);
  mb.diagnostics.reflection_tilde_residual = rf.tilde_residual;
  mb.diagnostics.reflection_bar_residual = rf.bar_residual;
  return mb;
}

}  // namespace sbpnet
