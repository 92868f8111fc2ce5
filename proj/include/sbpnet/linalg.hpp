#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbpnet/errors.hpp"

namespace sbpnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Smallest admissible |pivot| of an LU factorization, relative to the largest
// entry of the factored matrix.
inline constexpr double kPivotTolerance = 1e-12;

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double min_abs_pivot(const Eigen::PartialPivLU<Matrix>& lu) {
  if (lu.matrixLU().rows() == 0) return 0.0;
  return lu.matrixLU().diagonal().cwiseAbs().minCoeff();
}

inline bool pivots_ok(const Eigen::PartialPivLU<Matrix>& lu, double scale, double tol = kPivotTolerance) {
  if (lu.matrixLU().rows() == 0) return true;
  return min_abs_pivot(lu) > tol * std::max(scale, 1e-300);
}

// LU with partial pivoting; throws when the smallest pivot falls under the tolerance.
inline Eigen::PartialPivLU<Matrix> factorize(const Matrix& a, const std::string& what,
                                             double tol = kPivotTolerance) {
  if (a.rows() != a.cols()) throw InvalidArgument(what + ": matrix is not square");
  Eigen::PartialPivLU<Matrix> lu(a);
  if (a.rows() > 0 && !pivots_ok(lu, max_abs(a), tol)) {
    throw SingularMatrixError(what + " is singular (smallest pivot " + std::to_string(min_abs_pivot(lu)) + ")");
  }
  return lu;
}

inline Matrix inverse(const Matrix& a, const std::string& what) {
  if (a.rows() == 0) return Matrix(0, 0);
  return factorize(a, what).inverse();
}

inline Vector solve(const Matrix& a, const Vector& b, const std::string& what) {
  if (a.rows() == 0) return Vector(0);
  return factorize(a, what).solve(b);
}

// Exact 1-norm condition number; matrices here are small.
inline double condition_1norm(const Matrix& a) {
  if (a.rows() == 0) return 1.0;
  Eigen::PartialPivLU<Matrix> lu(a);
  if (!pivots_ok(lu, max_abs(a))) return INFINITY;
  const Matrix inv = lu.inverse();
  auto norm1 = [](const Matrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); };
  return norm1(a) * norm1(inv);
}

inline Matrix submatrix(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline Vector subvector(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

inline std::vector<int> iota_indices(int begin, int end) {
  std::vector<int> out;
  for (int i = begin; i < end; ++i) out.push_back(i);
  return out;
}

}  // namespace sbpnet
