#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sbpnet/errors.hpp"

namespace sbpnet {

struct ConfidenceInterval {
  double mean = 0;
  double half_width = 0;
  int n = 0;

  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
  // |value - mean| <= multiple * half_width
  bool covers(double value, double multiple = 1.0) const { return std::abs(value - mean) <= multiple * half_width; }
};

// Student-t 95% interval across independent replication means.
inline ConfidenceInterval ci(std::span<const double> samples, double level = 0.95) {
  const auto n = static_cast<int>(samples.size());
  if (n < 2) throw InvalidArgument("confidence interval needs at least 2 samples");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1));
  const boost::math::students_t dist(n - 1);
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  return {mean, t * sd / std::sqrt(static_cast<double>(n)), n};
}

// Joint pmf on integer bins 0..nx-1 x 0..ny-1 (last bin of each axis is the
// overflow bucket), stored row-major by x.
class JointPMF {
 public:
  JointPMF() = default;
  JointPMF(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), p_(nx * ny, 0.0) {}
  JointPMF(std::size_t nx, std::size_t ny, std::vector<double> p) : nx_(nx), ny_(ny), p_(std::move(p)) {
    if (p_.size() != nx_ * ny_) throw InvalidArgument("JointPMF: size mismatch");
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double& at(std::size_t x, std::size_t y) { return p_[x * ny_ + y]; }
  double at(std::size_t x, std::size_t y) const { return p_[x * ny_ + y]; }
  const std::vector<double>& data() const { return p_; }

  double total() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }

  void normalize() {
    const double t = total();
    if (t > 0)
      for (double& v : p_) v /= t;
  }

  std::vector<double> marginal_x() const {
    std::vector<double> m(nx_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t y = 0; y < ny_; ++y) m[x] += at(x, y);
    return m;
  }

  std::vector<double> marginal_y() const {
    std::vector<double> m(ny_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t y = 0; y < ny_; ++y) m[y] += at(x, y);
    return m;
  }

  JointPMF transposed() const {
    JointPMF t(ny_, nx_);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t y = 0; y < ny_; ++y) t.at(y, x) = at(x, y);
    return t;
  }

 private:
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<double> p_;
};

class DegenerateJoint : public Error {
 public:
  using Error::Error;
};

// Information quality ratio I(X;Y)/H(X,Y), natural log, 0 log 0 = 0.
inline double iqr(const JointPMF& joint) {
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();
  double cross = 0.0, self = 0.0;
  for (std::size_t x = 0; x < joint.nx(); ++x)
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      const double p = joint.at(x, y);
      if (p <= 0) continue;
      cross += p * std::log(px[x] * py[y]);
      self += p * std::log(p);
    }
  if (self == 0.0) throw DegenerateJoint("IQR undefined: the joint distribution is a single atom (H(X,Y) = 0)");
  return cross / self - 1.0;
}

struct HistComparison {
  double total_variation = 0;
  long q90 = 0, q99 = 0;  // reference quantiles
  double tail_ratio_q90 = NAN;  // P_emp(Z > q90) / P_ref(Z > q90)
  double tail_ratio_q99 = NAN;
};

// Both pmfs on the same integer bins.
inline HistComparison hist_compare(std::span<const double> empirical, std::span<const double> reference) {
  if (empirical.size() != reference.size() || empirical.empty())
    throw InvalidArgument("hist_compare: binning mismatch (" + std::to_string(empirical.size()) + " vs " +
                          std::to_string(reference.size()) + " bins)");
  HistComparison out;
  for (std::size_t i = 0; i < empirical.size(); ++i) out.total_variation += std::abs(empirical[i] - reference[i]);
  out.total_variation *= 0.5;

  auto quantile = [&](double level) {
    double acc = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
      acc += reference[i];
      if (acc >= level) return static_cast<long>(i);
    }
    return static_cast<long>(reference.size() - 1);
  };
  auto tail = [](std::span<const double> p, long q) {
    double s = 0;
    for (std::size_t i = static_cast<std::size_t>(q + 1); i < p.size(); ++i) s += p[i];
    return s;
  };
  out.q90 = quantile(0.90);
  out.q99 = quantile(0.99);
  const double r90 = tail(reference, out.q90), r99 = tail(reference, out.q99);
  out.tail_ratio_q90 = r90 > 0 ? tail(empirical, out.q90) / r90 : NAN;
  out.tail_ratio_q99 = r99 > 0 ? tail(empirical, out.q99) / r99 : NAN;
  return out;
}

}  // namespace sbpnet
