#pragma once

#include <cstdint>
#include <random>

#include "sbpnet/network.hpp"

namespace sbpnet {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of replication `rep` under `master`.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t rep) {
  return splitmix64(master ^ splitmix64(0xA5A5A5A5ULL + rep));
}

enum class StreamKind : std::uint64_t { arrival = 0, service = 1, routing = 2 };

// One substream per (kind, class) so that two policies run with the same seed
// see identical primitive sequences.
inline std::uint64_t stream_seed(std::uint64_t rep_seed, StreamKind kind, int cls) {
  return splitmix64(rep_seed + 0x9E3779B97F4A7C15ULL * (3ULL * static_cast<std::uint64_t>(cls) +
                                                        static_cast<std::uint64_t>(kind) + 1ULL));
}

// Draws unit-mean variates of the given family.
class UnitSampler {
 public:
  UnitSampler() = default;
  explicit UnitSampler(const DistributionSpec& d) : family_(d.family) {
    if (family_ == Family::gamma) gamma_ = std::gamma_distribution<double>(d.gamma_shape(), d.gamma_scale());
    if (family_ == Family::hyperexponential2) h2_ = d.h2();
  }

  double operator()(Rng& g) {
    switch (family_) {
      case Family::gamma: return gamma_(g);
      case Family::exponential: return exp_(g);
      case Family::deterministic: return 1.0;
      case Family::hyperexponential2: {
        const double rate = unit_(g) < h2_.p1 ? h2_.rate1 : h2_.rate2;
        return exp_(g) / rate;
      }
    }
    return 1.0;
  }

 private:
  Family family_ = Family::exponential;
  std::gamma_distribution<double> gamma_{1.0, 1.0};
  std::exponential_distribution<double> exp_{1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  DistributionSpec::H2 h2_{1.0, 1.0, 1.0};
};

}  // namespace sbpnet
