#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gthmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when a numerical step cannot be completed (singular linear system,
/// non-finite gradient, runaway trajectory). Samplers turn it into a rejection.
class StepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The density vanished (or underflowed) where a tempered metric needs log pi.
class TemperingSingularity : public StepFailure {
 public:
  using StepFailure::StepFailure;
};

inline void require_dim(const Vector& x, Eigen::Index dim, const char* what) {
  if (x.size() != dim) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(dim) + ", got " +
                                std::to_string(x.size()));
  }
}

inline Vector standard_normal(Rng& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal;
  Vector z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// SplitMix64 finalizer. Derives independent stream seeds from a master seed:
/// stream k of master m is seeded with split_seed(m, k).
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace gthmc
