#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lapreg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for violated preconditions and numerical failures anywhere in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Derives an independent child seed from a master seed and a stream tag.
/// SplitMix64 finalizer over (master, tag); stable across platforms.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

/// Convenience for hierarchical derivation, e.g. split_seed(master, {n, replicate}).
std::uint64_t split_seed(std::uint64_t master, std::initializer_list<std::uint64_t> streams);

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

/// Ordinary least squares y ≈ intercept + slope·x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // 0 when only two points
  double r2 = 1.0;
  std::size_t points = 0;
};

/// Needs at least two distinct x values.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// ‖a − b‖_n over the first `count` entries: sqrt(mean of squared differences).
double empirical_loss(const Vector& a, const Vector& b, Index count);

}  // namespace lapreg
