#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntx {

using Index = Eigen::Index;

// Dense carriers. Row-major storage, so a document matrix slices into
// contiguous receptive fields and embedding rows stay contiguous.
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

// A vector of class probabilities: entries in [0,1] summing to 1.
using ProbVector = Vector;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Violated precondition or shape contract.
struct ContractError : Error {
  using Error::Error;
};
// Malformed input file.
struct ParseError : Error {
  using Error::Error;
};
// Invalid run configuration; the CLI maps this to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

std::string shape_str(const Matrix& m);
void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what);
void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what);

// Deterministic random stream. Draws come from mt19937_64 and every
// distribution is derived from the raw 64-bit output by hand, so a seed
// reproduces the same stream on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return x % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Seed-stable Fisher-Yates.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace ntx
