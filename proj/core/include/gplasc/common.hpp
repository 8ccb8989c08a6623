// ============================================================================
// common.hpp - shared aliases, error types, deterministic RNG
// ============================================================================
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gplasc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Ambient dimension too small for the requested construction.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Optimization produced a non-finite or runaway loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed config file; carries a 1-based line number (0 = whole file).
struct ConfigError : std::runtime_error {
  int line = 0;
  ConfigError(const std::string& msg, int line_no = 0)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seeded generator. Uniform doubles come straight from mt19937_64 bits and
// normals from Box-Muller, so streams are identical across standard-library
// implementations. child(stream) derives an independent generator from the
// original seed, irrespective of how much this one has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Vector normal_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(int rows, int cols) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = normal();
    return m;
  }

  // Unit vector uniform on the sphere.
  Vector unit_vector(int n) {
    Vector v = normal_vector(n);
    const double norm = v.norm();
    if (norm == 0.0) {
      v.setZero();
      v[0] = 1.0;
      return v;
    }
    return v / norm;
  }

  // Fisher-Yates shuffle of an index vector.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      std::swap(items[static_cast<std::size_t>(i)],
                items[static_cast<std::size_t>(uniform_int(0, i))]);
    }
  }

  // Independent derived stream; stable in the parent's consumption state.
  Rng child(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ (0xA24BAED4963EE407ULL + stream * 0x9FB21C651E98DF25ULL)));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// log(sum_i exp(x_i)) with max-shift.
inline double logsumexp(const Vector& x) {
  const double m = x.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

// Normalizes every row to unit Euclidean norm; zero rows map to e_1.
inline void normalize_rows(Matrix& m) {
  for (int r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (norm == 0.0) {
      m.row(r).setZero();
      m(r, 0) = 1.0;
    } else {
      m.row(r) /= norm;
    }
  }
}

}  // namespace gplasc
