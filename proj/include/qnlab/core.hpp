#ifndef QNLAB_CORE_HPP
#define QNLAB_CORE_HPP

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace qnlab {

/// Working precision. Extended precision keeps the exact line search
/// certifiable when steps are many orders of magnitude below |x|.
using Scalar = long double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments when building an objective, a matrix policy, or a scheme.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

// Compensated (Neumaier) summation; objective values are sums of many terms
// of mixed magnitude.
class NeumaierSum {
 public:
  void add(Scalar v) {
    const Scalar t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_ = 0.0;
  Scalar comp_ = 0.0;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Scalar asymmetry(const Matrix& a) {
  const Scalar scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

}  // namespace detail

// Symmetric eigen utilities shared by objectives, updates, and diagnostics.
namespace linalg {

inline Vector symmetric_eigenvalues(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("symmetric eigendecomposition failed");
  return es.eigenvalues();
}

inline Scalar min_eigenvalue(const Matrix& a) { return symmetric_eigenvalues(a).minCoeff(); }
inline Scalar max_eigenvalue(const Matrix& a) { return symmetric_eigenvalues(a).maxCoeff(); }

/// Spectral norm of a symmetric matrix.
inline Scalar symmetric_norm(const Matrix& a) {
  const Vector ev = symmetric_eigenvalues(a);
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

inline bool is_symmetric(const Matrix& a, Scalar rel_tol = 1e-12) {
  return a.rows() == a.cols() && detail::asymmetry(a) <= rel_tol;
}

inline bool is_spd(const Matrix& a, Scalar rel_tol = 1e-12) {
  if (!is_symmetric(a, rel_tol)) return false;
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success;
}

/// log Det of an SPD matrix through its Cholesky factor.
inline Scalar log_det_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw Error("log_det_spd: matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Returns (A^{1/2}, A^{-1/2}) for an SPD matrix from one eigendecomposition.
inline std::pair<Matrix, Matrix> spd_sqrt_pair(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw Error("symmetric eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) throw ConstructionError("spd_sqrt_pair: matrix is not positive definite");
  const Matrix& q = es.eigenvectors();
  Matrix root = q * ev.cwiseSqrt().asDiagonal() * q.transpose();
  Matrix inv_root = q * ev.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  root = 0.5 * (root + root.transpose()).eval();
  inv_root = 0.5 * (inv_root + inv_root.transpose()).eval();
  return {std::move(root), std::move(inv_root)};
}

}  // namespace linalg

/// Deterministic 64-bit generator with a platform-independent uniform map.
/// The engine is std::mt19937_64; doubles come from the top 53 bits.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1), 53 random bits.
  Scalar uniform01() { return static_cast<Scalar>(static_cast<double>(engine_() >> 11) * 0x1.0p-53); }
  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (no implementation-defined distributions).
  Scalar normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    Scalar u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const Scalar u2 = uniform01();
    const Scalar r = std::sqrt(-2.0 * std::log(u1));
    const Scalar t = 2 * std::numbers::pi_v<Scalar> * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  Vector uniform_vector(Index n, Scalar lo, Scalar hi) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  Scalar spare_ = 0.0;
};

/// x0 drawn per-coordinate uniform on [-1, 1].
inline Vector random_start(Index dim, std::uint64_t seed) {
  SeededRng rng(seed);
  return rng.uniform_vector(dim, -1.0, 1.0);
}

}  // namespace qnlab

#endif  // QNLAB_CORE_HPP
