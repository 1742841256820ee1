#ifndef QNLAB_OBJECTIVES_HPP
#define QNLAB_OBJECTIVES_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "qnlab/core.hpp"

namespace qnlab {

// ---------------------------------------------------------------------------
// Smoothness constants
// ---------------------------------------------------------------------------

/// Where a smoothness constant came from.
enum class Provenance { exact, bound, sampled_estimate };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::exact: return "exact";
    case Provenance::bound: return "bound";
    case Provenance::sampled_estimate: return "sampled-estimate";
  }
  return "?";
}

/// Strong convexity mu, gradient Lipschitz L, Hessian Lipschitz M, and kappa = L / mu.
struct SmoothnessConstants {
  Scalar mu = 0.0;
  Scalar L = 0.0;
  Scalar M = 0.0;
  Scalar kappa = 0.0;
  Provenance mu_provenance = Provenance::exact;
  Provenance L_provenance = Provenance::exact;
  Provenance M_provenance = Provenance::exact;
};

/// Constants an objective knows analytically; missing entries are estimated.
struct KnownConstants {
  std::optional<Scalar> mu;
  std::optional<Scalar> L;
  std::optional<Scalar> M;
  Provenance mu_provenance = Provenance::exact;
  Provenance L_provenance = Provenance::exact;
  Provenance M_provenance = Provenance::exact;
};

/// Sampling budget for constants that are not known in closed form.
struct EstimationConfig {
  int samples = 48;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  Scalar radius = 2.0;
  Scalar L_safety = 1.05;
  Scalar M_safety = 2.0;
  int power_iterations = 80;
};

// ---------------------------------------------------------------------------
// Objective interface
// ---------------------------------------------------------------------------

/// A twice differentiable strongly convex function on R^d.
///
/// Implementations must be pure and reentrant. `value_change` should be
/// accurate when `from` and `to` are close: every certified quantity is a
/// ratio of small function-value differences.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Index dim() const = 0;
  virtual Scalar value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;

  virtual Vector hessian_vector_product(const Vector& x, const Vector& v) const { return hessian(x) * v; }

  /// f(to) - f(from).
  virtual Scalar value_change(const Vector& from, const Vector& to) const { return value(to) - value(from); }

  /// Interior points of (0, 1) where tau -> hess(from + tau (to - from)) is not smooth.
  virtual std::vector<Scalar> hessian_breakpoints(const Vector& /*from*/, const Vector& /*to*/) const { return {}; }

  /// sum_j weights[j] * hess(points[j]).
  virtual Matrix weighted_hessian_sum(std::span<const Vector> points, std::span<const Scalar> weights) const {
    Matrix acc = Matrix::Zero(dim(), dim());
    for (std::size_t j = 0; j < points.size(); ++j) acc += weights[j] * hessian(points[j]);
    return acc;
  }

  virtual KnownConstants known_constants() const { return {}; }
};

SmoothnessConstants smoothness_constants(const Objective& obj, const EstimationConfig& cfg = {});

/// An objective with its smoothness constants and a label.
///
/// Copies share the underlying evaluator, which is immutable.
class ObjectiveModel {
 public:
  ObjectiveModel(std::shared_ptr<const Objective> impl, SmoothnessConstants constants, std::string label)
      : impl_(std::move(impl)), constants_(constants), label_(std::move(label)) {}

  /// Fills missing constants through smoothness_constants.
  ObjectiveModel(std::shared_ptr<const Objective> impl, std::string label, const EstimationConfig& cfg = {})
      : impl_(std::move(impl)), label_(std::move(label)) {
    constants_ = smoothness_constants(*impl_, cfg);
  }

  Index dim() const { return impl_->dim(); }
  Scalar value_at(const Vector& x) const { return impl_->value(x); }
  Vector gradient_at(const Vector& x) const { return impl_->gradient(x); }
  Matrix hessian_at(const Vector& x) const { return impl_->hessian(x); }
  Scalar value_change(const Vector& from, const Vector& to) const { return impl_->value_change(from, to); }

  const Objective& impl() const { return *impl_; }
  const SmoothnessConstants& constants() const { return constants_; }
  const std::string& label() const { return label_; }

 private:
  std::shared_ptr<const Objective> impl_;
  SmoothnessConstants constants_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Quadratic
// ---------------------------------------------------------------------------

/// f(x) = 1/2 x^T A x - b^T x.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols() || a_.rows() != b_.size() || a_.rows() == 0)
      throw ConstructionError("make_quadratic: A must be square and match b");
    if (!linalg::is_symmetric(a_, 1e-12)) throw ConstructionError("make_quadratic: A is not symmetric");
    const Vector ev = linalg::symmetric_eigenvalues(a_);
    if (!(ev.minCoeff() > 0.0)) throw ConstructionError("make_quadratic: A is not positive definite");
    mu_ = ev.minCoeff();
    L_ = ev.maxCoeff();
  }

  Index dim() const override { return a_.rows(); }

  Scalar value(const Vector& x) const override { return x.dot(Scalar(0.5) * (a_ * x) - b_); }
  Vector gradient(const Vector& x) const override { return a_ * x - b_; }
  Matrix hessian(const Vector&) const override { return a_; }

  Scalar value_change(const Vector& from, const Vector& to) const override {
    const Vector s = to - from;
    return s.dot(Scalar(0.5) * (a_ * s) + (a_ * from - b_));
  }

  Matrix weighted_hessian_sum(std::span<const Vector>, std::span<const Scalar> weights) const override {
    Scalar total = 0.0;
    for (Scalar w : weights) total += w;
    return total * a_;
  }

  KnownConstants known_constants() const override {
    KnownConstants k;
    k.mu = mu_;
    k.L = L_;
    k.M = 0.0;
    return k;
  }

  const Matrix& A() const { return a_; }
  const Vector& b() const { return b_; }

 private:
  Matrix a_;
  Vector b_;
  Scalar mu_ = 0.0;
  Scalar L_ = 0.0;
};

inline ObjectiveModel make_quadratic(Matrix a, Vector b, std::string label = "quadratic") {
  auto impl = std::make_shared<const QuadraticObjective>(std::move(a), std::move(b));
  return ObjectiveModel(impl, std::move(label));
}

/// Random SPD quadratic with spectrum log-spaced on [1, kappa] and a random
/// orthogonal eigenbasis; b uniform on [-1, 1]^d.
inline ObjectiveModel make_random_quadratic(Index dim, Scalar kappa, std::uint64_t seed) {
  if (dim < 1) throw ConstructionError("make_random_quadratic: dim must be positive");
  if (!(kappa >= 1.0)) throw ConstructionError("make_random_quadratic: kappa must be >= 1");
  SeededRng rng(seed);
  Matrix g(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  Vector spectrum(dim);
  for (Index i = 0; i < dim; ++i) {
    const Scalar t = dim == 1 ? 0.0 : static_cast<Scalar>(i) / static_cast<Scalar>(dim - 1);
    spectrum[i] = std::pow(kappa, t);
  }
  Matrix a = q * spectrum.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose()).eval();
  Vector b = rng.uniform_vector(dim, -1.0, 1.0);
  return make_quadratic(std::move(a), std::move(b), "quadratic");
}

// ---------------------------------------------------------------------------
// Hard cubic
// ---------------------------------------------------------------------------

/// Hyper-parameters of the hard cubic objective.
struct HardCubicParams {
  Index dim = 40;
  Scalar alpha = 12.0;
  Scalar beta = 1.0;
  Scalar lambda = 1.0;
  Scalar delta = 1.0;
};

/// Largest eigenvalue of the path-graph Laplacian sum_i (e_i - e_{i+1})(e_i - e_{i+1})^T on d nodes.
inline Scalar path_laplacian_max_eigenvalue(Index d) {
  if (d < 2) return 0.0;
  return 2.0 - 2.0 * std::cos(std::numbers::pi_v<Scalar> * static_cast<Scalar>(d - 1) / static_cast<Scalar>(d));
}

/// lambda for which the closed-form L bound over mu equals kappa.
inline Scalar hard_cubic_lambda_for_kappa(Index d, Scalar alpha, Scalar delta, Scalar kappa) {
  if (!(kappa > 1.0)) throw ConstructionError("hard cubic: target kappa must exceed 1");
  return (alpha * delta / 6.0) * path_laplacian_max_eigenvalue(d) / (kappa - 1.0);
}

namespace detail {

// Piecewise building block: |w|^3/3 inside [-delta, delta], quadratic outside.
struct CubicPiece {
  Scalar delta;

  Scalar g(Scalar w) const {
    const Scalar a = std::abs(w);
    if (a <= delta) return a * a * a / 3;
    return delta * w * w - delta * delta * a + delta * delta * delta / 3;
  }
  Scalar g1(Scalar w) const {
    const Scalar a = std::abs(w);
    if (a <= delta) return w * a;
    return std::copysign(2 * delta * a - delta * delta, w);
  }
  Scalar g2(Scalar w) const {
    const Scalar a = std::abs(w);
    if (a <= delta) return 2 * a;
    return 2 * delta;
  }

  // g(a + step) - g(a) on a segment that stays in one region and one sign.
  Scalar change_within(Scalar a, Scalar step) const {
    const Scalar b = a + step;
    const Scalar mid = a + step / 2;
    const Scalar sgn = mid >= 0 ? 1 : -1;
    if (std::abs(mid) <= delta) return sgn * step * (a * a + a * b + b * b) / 3;
    return step * (delta * (a + b) - sgn * delta * delta);
  }

  // g(a + step) - g(a), split at the kinks of the piecewise definition.
  Scalar change(Scalar a, Scalar step) const {
    if (step == 0) return 0;
    const Scalar b = a + step;
    const Scalar lo = std::min(a, b);
    const Scalar hi = std::max(a, b);
    Scalar cuts[3];
    int n = 0;
    for (Scalar c : {-delta, Scalar(0), delta})
      if (c > lo && c < hi) cuts[n++] = c;
    if (n == 0) return change_within(a, step);
    if (step < 0) std::reverse(cuts, cuts + n);
    Scalar total = 0;
    Scalar pos = a;
    for (int j = 0; j < n; ++j) {
      total += change_within(pos, cuts[j] - pos);
      pos = cuts[j];
    }
    total += change_within(pos, b - pos);
    return total;
  }
};

}  // namespace detail

/// f(x) = alpha/12 (sum_i g(x_i - x_{i+1}) - beta x_1) + lambda/2 |x|^2.
class HardCubicObjective final : public Objective {
 public:
  explicit HardCubicObjective(const HardCubicParams& p) : p_(p), piece_{p.delta} {
    if (p.dim < 2) throw ConstructionError("make_hard_cubic: dim must be at least 2");
    if (!(p.alpha > 0.0)) throw ConstructionError("make_hard_cubic: alpha must be positive");
    if (!(p.lambda > 0.0)) throw ConstructionError("make_hard_cubic: lambda must be positive");
    if (!(p.delta > 0.0)) throw ConstructionError("make_hard_cubic: delta must be positive");
    if (!std::isfinite(p.beta)) throw ConstructionError("make_hard_cubic: beta must be finite");
  }

  Index dim() const override { return p_.dim; }

  Scalar value(const Vector& x) const override {
    Scalar sum = 0;
    for (Index i = 0; i + 1 < p_.dim; ++i) sum += piece_.g(x[i] - x[i + 1]);
    sum -= p_.beta * x[0];
    return coupling() * sum + p_.lambda / 2 * x.squaredNorm();
  }

  Vector gradient(const Vector& x) const override {
    const Scalar c = coupling();
    Vector g = p_.lambda * x;
    g[0] -= c * p_.beta;
    for (Index i = 0; i + 1 < p_.dim; ++i) {
      const Scalar t = c * piece_.g1(x[i] - x[i + 1]);
      g[i] += t;
      g[i + 1] -= t;
    }
    return g;
  }

  Matrix hessian(const Vector& x) const override {
    Vector curv(p_.dim - 1);
    for (Index i = 0; i + 1 < p_.dim; ++i) curv[i] = piece_.g2(x[i] - x[i + 1]);
    return assemble(curv, 1);
  }

  Vector hessian_vector_product(const Vector& x, const Vector& v) const override {
    const Scalar c = coupling();
    Vector out = p_.lambda * v;
    for (Index i = 0; i + 1 < p_.dim; ++i) {
      const Scalar t = c * piece_.g2(x[i] - x[i + 1]) * (v[i] - v[i + 1]);
      out[i] += t;
      out[i + 1] -= t;
    }
    return out;
  }

  Scalar value_change(const Vector& from, const Vector& to) const override {
    const Vector s = to - from;
    detail::NeumaierSum sum;
    for (Index i = 0; i + 1 < p_.dim; ++i) sum.add(piece_.change(from[i] - from[i + 1], s[i] - s[i + 1]));
    sum.add(-p_.beta * s[0]);
    detail::NeumaierSum quad;
    for (Index i = 0; i < p_.dim; ++i) quad.add(s[i] * (2 * from[i] + s[i]));
    return coupling() * sum.value() + p_.lambda / 2 * quad.value();
  }

  std::vector<Scalar> hessian_breakpoints(const Vector& from, const Vector& to) const override {
    std::vector<Scalar> taus;
    for (Index i = 0; i + 1 < p_.dim; ++i) {
      const Scalar wf = from[i] - from[i + 1];
      const Scalar wt = to[i] - to[i + 1];
      if (wf == wt) continue;
      for (Scalar kink : {-p_.delta, Scalar(0), p_.delta}) {
        if ((kink - wf) * (kink - wt) < 0.0) {
          const Scalar tau = (kink - wf) / (wt - wf);
          if (tau > 0.0 && tau < 1.0) taus.push_back(tau);
        }
      }
    }
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    return taus;
  }

  Matrix weighted_hessian_sum(std::span<const Vector> points, std::span<const Scalar> weights) const override {
    Vector curv = Vector::Zero(p_.dim - 1);
    Scalar total = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      const Vector& x = points[j];
      for (Index i = 0; i + 1 < p_.dim; ++i)
        curv[i] += weights[j] * piece_.g2(x[i] - x[i + 1]);
      total += weights[j];
    }
    return assemble(curv, total);
  }

  KnownConstants known_constants() const override {
    KnownConstants k;
    k.mu = p_.lambda;
    k.mu_provenance = Provenance::exact;
    k.L = L_bound();
    k.L_provenance = Provenance::bound;
    return k;
  }

  /// lambda + (alpha delta / 6) lambda_max(T).
  Scalar L_bound() const {
    return p_.lambda + (p_.alpha * p_.delta / 6.0) * path_laplacian_max_eigenvalue(p_.dim);
  }

  const HardCubicParams& params() const { return p_; }
  Scalar g(Scalar w) const { return piece_.g(w); }
  Scalar g_prime(Scalar w) const { return piece_.g1(w); }
  Scalar g_second(Scalar w) const { return piece_.g2(w); }

 private:
  Scalar coupling() const { return p_.alpha / 12; }

  // lambda_scale * lambda I + alpha/12 sum_i curv_i (e_i - e_{i+1})(e_i - e_{i+1})^T
  Matrix assemble(const Vector& curv, Scalar lambda_scale) const {
    const Scalar c = p_.alpha / 12.0;
    Matrix h = Matrix::Zero(p_.dim, p_.dim);
    h.diagonal().setConstant(lambda_scale * p_.lambda);
    for (Index i = 0; i + 1 < p_.dim; ++i) {
      const Scalar t = c * curv[i];
      h(i, i) += t;
      h(i + 1, i + 1) += t;
      h(i, i + 1) -= t;
      h(i + 1, i) -= t;
    }
    return h;
  }

  HardCubicParams p_;
  detail::CubicPiece piece_;
};

inline ObjectiveModel make_hard_cubic(const HardCubicParams& p, const EstimationConfig& cfg = {}) {
  auto impl = std::make_shared<const HardCubicObjective>(p);
  return ObjectiveModel(impl, "hard-cubic", cfg);
}

inline ObjectiveModel make_hard_cubic(Index d, Scalar alpha, Scalar beta, Scalar lambda, Scalar delta,
                                      const EstimationConfig& cfg = {}) {
  return make_hard_cubic(HardCubicParams{d, alpha, beta, lambda, delta}, cfg);
}

/// Hard cubic whose closed-form condition number L/mu equals kappa.
inline ObjectiveModel make_hard_cubic_for_kappa(Index d, Scalar kappa, Scalar alpha = 12.0, Scalar beta = 1.0,
                                                Scalar delta = 1.0, const EstimationConfig& cfg = {}) {
  return make_hard_cubic(d, alpha, beta, hard_cubic_lambda_for_kappa(d, alpha, delta, kappa), delta, cfg);
}

// ---------------------------------------------------------------------------
// Smoothness constant estimation
// ---------------------------------------------------------------------------

namespace detail {

// |lambda|_max of a symmetric linear operator by power iteration from a fixed start.
template <class Apply>
Scalar power_iteration_norm(Index n, Apply&& apply, int iterations) {
  if (n == 0) return 0;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1 + std::sin(1 + static_cast<Scalar>(i)) / 2;
  v.normalize();
  Scalar estimate = 0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = apply(v);
    const Scalar nrm = w.norm();
    if (nrm == 0) return 0;
    estimate = std::max(estimate, std::abs(v.dot(w)));
    v = w / nrm;
  }
  return std::max(estimate, std::abs(v.dot(apply(v))));
}

}  // namespace detail

/// Completes the objective's known constants.
///
/// L comes from power iteration on sampled Hessians (times L_safety); M from the
/// largest sampled |hess(x) - hess(y)| / |x - y| (times M_safety). Sample pairs
/// mix broad random pairs, short random displacements, and short displacements
/// along e_i and e_i - e_{i+1}.
inline SmoothnessConstants smoothness_constants(const Objective& obj, const EstimationConfig& cfg) {
  const KnownConstants known = obj.known_constants();
  const bool need_sampling = !known.mu || !known.L || !known.M;
  if (need_sampling && cfg.samples <= 0)
    throw ConstructionError("smoothness_constants: sampling budget is 0 and constants are not known");

  const Index d = obj.dim();
  SmoothnessConstants out;
  SeededRng rng(cfg.seed);

  if (!known.mu || !known.L) {
    Scalar lmax = 0.0;
    Scalar lmin = std::numeric_limits<Scalar>::infinity();
    for (int j = 0; j < cfg.samples; ++j) {
      const Vector x = rng.uniform_vector(d, -cfg.radius, cfg.radius);
      auto apply = [&](const Vector& v) { return obj.hessian_vector_product(x, v); };
      lmax = std::max(lmax, detail::power_iteration_norm(d, apply, cfg.power_iterations));
      if (!known.mu) lmin = std::min(lmin, linalg::min_eigenvalue(obj.hessian(x)));
    }
    out.L = known.L ? *known.L : cfg.L_safety * lmax;
    out.L_provenance = known.L ? known.L_provenance : Provenance::sampled_estimate;
    out.mu = known.mu ? *known.mu : lmin / cfg.L_safety;
    out.mu_provenance = known.mu ? known.mu_provenance : Provenance::sampled_estimate;
  } else {
    out.L = *known.L;
    out.mu = *known.mu;
    out.L_provenance = known.L_provenance;
    out.mu_provenance = known.mu_provenance;
  }

  if (known.M) {
    out.M = *known.M;
    out.M_provenance = known.M_provenance;
  } else {
    Scalar best = 0.0;
    auto probe = [&](const Vector& x, const Vector& y) {
      const Scalar dist = (x - y).norm();
      if (dist == 0.0) return;
      auto apply = [&](const Vector& v) {
        return Vector(obj.hessian_vector_product(x, v) - obj.hessian_vector_product(y, v));
      };
      best = std::max(best, detail::power_iteration_norm(d, apply, cfg.power_iterations) / dist);
    };
    for (int j = 0; j < cfg.samples; ++j) {
      const Vector x = rng.uniform_vector(d, -cfg.radius, cfg.radius);
      probe(x, rng.uniform_vector(d, -cfg.radius, cfg.radius));
      Vector u = rng.normal_vector(d);
      u.normalize();
      const Scalar eps = 1e-3 * cfg.radius;
      probe(x, x + eps * u);
      const Index i = static_cast<Index>(rng.uniform01() * static_cast<Scalar>(d)) % d;
      Vector axis = Vector::Zero(d);
      axis[i] = 1.0;
      if (i + 1 < d) {
        axis[i + 1] = -1.0;
        axis /= std::sqrt(2.0);
      }
      probe(x, x + eps * axis);
      // Short steps from near the origin reach the cusp of |w|.
      const Vector x_small = 1e-2 * rng.uniform_vector(d, -1.0, 1.0);
      probe(x_small, x_small + eps * axis);
    }
    out.M = cfg.M_safety * best;
    out.M_provenance = Provenance::sampled_estimate;
  }

  if (!(out.mu > 0.0) || !(out.L >= out.mu) || !(out.M >= 0.0))
    throw ConstructionError("smoothness_constants: inconsistent constants");
  out.kappa = out.L / out.mu;
  return out;
}

// ---------------------------------------------------------------------------
// Reference solution
// ---------------------------------------------------------------------------

/// High-precision minimizer together with the Hessian there.
struct ReferenceSolution {
  Vector x_star;
  Scalar f_star = 0.0;
  Matrix hess_star;
  Scalar grad_norm_certificate = 0.0;
  int newton_iterations = 0;

  /// Upper estimate of f(x_star) - min f, from strong convexity.
  Scalar value_error_bound(Scalar mu) const {
    return 0.5 * grad_norm_certificate * grad_norm_certificate / mu;
  }
};

/// Raised when damped Newton stops short of the gradient tolerance.
class ReferenceError : public Error {
 public:
  ReferenceError(const std::string& what, Vector best) : Error(what), best_(std::move(best)) {}
  const Vector& best_iterate() const { return best_; }

 private:
  Vector best_;
};

/// Damped Newton from the origin with Armijo backtracking until |grad| <= gtol.
inline ReferenceSolution reference_solution(const ObjectiveModel& obj, Scalar gtol = 1e-13, int max_iters = 200) {
  if (!(gtol > 0.0)) throw ConstructionError("reference_solution: gtol must be positive");
  Vector x = Vector::Zero(obj.dim());
  Vector g = obj.gradient_at(x);
  int it = 0;
  for (; it < max_iters && g.norm() > gtol; ++it) {
    const Matrix h = obj.hessian_at(x);
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) throw ReferenceError("reference_solution: Hessian not positive definite", x);
    const Vector p = -llt.solve(g);
    const Scalar slope = g.dot(p);
    Scalar t = 1.0;
    Vector trial = x + p;
    while (obj.value_change(x, trial) > 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      trial = x + t * p;
    }
    if (t <= 1e-10) {
      // Value differences are at rounding level; keep the full step if it
      // reduces the gradient.
      trial = x + p;
      const Vector g_trial = obj.gradient_at(trial);
      if (!(g_trial.norm() < g.norm())) throw ReferenceError("reference_solution: no progress at rounding level", x);
    }
    x = std::move(trial);
    g = obj.gradient_at(x);
  }
  if (g.norm() > gtol) throw ReferenceError("reference_solution: iteration cap reached before tolerance", x);
  // Polish with full Newton steps while the gradient keeps shrinking.
  for (int extra = 0; extra < 3 && !g.isZero(0); ++extra) {
    Eigen::LLT<Matrix> llt(obj.hessian_at(x));
    if (llt.info() != Eigen::Success) break;
    Vector trial = x - llt.solve(g);
    Vector g_trial = obj.gradient_at(trial);
    if (!(g_trial.norm() < g.norm())) break;
    x = std::move(trial);
    g = std::move(g_trial);
  }
  ReferenceSolution ref;
  ref.x_star = x;
  ref.f_star = obj.value_at(x);
  ref.hess_star = obj.hessian_at(x);
  ref.grad_norm_certificate = g.norm();
  ref.newton_iterations = it;
  return ref;
}

// ---------------------------------------------------------------------------
// Derivative check
// ---------------------------------------------------------------------------

enum class DifferenceScheme { centered, forward };

struct DerivativeReport {
  Scalar gradient_rel_error = 0.0;
  Scalar hessian_rel_error = 0.0;
  Scalar hessian_asymmetry = 0.0;
  Scalar gradient_threshold = 1e-5;
  Scalar hessian_threshold = 1e-4;
  bool gradient_ok() const { return gradient_rel_error <= gradient_threshold; }
  bool hessian_ok() const { return hessian_rel_error <= hessian_threshold && hessian_asymmetry <= 1e-12; }
  bool passed() const { return gradient_ok() && hessian_ok(); }
};

/// h = 1e-6 (1 + |x|).
inline Scalar default_difference_step(const Vector& x) { return 1e-6 * (1.0 + x.norm()); }

/// Finite differences of value_at and gradient_at against the analytic derivatives.
inline DerivativeReport derivative_check(const ObjectiveModel& obj, const Vector& x, Scalar h,
                                         DifferenceScheme scheme = DifferenceScheme::centered) {
  const Index d = obj.dim();
  const Vector g = obj.gradient_at(x);
  const Matrix hess = obj.hessian_at(x);
  Vector fd_g(d);
  Matrix fd_h(d, d);
  const Vector g_at_x = g;
  for (Index i = 0; i < d; ++i) {
    Vector xp = x;
    xp[i] += h;
    if (scheme == DifferenceScheme::centered) {
      Vector xm = x;
      xm[i] -= h;
      const Scalar width = xp[i] - xm[i];
      fd_g[i] = obj.value_change(xm, xp) / width;
      fd_h.col(i) = (obj.gradient_at(xp) - obj.gradient_at(xm)) / width;
    } else {
      const Scalar width = xp[i] - x[i];
      fd_g[i] = obj.value_change(x, xp) / width;
      fd_h.col(i) = (obj.gradient_at(xp) - g_at_x) / width;
    }
  }
  constexpr Scalar tiny = 1e-300;
  DerivativeReport r;
  r.gradient_rel_error = (fd_g - g).norm() / std::max(g.norm(), tiny);
  r.hessian_rel_error = (fd_h - hess).norm() / std::max(hess.norm(), tiny);
  r.hessian_asymmetry = detail::asymmetry(hess);
  return r;
}

}  // namespace qnlab

#endif  // QNLAB_OBJECTIVES_HPP
