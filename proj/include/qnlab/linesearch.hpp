#ifndef QNLAB_LINESEARCH_HPP
#define QNLAB_LINESEARCH_HPP

#include <cmath>
#include <limits>
#include <string>

#include "qnlab/core.hpp"
#include "qnlab/objectives.hpp"

namespace qnlab {

struct LineSearchConfig {
  Scalar dd_rel_tol = 1e-10;
  Scalar initial_trial = 1.0;
  int max_bracket_doublings = 100;
  int max_refinements = 200;

  void validate() const {
    if (!(dd_rel_tol > 0.0)) throw ConfigError("line search: dd_rel_tol must be positive");
    if (!(initial_trial > 0.0) || !std::isfinite(initial_trial))
      throw ConfigError("line search: initial_trial must be positive and finite");
    if (max_bracket_doublings < 0 || max_refinements < 0)
      throw ConfigError("line search: iteration limits must be non-negative");
  }
};

struct StepResult {
  Scalar eta = 0.0;
  Vector x_next;
  Scalar f_next = 0.0;
  Vector g_next;
  Scalar dd_at_eta = 0.0;  // g_next^T (x_next - x) / eta
  Scalar dd_at_zero = 0.0;  // g^T d
  Scalar decrease = 0.0;   // f(x) - f(x_next), evaluated without cancellation
  int evaluations = 0;
};

class LineSearchError : public Error {
 public:
  using Error::Error;
};

class NonDescentDirection : public LineSearchError {
 public:
  using LineSearchError::LineSearchError;
};

class BracketOverflow : public LineSearchError {
 public:
  using LineSearchError::LineSearchError;
};

class RefinementExhausted : public LineSearchError {
 public:
  RefinementExhausted(const std::string& what, Scalar best_eta, Scalar best_residual)
      : LineSearchError(what), best_eta_(best_eta), best_residual_(best_residual) {}
  Scalar best_eta() const { return best_eta_; }
  /// |h'(best_eta)| / |h'(0)|.
  Scalar best_residual() const { return best_residual_; }

 private:
  Scalar best_eta_;
  Scalar best_residual_;
};

namespace detail {

struct RayPoint {
  Scalar t = 0.0;
  Vector x;
  Vector g;
  Scalar dd = 0.0;
};

}  // namespace detail

/// Exact line search: finds eta with |h'(eta)| <= dd_rel_tol |h'(0)| for
/// h(t) = f(x + t d).
///
/// h' is measured along the displacement actually realized in floating point,
/// g(x_t)^T (x_t - x) / t, so the recorded step satisfies the orthogonality
/// condition g_next^T s ~ 0 in the same arithmetic the diagnostics use.
/// Brackets by doubling (or halving when h'(initial_trial) > 0), then refines
/// with Illinois false position safeguarded by bisection.
inline StepResult minimize_along_ray(const ObjectiveModel& obj, const Vector& x, const Vector& d,
                                     const LineSearchConfig& cfg = {}) {
  cfg.validate();
  if (x.size() != obj.dim() || d.size() != obj.dim()) throw ConstructionError("line search: dimension mismatch");
  if (!d.allFinite()) throw NonDescentDirection("line search: direction is not finite");
  const Vector g0 = obj.gradient_at(x);
  const Scalar h0 = g0.dot(d);
  if (!(h0 < 0.0)) throw NonDescentDirection("line search: g^T d >= 0");
  const Scalar tol = cfg.dd_rel_tol * std::abs(h0);

  int evaluations = 0;
  auto probe = [&](Scalar t) {
    detail::RayPoint p;
    p.t = t;
    p.x = x + t * d;
    p.g = obj.gradient_at(p.x);
    const Vector disp = p.x - x;
    p.dd = disp.isZero(0.0) ? h0 : p.g.dot(disp) / t;
    ++evaluations;
    return p;
  };

  auto finish = [&](detail::RayPoint&& p) {
    StepResult r;
    r.eta = p.t;
    r.decrease = -obj.value_change(x, p.x);
    if (r.decrease < 0.0)
      throw RefinementExhausted("line search: accepted point does not decrease f", p.t, std::abs(p.dd) / std::abs(h0));
    r.f_next = obj.value_at(p.x);
    r.x_next = std::move(p.x);
    r.g_next = std::move(p.g);
    r.dd_at_eta = p.dd;
    r.dd_at_zero = h0;
    r.evaluations = evaluations;
    return r;
  };

  detail::RayPoint lo;
  lo.t = 0.0;
  lo.x = x;
  lo.g = g0;
  lo.dd = h0;
  detail::RayPoint hi;
  bool have_hi = false;

  detail::RayPoint trial = probe(cfg.initial_trial);
  if (std::abs(trial.dd) <= tol) return finish(std::move(trial));
  if (trial.dd < 0.0) {
    lo = std::move(trial);
    for (int j = 0; j < cfg.max_bracket_doublings && !have_hi; ++j) {
      detail::RayPoint p = probe(2.0 * lo.t);
      if (!p.g.allFinite()) throw BracketOverflow("line search: gradient overflow while bracketing");
      if (std::abs(p.dd) <= tol) return finish(std::move(p));
      if (p.dd > 0.0) {
        hi = std::move(p);
        have_hi = true;
      } else {
        lo = std::move(p);
      }
    }
    if (!have_hi) throw BracketOverflow("line search: no sign change of h' within the doubling budget");
  } else {
    hi = std::move(trial);
    have_hi = true;
    for (int j = 0; j < cfg.max_bracket_doublings; ++j) {
      detail::RayPoint p = probe(0.5 * hi.t);
      if (std::abs(p.dd) <= tol) return finish(std::move(p));
      if (p.dd > 0.0) {
        hi = std::move(p);
      } else {
        lo = std::move(p);
        break;
      }
    }
  }

  // Illinois false position on [lo, hi] with lo.dd < 0 < hi.dd.
  Scalar flo = lo.dd;
  Scalar fhi = hi.dd;
  int retained = 0;  // endpoint kept by the previous update: +1 hi, -1 lo
  const detail::RayPoint* best = std::abs(lo.dd) < std::abs(hi.dd) ? &lo : &hi;
  Scalar best_dd = best->dd;
  Scalar best_t = best->t;
  for (int it = 0; it < cfg.max_refinements; ++it) {
    const Scalar width = hi.t - lo.t;
    Scalar t = (lo.t * fhi - hi.t * flo) / (fhi - flo);
    const Scalar guard = 1e-3 * width;
    if (!(t > lo.t + guard && t < hi.t - guard) || it % 4 == 3) t = lo.t + 0.5 * width;
    if (!(t > lo.t && t < hi.t)) break;
    detail::RayPoint p = probe(t);
    if (std::abs(p.dd) <= tol) return finish(std::move(p));
    if (std::abs(p.dd) < std::abs(best_dd)) {
      best_dd = p.dd;
      best_t = p.t;
    }
    if (p.dd < 0.0) {
      lo = std::move(p);
      flo = lo.dd;
      if (retained == 1) fhi *= 0.5;
      retained = 1;
    } else {
      hi = std::move(p);
      fhi = hi.dd;
      if (retained == -1) flo *= 0.5;
      retained = -1;
    }
  }
  throw RefinementExhausted("line search: directional-derivative tolerance not reached", best_t,
                            std::abs(best_dd) / std::abs(h0));
}

}  // namespace qnlab

#endif  // QNLAB_LINESEARCH_HPP
