#ifndef QNLAB_BROYDEN_HPP
#define QNLAB_BROYDEN_HPP

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qnlab/core.hpp"
#include "qnlab/linesearch.hpp"
#include "qnlab/objectives.hpp"

namespace qnlab {

/// Hessian approximation B and its inverse H, maintained together.
struct HessianPair {
  Matrix B;
  Matrix H;

  /// Pair (B0, B0^{-1}); throws unless B0 is symmetric positive definite.
  static HessianPair from_b0(const Matrix& b0) {
    if (b0.rows() != b0.cols() || b0.rows() == 0) throw ConstructionError("B0 must be a non-empty square matrix");
    if (!linalg::is_symmetric(b0)) throw ConstructionError("B0 is not symmetric");
    Eigen::LLT<Matrix> llt(b0);
    if (llt.info() != Eigen::Success) throw ConstructionError("B0 is not positive definite");
    HessianPair p;
    p.B = b0;
    p.H = llt.solve(Matrix::Identity(b0.rows(), b0.cols()));
    p.H = 0.5 * (p.H + p.H.transpose()).eval();
    return p;
  }

  /// ||B H - I|| / (||B|| ||H||), Frobenius norms.
  Scalar inverse_residual() const {
    const Matrix r = B * H - Matrix::Identity(B.rows(), B.cols());
    return r.norm() / (B.norm() * H.norm());
  }
};

class CurvatureBreakdown : public Error {
 public:
  using Error::Error;
};

class NonFiniteUpdate : public Error {
 public:
  using Error::Error;
};

/// Update family. phi = 0 is BFGS, phi = 1 is DFP.
struct Method {
  enum class Kind { bfgs, dfp, broyden, gradient_descent };
  Kind kind = Kind::bfgs;
  Scalar phi = 0.0;

  static Method bfgs() { return {Kind::bfgs, 0.0}; }
  static Method dfp() { return {Kind::dfp, 1.0}; }
  static Method gradient_descent() { return {Kind::gradient_descent, 0.0}; }
  static Method broyden(Scalar phi) {
    if (!(phi >= 0.0 && phi <= 1.0)) throw ConstructionError("broyden: phi must lie in [0, 1]");
    return {Kind::broyden, phi};
  }

  bool uses_matrix() const { return kind != Kind::gradient_descent; }

  std::string name() const {
    switch (kind) {
      case Kind::bfgs: return "bfgs";
      case Kind::dfp: return "dfp";
      case Kind::gradient_descent: return "gd";
      case Kind::broyden: {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, phi);
        return "broyden:" + std::string(buf, res.ptr);
      }
    }
    return "?";
  }

  /// Parses "bfgs", "dfp", "gd", or "broyden:<phi>".
  static Method parse(std::string_view text) {
    if (text == "bfgs") return bfgs();
    if (text == "dfp") return dfp();
    if (text == "gd") return gradient_descent();
    constexpr std::string_view prefix = "broyden:";
    if (text.substr(0, prefix.size()) == prefix) {
      const std::string_view num = text.substr(prefix.size());
      Scalar phi = 0.0;
      auto res = std::from_chars(num.data(), num.data() + num.size(), phi);
      if (res.ec != std::errc() || res.ptr != num.data() + num.size() || !(phi >= 0.0 && phi <= 1.0))
        throw ConfigError("method: invalid broyden parameter '" + std::string(num) + "'");
      return broyden(phi);
    }
    throw ConfigError("method: unknown method '" + std::string(text) + "'");
  }
};

/// d = -H g, or nullopt when g = 0.
inline std::optional<Vector> direction(const HessianPair& pair, const Vector& g) {
  if (!g.allFinite()) throw NonFiniteUpdate("direction: gradient is not finite");
  if (g.isZero(0.0)) return std::nullopt;
  return Vector(-(pair.H * g));
}

inline constexpr Scalar default_curvature_floor = 1e-14;

namespace detail {

inline Scalar checked_curvature(const Vector& s, const Vector& y, Scalar floor) {
  if (s.size() != y.size()) throw ConstructionError("update: s and y differ in length");
  if (!s.allFinite() || !y.allFinite()) throw NonFiniteUpdate("update: s or y is not finite");
  const Scalar sy = s.dot(y);
  if (!(sy > floor * s.norm() * y.norm())) throw CurvatureBreakdown("update: s^T y below curvature floor");
  return sy;
}

inline Matrix symmetrized(Matrix m) {
  m = 0.5 * (m + m.transpose()).eval();
  return m;
}

inline Matrix bfgs_B(const Matrix& b, const Vector& s, const Vector& y, Scalar sy) {
  const Vector bs = b * s;
  return symmetrized(b - bs * bs.transpose() / s.dot(bs) + y * y.transpose() / sy);
}

inline Matrix bfgs_H(const Matrix& h, const Vector& s, const Vector& y, Scalar sy) {
  const Scalar rho = 1.0 / sy;
  const Vector hy = h * y;
  return symmetrized(h - rho * (s * hy.transpose() + hy * s.transpose()) +
                     (rho * rho * y.dot(hy) + rho) * (s * s.transpose()));
}

// DFP is BFGS with (B, s, y) and (H, y, s) exchanged.
inline Matrix dfp_B(const Matrix& b, const Vector& s, const Vector& y, Scalar sy) { return bfgs_H(b, y, s, sy); }
inline Matrix dfp_H(const Matrix& h, const Vector& s, const Vector& y, Scalar sy) { return bfgs_B(h, y, s, sy); }

inline void require_finite(const HessianPair& p) {
  if (!p.B.allFinite() || !p.H.allFinite()) throw NonFiniteUpdate("update produced non-finite entries");
}

}  // namespace detail

inline HessianPair bfgs_update_pair(const HessianPair& pair, const Vector& s, const Vector& y,
                                    Scalar curvature_floor = default_curvature_floor) {
  const Scalar sy = detail::checked_curvature(s, y, curvature_floor);
  HessianPair out{detail::bfgs_B(pair.B, s, y, sy), detail::bfgs_H(pair.H, s, y, sy)};
  detail::require_finite(out);
  return out;
}

inline HessianPair dfp_update_pair(const HessianPair& pair, const Vector& s, const Vector& y,
                                   Scalar curvature_floor = default_curvature_floor) {
  const Scalar sy = detail::checked_curvature(s, y, curvature_floor);
  HessianPair out{detail::dfp_B(pair.B, s, y, sy), detail::dfp_H(pair.H, s, y, sy)};
  detail::require_finite(out);
  return out;
}

/// B' = phi B'_DFP + (1 - phi) B'_BFGS; H' from a Cholesky factorization of B'.
/// The endpoints phi = 0 and phi = 1 return the BFGS and DFP pairs unchanged.
inline HessianPair broyden_update_pair(const HessianPair& pair, const Vector& s, const Vector& y, Scalar phi,
                                       Scalar curvature_floor = default_curvature_floor) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw ConstructionError("broyden: phi must lie in [0, 1]");
  if (phi == 0.0) return bfgs_update_pair(pair, s, y, curvature_floor);
  if (phi == 1.0) return dfp_update_pair(pair, s, y, curvature_floor);
  const Scalar sy = detail::checked_curvature(s, y, curvature_floor);
  HessianPair out;
  out.B = detail::symmetrized(phi * detail::dfp_B(pair.B, s, y, sy) + (1.0 - phi) * detail::bfgs_B(pair.B, s, y, sy));
  if (!out.B.allFinite()) throw NonFiniteUpdate("broyden: combination produced non-finite entries");
  Eigen::LLT<Matrix> llt(out.B);
  if (llt.info() != Eigen::Success) throw NonFiniteUpdate("broyden: updated matrix lost positive definiteness");
  out.H = detail::symmetrized(llt.solve(Matrix::Identity(out.B.rows(), out.B.cols())));
  detail::require_finite(out);
  return out;
}

class NotImplemented : public Error {
 public:
  using Error::Error;
};

/// Weight psi_k of the inverse-side combination for broyden:<phi>, written
/// H' = psi H_dfp + (1 - psi) H_bfgs. Deliberately unimplemented: the inverse
/// is recovered from B' by Cholesky instead.
[[noreturn]] inline Scalar broyden_inverse_weight(Scalar /*phi*/, const HessianPair& /*pair*/, const Vector& /*s*/,
                                                  const Vector& /*y*/) {
  throw NotImplemented("broyden_inverse_weight: no formula for the inverse-side weight");
}

inline HessianPair update_pair(const Method& m, const HessianPair& pair, const Vector& s, const Vector& y,
                               Scalar curvature_floor = default_curvature_floor) {
  switch (m.kind) {
    case Method::Kind::bfgs: return bfgs_update_pair(pair, s, y, curvature_floor);
    case Method::Kind::dfp: return dfp_update_pair(pair, s, y, curvature_floor);
    case Method::Kind::broyden: return broyden_update_pair(pair, s, y, m.phi, curvature_floor);
    case Method::Kind::gradient_descent: return pair;
  }
  return pair;
}

// ---------------------------------------------------------------------------
// Initial matrix
// ---------------------------------------------------------------------------

struct B0Policy {
  enum class Kind { scaled_identity_L, scaled_identity_mu, custom };
  Kind kind = Kind::scaled_identity_L;
  Matrix custom;
  std::string source;  // file path for custom matrices

  static B0Policy L() { return {Kind::scaled_identity_L, {}, {}}; }
  static B0Policy mu() { return {Kind::scaled_identity_mu, {}, {}}; }
  static B0Policy from_matrix(Matrix m, std::string source = "custom") {
    return {Kind::custom, std::move(m), std::move(source)};
  }

  std::string name() const {
    switch (kind) {
      case Kind::scaled_identity_L: return "LI";
      case Kind::scaled_identity_mu: return "muI";
      case Kind::custom: return source.empty() ? "custom" : source;
    }
    return "?";
  }
};

inline Matrix b0_from_policy(const B0Policy& policy, const SmoothnessConstants& c, Index dim) {
  switch (policy.kind) {
    case B0Policy::Kind::scaled_identity_L: return c.L * Matrix::Identity(dim, dim);
    case B0Policy::Kind::scaled_identity_mu: return c.mu * Matrix::Identity(dim, dim);
    case B0Policy::Kind::custom:
      if (policy.custom.rows() != dim || policy.custom.cols() != dim)
        throw ConstructionError("B0: custom matrix has the wrong size");
      if (!linalg::is_spd(policy.custom)) throw ConstructionError("B0: custom matrix is not symmetric positive definite");
      return policy.custom;
  }
  throw ConstructionError("B0: unknown policy");
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

/// Raw data of one iterate; the last record of a run has no step.
struct TrajectoryRecord {
  int k = 0;
  Vector x;
  Scalar f = 0.0;
  Vector g;
  bool has_step = false;
  Vector d;
  Scalar eta = 0.0;
  Vector s;
  Vector y;
  Scalar decrease = 0.0;     // f_k - f_{k+1}
  Scalar ls_residual = 0.0;  // |g_{k+1}^T s| / |g_k^T s|
  std::optional<Matrix> B_before;
  std::optional<Matrix> H_before;
};

struct StoppingRule {
  Scalar grad_tol = 0.0;
  Scalar fgap_tol = 0.0;  // relative to f(x0) - f_*; needs x_star
  int max_iters = 1000;
  std::optional<Vector> x_star;

  void validate() const {
    if (grad_tol < 0.0 || fgap_tol < 0.0 || max_iters < 0) throw ConfigError("stopping rule: negative tolerance");
    if (fgap_tol > 0.0 && !x_star) throw ConfigError("stopping rule: fgap_tol needs a reference minimizer");
  }
};

enum class Termination { gradient, fgap, max_iters };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient: return "gradient";
    case Termination::fgap: return "fgap";
    case Termination::max_iters: return "max_iters";
  }
  return "?";
}

struct Trajectory {
  Method method;
  Matrix B0;
  std::vector<TrajectoryRecord> records;
  Termination termination = Termination::max_iters;

  int iterations() const { return records.empty() ? 0 : static_cast<int>(records.size()) - 1; }
};

struct SolverState {
  int k = 0;
  Vector x;
  Scalar f = 0.0;
  Vector g;
  HessianPair pair;
};

/// The matrix pair is left empty for gradient descent.
inline SolverState initial_state(const ObjectiveModel& obj, const Vector& x0, const Matrix& b0, const Method& method) {
  if (x0.size() != obj.dim()) throw ConstructionError("x0 has the wrong dimension");
  SolverState st;
  st.x = x0;
  st.f = obj.value_at(x0);
  st.g = obj.gradient_at(x0);
  if (method.uses_matrix()) st.pair = HessianPair::from_b0(b0);
  return st;
}

/// One quasi-Newton iteration; fills every step field of the returned record.
inline std::pair<SolverState, TrajectoryRecord> step(const SolverState& state, const ObjectiveModel& obj,
                                                     const Method& method, const LineSearchConfig& ls_cfg,
                                                     bool retain_matrices = false) {
  TrajectoryRecord rec;
  rec.k = state.k;
  rec.x = state.x;
  rec.f = state.f;
  rec.g = state.g;
  if (retain_matrices && method.uses_matrix()) {
    rec.B_before = state.pair.B;
    rec.H_before = state.pair.H;
  }
  std::optional<Vector> d;
  if (method.uses_matrix()) {
    d = direction(state.pair, state.g);
  } else if (!state.g.isZero(0.0)) {
    d = Vector(-state.g);
  }
  if (!d) throw Error("step: gradient is zero");
  StepResult ls = minimize_along_ray(obj, state.x, *d, ls_cfg);

  rec.has_step = true;
  rec.d = *d;
  rec.eta = ls.eta;
  rec.s = ls.x_next - state.x;
  rec.y = ls.g_next - state.g;
  rec.decrease = ls.decrease;
  rec.ls_residual = std::abs(ls.g_next.dot(rec.s)) / std::abs(state.g.dot(rec.s));

  SolverState next;
  next.k = state.k + 1;
  if (method.uses_matrix()) next.pair = update_pair(method, state.pair, rec.s, rec.y);
  next.x = std::move(ls.x_next);
  next.f = ls.f_next;
  next.g = std::move(ls.g_next);
  return {std::move(next), std::move(rec)};
}

/// Failure inside run, with the records produced before it.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iteration, Trajectory partial)
      : Error(what), iteration_(iteration), partial_(std::move(partial)) {}
  int iteration() const { return iteration_; }
  const Trajectory& partial() const { return partial_; }

 private:
  int iteration_;
  Trajectory partial_;
};

inline Trajectory run(const ObjectiveModel& obj, const Vector& x0, const Matrix& b0, const Method& method,
                      const StoppingRule& stop, const LineSearchConfig& ls_cfg = {}, bool retain_matrices = false) {
  stop.validate();
  ls_cfg.validate();
  Trajectory traj;
  traj.method = method;
  traj.B0 = b0;
  SolverState st = initial_state(obj, x0, b0, method);

  const bool use_gap = stop.fgap_tol > 0.0;
  const Scalar gap0 = use_gap ? obj.value_change(*stop.x_star, x0) : 0.0;

  auto final_record = [&](const SolverState& s) {
    TrajectoryRecord rec;
    rec.k = s.k;
    rec.x = s.x;
    rec.f = s.f;
    rec.g = s.g;
    if (retain_matrices && method.uses_matrix()) {
      rec.B_before = s.pair.B;
      rec.H_before = s.pair.H;
    }
    return rec;
  };

  for (;;) {
    const Scalar gnorm = st.g.norm();
    std::optional<Termination> reason;
    if (gnorm == 0.0 || gnorm <= stop.grad_tol) {
      reason = Termination::gradient;
    } else if (use_gap && (gap0 <= 0.0 || obj.value_change(*stop.x_star, st.x) <= stop.fgap_tol * gap0)) {
      reason = Termination::fgap;
    } else if (st.k >= stop.max_iters) {
      reason = Termination::max_iters;
    }
    if (reason) {
      traj.records.push_back(final_record(st));
      traj.termination = *reason;
      return traj;
    }
    try {
      auto [next, rec] = step(st, obj, method, ls_cfg, retain_matrices);
      traj.records.push_back(std::move(rec));
      st = std::move(next);
    } catch (const Error& e) {
      const int k = st.k;
      traj.records.push_back(final_record(st));
      throw SolverError("iteration " + std::to_string(k) + ": " + e.what(), k, std::move(traj));
    }
  }
}

}  // namespace qnlab

#endif  // QNLAB_BROYDEN_HPP
