#ifndef QNLAB_DIAGNOSTICS_HPP
#define QNLAB_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnlab/broyden.hpp"
#include "qnlab/core.hpp"
#include "qnlab/objectives.hpp"

namespace qnlab {

class DiagnosticsError : public Error {
 public:
  using Error::Error;
};

/// Tr(A) - log Det(A) - d, summed over eigenvalues.
inline Scalar potential(const Matrix& a) {
  if (a.rows() != a.cols()) throw DiagnosticsError("potential: matrix is not square");
  const Vector ev = linalg::symmetric_eigenvalues(a);
  if (!(ev.minCoeff() > 0)) throw DiagnosticsError("potential: matrix is not positive definite");
  Scalar sum = 0;
  for (Index i = 0; i < ev.size(); ++i) sum += ev[i] - std::log(ev[i]) - 1;
  return sum;
}

/// Closed form of the potential of c I_d.
inline Scalar potential_scaled_identity(Index d, Scalar c) { return static_cast<Scalar>(d) * (c - std::log(c) - 1); }

// ---------------------------------------------------------------------------
// Weight schemes
// ---------------------------------------------------------------------------

enum class WeightKind { gradient_lipschitz, minimizer_hessian, identity };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::gradient_lipschitz: return "LI";
    case WeightKind::minimizer_hessian: return "hess*";
    case WeightKind::identity: return "I";
  }
  return "?";
}

/// Weight matrix P with the operations the weighted quantities need.
///
/// Scaled identities are stored as a scalar. For the minimizer Hessian the
/// square roots come from one symmetric eigendecomposition.
class WeightScheme {
 public:
  static WeightScheme gradient_lipschitz(Scalar L, Index dim) { return scaled(WeightKind::gradient_lipschitz, L, dim); }
  static WeightScheme identity(Index dim) { return scaled(WeightKind::identity, 1, dim); }

  static WeightScheme minimizer_hessian(const Matrix& hess_star) {
    WeightScheme w;
    w.kind_ = WeightKind::minimizer_hessian;
    w.dim_ = hess_star.rows();
    w.p_ = hess_star;
    auto [root, inv_root] = linalg::spd_sqrt_pair(hess_star);
    w.sqrt_ = std::move(root);
    w.inv_sqrt_ = std::move(inv_root);
    Eigen::LLT<Matrix> llt(hess_star);
    if (llt.info() != Eigen::Success) throw DiagnosticsError("weight: minimizer Hessian is not positive definite");
    w.p_inv_ = detail::symmetrized(llt.solve(Matrix::Identity(w.dim_, w.dim_)));
    w.log_det_p_ = linalg::log_det_spd(hess_star);
    return w;
  }

  WeightKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  bool is_scaled_identity() const { return kind_ != WeightKind::minimizer_hessian; }

  Vector sqrt_apply(const Vector& v) const { return is_scaled_identity() ? Vector(std::sqrt(c_) * v) : Vector(sqrt_ * v); }
  Vector inv_sqrt_apply(const Vector& v) const {
    return is_scaled_identity() ? Vector(v / std::sqrt(c_)) : Vector(inv_sqrt_ * v);
  }
  Matrix P() const { return is_scaled_identity() ? Matrix(c_ * Matrix::Identity(dim_, dim_)) : p_; }

  /// v^T P v
  Scalar quad(const Vector& v) const { return is_scaled_identity() ? c_ * v.squaredNorm() : v.dot(p_ * v); }
  /// v^T P^{-1} v
  Scalar inv_quad(const Vector& v) const { return is_scaled_identity() ? v.squaredNorm() / c_ : v.dot(p_inv_ * v); }

  /// P^{-1/2} B P^{-1/2}
  Matrix weigh(const Matrix& b) const {
    if (is_scaled_identity()) return b / c_;
    return detail::symmetrized(inv_sqrt_ * b * inv_sqrt_);
  }

  /// Tr(P^{-1} B)
  Scalar weighted_trace(const Matrix& b) const {
    if (is_scaled_identity()) return b.trace() / c_;
    return (p_inv_.cwiseProduct(b)).sum();
  }

  Scalar log_det_P() const { return log_det_p_; }

  /// Potential of the weighted matrix, given log Det(B).
  Scalar weighted_potential(const Matrix& b, Scalar log_det_b) const {
    return weighted_trace(b) - (log_det_b - log_det_p_) - static_cast<Scalar>(dim_);
  }

 private:
  static WeightScheme scaled(WeightKind kind, Scalar c, Index dim) {
    if (!(c > 0)) throw DiagnosticsError("weight: scale must be positive");
    WeightScheme w;
    w.kind_ = kind;
    w.dim_ = dim;
    w.c_ = c;
    w.log_det_p_ = static_cast<Scalar>(dim) * std::log(c);
    return w;
  }

  WeightKind kind_ = WeightKind::identity;
  Index dim_ = 0;
  Scalar c_ = 1;
  Matrix p_, p_inv_, sqrt_, inv_sqrt_;
  Scalar log_det_p_ = 0;
};

// ---------------------------------------------------------------------------
// Weighted step quantities
// ---------------------------------------------------------------------------

struct StepDiagnostics {
  Scalar alpha_hat = 0;
  Scalar q_hat = 0;
  Scalar m_hat = 0;
  Scalar cos_theta = 0;
  Scalar C_k = 0;
  Scalar ray_ratio = 0;
  std::optional<Scalar> psi_Bhat;
};

/// M / mu^{3/2} sqrt(2 gap)
inline Scalar distortion(const SmoothnessConstants& c, Scalar gap) {
  return c.M / (c.mu * std::sqrt(c.mu)) * std::sqrt(2 * std::max<Scalar>(gap, 0));
}

/// Weighted quantities from the raw step data; gap = f_k - f_*.
inline StepDiagnostics weighted_step_quantities(const Vector& g, const Vector& s, const Vector& y, Scalar decrease,
                                                Scalar gap, const WeightScheme& w, const SmoothnessConstants& c) {
  if (!(gap > 0)) throw DiagnosticsError("weighted quantities: f_k <= f_* (reference inconsistent with iterate)");
  const Scalar gs = g.dot(s);
  const Scalar sy = s.dot(y);
  if (!(sy > 0)) throw DiagnosticsError("weighted quantities: s^T y <= 0");
  const Scalar gg = w.inv_quad(g);
  const Scalar ss = w.quad(s);
  StepDiagnostics out;
  out.alpha_hat = decrease / -gs;
  out.q_hat = gg / gap;
  out.m_hat = sy / ss;
  out.cos_theta = std::min<Scalar>(1, -gs / std::sqrt(gg * ss));  // rounding can exceed 1 by an ulp
  out.C_k = distortion(c, gap);
  out.ray_ratio = w.inv_quad(y) / sy;
  return out;
}

inline StepDiagnostics weighted_step_quantities(const TrajectoryRecord& rec, Scalar gap, const WeightScheme& w,
                                                const SmoothnessConstants& c) {
  if (!rec.has_step) throw DiagnosticsError("weighted quantities: record has no step");
  StepDiagnostics out = weighted_step_quantities(rec.g, rec.s, rec.y, rec.decrease, gap, w, c);
  if (rec.B_before) out.psi_Bhat = potential(w.weigh(*rec.B_before));
  return out;
}

/// Gap and decrease measured without cancellation through value_change.
inline StepDiagnostics weighted_step_quantities(const ObjectiveModel& obj, const TrajectoryRecord& rec,
                                                const WeightScheme& w, const ReferenceSolution& ref,
                                                const SmoothnessConstants& c) {
  return weighted_step_quantities(rec, obj.value_change(ref.x_star, rec.x), w, c);
}

// ---------------------------------------------------------------------------
// Average Hessians
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<Scalar>, std::vector<Scalar>> gauss_legendre(int n) {
  if (n < 1) throw DiagnosticsError("gauss_legendre: order must be positive");
  std::vector<Scalar> nodes(n), weights(n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar z = std::cos(pi * (static_cast<Scalar>(i) + Scalar(0.75)) / (static_cast<Scalar>(n) + Scalar(0.5)));
    Scalar dp = 1;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = z;
      for (int j = 2; j <= n; ++j) {
        const Scalar p2 = ((2 * j - 1) * z * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1;
      dp = n * (z * p1 - p0) / (z * z - 1);
      const Scalar dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) <= 4 * std::numeric_limits<Scalar>::epsilon()) break;
    }
    {
      Scalar p0 = 1, p1 = z;
      for (int j = 2; j <= n; ++j) {
        const Scalar p2 = ((2 * j - 1) * z * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
    }
    const Scalar wt = 2 / ((1 - z * z) * dp * dp);
    nodes[i] = (1 - z) / 2;
    nodes[n - 1 - i] = (1 + z) / 2;
    weights[i] = wt / 2;
    weights[n - 1 - i] = wt / 2;
  }
  return {nodes, weights};
}

/// Integral over tau in [0, 1] of hess(from + tau (to - from)).
///
/// Composite Gauss-Legendre with panels split where the Hessian is not smooth
/// along the segment.
inline Matrix average_hessian(const ObjectiveModel& obj, const Vector& from, const Vector& to, int quad_order = 16) {
  if (quad_order < 1) throw DiagnosticsError("average_hessian: quadrature order must be positive");
  if (from == to) return obj.hessian_at(from);
  auto [nodes, weights] = gauss_legendre(quad_order);
  std::vector<Scalar> cuts{0};
  for (Scalar t : obj.impl().hessian_breakpoints(from, to)) cuts.push_back(t);
  cuts.push_back(1);
  const Vector seg = to - from;
  std::vector<Vector> points;
  std::vector<Scalar> wts;
  points.reserve((cuts.size() - 1) * nodes.size());
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const Scalar a = cuts[p];
    const Scalar width = cuts[p + 1] - a;
    if (!(width > 0)) continue;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      points.push_back(from + (a + width * nodes[j]) * seg);
      wts.push_back(width * weights[j]);
    }
  }
  return detail::symmetrized(obj.impl().weighted_hessian_sum(points, wts));
}

// ---------------------------------------------------------------------------
// Per-step identities and inequalities
// ---------------------------------------------------------------------------

/// (gap_{k+1} - (1 - alpha q cos^2 / m) gap_k) / gap_k.
inline Scalar one_step_identity_residual(const StepDiagnostics& diag, Scalar gap, Scalar gap_next) {
  const Scalar factor = diag.alpha_hat * diag.q_hat * diag.cos_theta * diag.cos_theta / diag.m_hat;
  return gap_next / gap - 1 + factor;
}

struct IdentityCheck {
  Scalar residual = 0;
  Scalar tolerance = 0;
  bool pass = false;
};

/// Passes when |residual| <= 1e-7 + 10 ls_tol.
inline IdentityCheck check_one_step_identity(const StepDiagnostics& diag, Scalar gap, Scalar gap_next,
                                             Scalar ls_tol) {
  IdentityCheck r;
  r.residual = one_step_identity_residual(diag, gap, gap_next);
  r.tolerance = Scalar(1e-7) + 10 * ls_tol;
  r.pass = std::abs(r.residual) <= r.tolerance;
  return r;
}

struct TraceDetResiduals {
  Scalar trace = 0;  // relative
  Scalar log_det = 0;  // relative to max(1, |log Det|)
};

/// Residuals of the trace and determinant update identities, from weighted
/// matrices and vectors.
inline TraceDetResiduals check_trace_det_identities(const Matrix& b_hat, const Matrix& b_hat_next, const Vector& s_hat,
                                                    const Vector& y_hat) {
  const Vector bs = b_hat * s_hat;
  const Scalar sbs = s_hat.dot(bs);
  const Scalar sy = s_hat.dot(y_hat);
  const Scalar tr_pred = b_hat.trace() - bs.squaredNorm() / sbs + y_hat.squaredNorm() / sy;
  const Scalar tr_next = b_hat_next.trace();
  const Scalar ld = linalg::log_det_spd(b_hat);
  const Scalar ld_next = linalg::log_det_spd(b_hat_next);
  const Scalar ld_pred = ld + std::log(sy / sbs);
  TraceDetResiduals r;
  r.trace = std::abs(tr_next - tr_pred) / std::max(std::abs(tr_next), std::numeric_limits<Scalar>::min());
  r.log_det = std::abs(ld_next - ld_pred) / std::max<Scalar>(1, std::abs(ld_next));
  return r;
}

/// Same residuals from unweighted B, B', s, y under weight w, without forming
/// weighted matrices. log_det_b and log_det_b_next are log Det of B and B'.
inline TraceDetResiduals weighted_trace_det_residuals(const WeightScheme& w, const Matrix& b, const Matrix& b_next,
                                                      Scalar log_det_b, Scalar log_det_b_next, const Vector& s,
                                                      const Vector& y) {
  const Vector bs = b * s;
  const Scalar sbs = s.dot(bs);
  const Scalar sy = s.dot(y);
  const Scalar tr_pred = w.weighted_trace(b) - w.inv_quad(bs) / sbs + w.inv_quad(y) / sy;
  const Scalar tr_next = w.weighted_trace(b_next);
  const Scalar ld = log_det_b - w.log_det_P();
  const Scalar ld_next = log_det_b_next - w.log_det_P();
  TraceDetResiduals r;
  r.trace = std::abs(tr_next - tr_pred) / std::max(std::abs(tr_next), std::numeric_limits<Scalar>::min());
  r.log_det = std::abs(ld_next - (ld + std::log(sy / sbs))) / std::max<Scalar>(1, std::abs(ld_next));
  return r;
}

/// psi_k + ray - 1 + log(cos^2 / m) - psi_{k+1}; non-negative when the recursion holds.
inline Scalar potential_recursion_margin(Scalar psi, Scalar psi_next, const StepDiagnostics& diag) {
  const Scalar rhs = psi + diag.ray_ratio - 1 + std::log(diag.cos_theta * diag.cos_theta / diag.m_hat);
  return rhs - psi_next;
}

/// Relative margins of the step-size, gradient, and curvature inequalities.
struct StepBoundMargins {
  Scalar alpha = 0;
  Scalar q = 0;
  Scalar ray = 0;
  std::optional<Scalar> m_lower;
  std::optional<Scalar> m_upper;
};

inline Scalar alpha_lower_bound(Scalar kappa, Scalar C) {
  return std::max(1 / (1 + std::sqrt(kappa)), 1 / (2 * (1 + C)));
}

inline StepBoundMargins check_step_bounds(const StepDiagnostics& diag, WeightKind scheme, const SmoothnessConstants& c) {
  StepBoundMargins m;
  const Scalar a_lo = alpha_lower_bound(c.kappa, diag.C_k);
  m.alpha = (diag.alpha_hat - a_lo) / a_lo;
  switch (scheme) {
    case WeightKind::gradient_lipschitz: {
      const Scalar q_lo = 2 / c.kappa;
      m.q = (diag.q_hat - q_lo) / q_lo;
      m.ray = 1 - diag.ray_ratio;
      const Scalar m_lo = 1 / c.kappa;
      m.m_lower = (diag.m_hat - m_lo) / m_lo;
      m.m_upper = 1 - diag.m_hat;
      break;
    }
    case WeightKind::minimizer_hessian: {
      const Scalar q_lo = 2 / ((1 + diag.C_k) * (1 + diag.C_k));
      m.q = (diag.q_hat - q_lo) / q_lo;
      m.ray = (1 + diag.C_k - diag.ray_ratio) / (1 + diag.C_k);
      break;
    }
    case WeightKind::identity:
      throw DiagnosticsError("step bounds: no gradient or curvature bound for the identity weight");
  }
  return m;
}

namespace detail {

inline double min_eigenvalue_double(const Matrix& a) {
  const Eigen::MatrixXd ad = a.cast<double>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ad, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DiagnosticsError("eigendecomposition failed");
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Minimum eigenvalues of the eight sandwich differences at one iterate,
/// divided by L. Non-negative entries mean the ordering holds.
struct SandwichMargins {
  Scalar J_upper = 0, J_lower = 0;
  Scalar G_upper = 0, G_lower = 0;
  Scalar mid_J_upper = 0, mid_J_lower = 0;  // worst over the sampled tau
  Scalar mid_G_upper = 0, mid_G_lower = 0;

  Scalar worst() const {
    return std::min({J_upper, J_lower, G_upper, G_lower, mid_J_upper, mid_J_lower, mid_G_upper, mid_G_lower});
  }
};

inline SandwichMargins check_hessian_sandwich(const ObjectiveModel& obj, const Vector& x, const Vector& x_next,
                                              const ReferenceSolution& ref, const SmoothnessConstants& c, Scalar C_k,
                                              const std::vector<Scalar>& taus = {0, Scalar(0.5), 1},
                                              int quad_order = 16) {
  const Matrix J = average_hessian(obj, x, x_next, quad_order);
  const Matrix G = average_hessian(obj, x, ref.x_star, quad_order);
  const Matrix& H = ref.hess_star;
  const Scalar up = 1 + C_k;
  const Scalar scale = c.L;
  auto lam = [&](const Matrix& a) { return static_cast<Scalar>(detail::min_eigenvalue_double(a)) / scale; };
  SandwichMargins m;
  m.J_upper = lam(up * H - J);
  m.J_lower = lam(J - H / up);
  m.G_upper = lam(up * H - G);
  m.G_lower = lam(G - H / up);
  m.mid_J_upper = m.mid_J_lower = m.mid_G_upper = m.mid_G_lower = std::numeric_limits<Scalar>::infinity();
  for (Scalar t : taus) {
    const Matrix hj = obj.hessian_at(x + t * (x_next - x));
    const Matrix hg = obj.hessian_at(x + t * (ref.x_star - x));
    m.mid_J_upper = std::min(m.mid_J_upper, lam(up * J - hj));
    m.mid_J_lower = std::min(m.mid_J_lower, lam(hj - J / up));
    m.mid_G_upper = std::min(m.mid_G_upper, lam(up * G - hg));
    m.mid_G_lower = std::min(m.mid_G_lower, lam(hg - G / up));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Global rate bounds
// ---------------------------------------------------------------------------

namespace detail {

// (1 - x)^k for x in [0, 1].
inline Scalar linear_power(Scalar x, int k) {
  if (x >= 1) return 0;
  if (x <= 0) return 1;
  return std::exp(static_cast<Scalar>(k) * std::log1p(-x));
}

// min(1, (a / k)^k)
inline Scalar superlinear_power(Scalar a, int k) {
  if (k <= 0) return 1;
  const Scalar base = a / static_cast<Scalar>(k);
  if (base >= 1) return 1;
  if (base <= 0) return 0;
  return std::exp(static_cast<Scalar>(k) * std::log(base));
}

}  // namespace detail

/// min{2(1 + C0), 1 + sqrt(kappa)}
inline Scalar distortion_min(Scalar C0, Scalar kappa) { return std::min(2 * (1 + C0), 1 + std::sqrt(kappa)); }

/// max{2 / (1 + sqrt(kappa)), 1 / (1 + C0)}
inline Scalar contraction_max(Scalar C0, Scalar kappa) { return std::max(2 / (1 + std::sqrt(kappa)), 1 / (1 + C0)); }

/// Bound on the sum of C_i over the whole run.
inline Scalar sum_C_bound(Scalar psi_bar0, Scalar C0, Scalar kappa) {
  return C0 * psi_bar0 + 3 * C0 * kappa * distortion_min(C0, kappa);
}

/// The three linear-rate bounds on (f_k - f_*) / (f_0 - f_*) for k >= 1.
struct LinearBounds {
  Scalar first_phase = 1;       // from k = 1
  Scalar improved = 1;          // valid once k >= ceil(psi_bar0)
  bool improved_active = false;
  Scalar second_phase = 1;      // gradient-descent-like rate
  bool second_phase_active = false;
  Scalar improved_threshold = 0;
  Scalar second_phase_threshold = 0;

  /// Tightest active bound.
  Scalar tightest() const {
    Scalar b = first_phase;
    if (improved_active) b = std::min(b, improved);
    if (second_phase_active) b = std::min(b, second_phase);
    return std::min<Scalar>(b, 1);
  }
};

inline LinearBounds global_linear_bounds(int k, Scalar psi_bar0, Scalar kappa, Scalar C0) {
  if (k < 1) throw DiagnosticsError("linear bounds: k must be at least 1");
  if (psi_bar0 < 0 || kappa < 1 || C0 < 0) throw DiagnosticsError("linear bounds: invalid inputs");
  const Scalar kk = static_cast<Scalar>(k);
  const Scalar cm = contraction_max(C0, kappa);
  LinearBounds b;
  b.first_phase = detail::linear_power(std::exp(-psi_bar0 / kk) * cm / kappa, k);
  b.improved_threshold = psi_bar0;
  b.improved_active = kk >= std::ceil(psi_bar0);
  b.improved = detail::linear_power(cm / (3 * kappa), k);
  b.second_phase_threshold = (1 + C0) * psi_bar0 + 3 * C0 * kappa * distortion_min(C0, kappa);
  b.second_phase_active = kk >= std::ceil(b.second_phase_threshold);
  b.second_phase = detail::linear_power(1 / (3 * kappa), k);
  return b;
}

/// Superlinear bounds, each capped at 1.
struct SuperlinearBounds {
  Scalar measured = 1;   // uses the measured sum of C_i when supplied
  Scalar surrogate = 1;  // closed-form numerator for any B0
  Scalar li_closed_form = 1;  // B0 = L I
  Scalar mu_closed_form = 1;  // B0 = mu I
  bool measured_is_surrogate = true;
};

inline Scalar superlinear_numerator(Scalar psi_tilde0, Scalar psi_bar0, Scalar C0, Scalar kappa) {
  return psi_tilde0 + 4 * C0 * psi_bar0 + 12 * C0 * kappa * distortion_min(C0, kappa);
}

inline SuperlinearBounds global_superlinear_bounds(int k, Scalar psi_tilde0, Scalar psi_bar0, Scalar C0, Scalar kappa,
                                                    Index d, std::optional<Scalar> sum_C = std::nullopt) {
  if (k < 1) throw DiagnosticsError("superlinear bounds: k must be at least 1");
  if (psi_tilde0 < 0 || psi_bar0 < 0 || C0 < 0 || kappa < 1) throw DiagnosticsError("superlinear bounds: invalid inputs");
  const Scalar dd = static_cast<Scalar>(d);
  const Scalar tail = 12 * C0 * kappa * distortion_min(C0, kappa);
  SuperlinearBounds b;
  b.surrogate = detail::superlinear_power(superlinear_numerator(psi_tilde0, psi_bar0, C0, kappa), k);
  if (sum_C) {
    b.measured = detail::superlinear_power(psi_tilde0 + 4 * *sum_C, k);
    b.measured_is_surrogate = false;
  } else {
    b.measured = b.surrogate;
  }
  b.li_closed_form = detail::superlinear_power(dd * kappa + tail, k);
  b.mu_closed_form = detail::superlinear_power((1 + 4 * C0) * dd * std::log(kappa) + tail, k);
  return b;
}

/// Closed-form linear bounds for the two identity initializations.
struct ClosedFormLinear {
  Scalar first = 1;
  Scalar improved = 1;
  bool improved_active = false;
  Scalar second = 1;
  bool second_active = false;
};

inline ClosedFormLinear closed_form_linear_L(int k, Scalar kappa, Scalar C0) {
  const Scalar kk = static_cast<Scalar>(k);
  ClosedFormLinear b;
  b.first = detail::linear_power(contraction_max(C0, kappa) / kappa, k);
  b.second_active = kk >= std::ceil(3 * C0 * kappa * distortion_min(C0, kappa));
  b.second = detail::linear_power(1 / (3 * kappa), k);
  return b;
}

inline ClosedFormLinear closed_form_linear_mu(int k, Index d, Scalar kappa, Scalar C0) {
  const Scalar kk = static_cast<Scalar>(k);
  const Scalar dlk = static_cast<Scalar>(d) * std::log(kappa);
  const Scalar cm = contraction_max(C0, kappa);
  ClosedFormLinear b;
  b.first = detail::linear_power(std::exp(-dlk / kk) * cm / kappa, k);
  b.improved_active = kk >= std::ceil(dlk);
  b.improved = detail::linear_power(cm / (3 * kappa), k);
  b.second_active = kk >= std::ceil((1 + C0) * dlk + 3 * C0 * kappa * distortion_min(C0, kappa));
  b.second = detail::linear_power(1 / (3 * kappa), k);
  return b;
}

enum class B0Kind { L, mu, other };

/// Starting iterations of the three convergence phases, in explicit form.
struct PhaseThresholds {
  Scalar linear_phase_one = 1;
  Scalar linear_phase_two = 0;
  Scalar superlinear = 0;
};

inline PhaseThresholds phase_thresholds(Index d, Scalar kappa, Scalar C0, B0Kind policy) {
  if (policy == B0Kind::other) throw DiagnosticsError("phase thresholds: only L I and mu I have closed forms");
  const Scalar dd = static_cast<Scalar>(d);
  const Scalar m = distortion_min(C0, kappa);
  PhaseThresholds t;
  if (policy == B0Kind::L) {
    t.linear_phase_one = 1;
    t.linear_phase_two = 3 * C0 * kappa * m;
    t.superlinear = dd * kappa + 12 * C0 * kappa * m;
  } else {
    const Scalar psi_bar0 = potential_scaled_identity(d, 1 / kappa);
    t.linear_phase_one = std::max<Scalar>(1, psi_bar0);
    t.linear_phase_two = (1 + C0) * psi_bar0 + 3 * C0 * kappa * m;
    t.superlinear = (1 + 4 * C0) * dd * std::log(kappa) + 12 * C0 * kappa * m;
  }
  return t;
}

/// Classifies B0 as exactly L I, exactly mu I, or neither.
inline B0Kind classify_b0(const Matrix& b0, const SmoothnessConstants& c) {
  const Index d = b0.rows();
  if (b0 == Matrix(c.L * Matrix::Identity(d, d))) return B0Kind::L;
  if (b0 == Matrix(c.mu * Matrix::Identity(d, d))) return B0Kind::mu;
  return B0Kind::other;
}

// ---------------------------------------------------------------------------
// Trajectory analysis
// ---------------------------------------------------------------------------

/// Per-iterate quantities for reporting.
struct IterateAnalysis {
  int k = 0;
  Scalar gap = 0;
  Scalar rel_gap = 0;
  Scalar grad_norm = 0;
  Scalar C = 0;
  std::optional<Scalar> psi_bar;
  std::optional<Scalar> psi_tilde;
  std::optional<Scalar> log_det_B;
  std::optional<StepDiagnostics> lip;   // P = L I
  std::optional<StepDiagnostics> hess;  // P = hess(x_*)
  std::optional<Scalar> bound_thm1;
  std::optional<Scalar> bound_thm2;
};

struct TrajectoryAnalysis {
  std::vector<IterateAnalysis> rows;
  Scalar gap0 = 0;
  Scalar C0 = 0;
  std::optional<Scalar> psi_bar0;
  std::optional<Scalar> psi_tilde0;
  B0Kind b0_kind = B0Kind::other;
};

namespace detail {

// B_k for every record, from retention or by replaying the update sequence.
inline std::vector<Matrix> replay_matrices(const Trajectory& traj) {
  std::vector<Matrix> out;
  if (!traj.method.uses_matrix()) return out;
  out.reserve(traj.records.size());
  HessianPair pair = HessianPair::from_b0(traj.B0);
  for (const TrajectoryRecord& rec : traj.records) {
    if (rec.B_before) {
      pair.B = *rec.B_before;
      pair.H = rec.H_before ? *rec.H_before : pair.H;
    }
    out.push_back(pair.B);
    if (rec.has_step) pair = update_pair(traj.method, pair, rec.s, rec.y);
  }
  return out;
}

}  // namespace detail

struct AnalysisContext {
  const ObjectiveModel& obj;
  const ReferenceSolution& ref;
  const SmoothnessConstants& constants;
};

/// Gaps, weighted quantities, potentials, and rate-bound columns for every record.
inline TrajectoryAnalysis analyze_trajectory(const AnalysisContext& ctx, const Trajectory& traj,
                                             const std::vector<Matrix>* matrices = nullptr) {
  const auto& c = ctx.constants;
  const Index d = ctx.obj.dim();
  TrajectoryAnalysis out;
  if (traj.records.empty()) return out;
  const WeightScheme lip = WeightScheme::gradient_lipschitz(c.L, d);
  const WeightScheme hess = WeightScheme::minimizer_hessian(ctx.ref.hess_star);

  std::vector<Matrix> replayed;
  if (!matrices && traj.method.uses_matrix()) {
    replayed = detail::replay_matrices(traj);
    matrices = &replayed;
  }
  out.b0_kind = classify_b0(traj.B0, c);

  const std::size_t n = traj.records.size();
  out.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrajectoryRecord& rec = traj.records[i];
    IterateAnalysis& row = out.rows[i];
    row.k = rec.k;
    row.gap = ctx.obj.value_change(ctx.ref.x_star, rec.x);
    row.grad_norm = rec.g.norm();
    row.C = distortion(c, row.gap);
    if (matrices && traj.method.uses_matrix()) {
      const Matrix& B = (*matrices)[i];
      const Scalar ld = linalg::log_det_spd(B);
      row.log_det_B = ld;
      row.psi_bar = lip.weighted_potential(B, ld);
      row.psi_tilde = hess.weighted_potential(B, ld);
    }
  }
  out.gap0 = out.rows[0].gap;
  out.C0 = out.rows[0].C;
  if (out.rows[0].psi_bar) {
    out.psi_bar0 = std::max<Scalar>(0, *out.rows[0].psi_bar);
    out.psi_tilde0 = std::max<Scalar>(0, *out.rows[0].psi_tilde);
  }
  for (std::size_t i = 0; i < n; ++i) {
    IterateAnalysis& row = out.rows[i];
    row.rel_gap = out.gap0 > 0 ? row.gap / out.gap0 : 0;
    const TrajectoryRecord& rec = traj.records[i];
    if (rec.has_step && row.gap > 0) {
      row.lip = weighted_step_quantities(rec.g, rec.s, rec.y, rec.decrease, row.gap, lip, c);
      row.hess = weighted_step_quantities(rec.g, rec.s, rec.y, rec.decrease, row.gap, hess, c);
      if (row.psi_bar) {
        row.lip->psi_Bhat = row.psi_bar;
        row.hess->psi_Bhat = row.psi_tilde;
      }
    }
    if (row.k >= 1 && out.psi_bar0) {
      row.bound_thm1 = global_linear_bounds(row.k, *out.psi_bar0, c.kappa, out.C0).tightest();
      row.bound_thm2 = global_superlinear_bounds(row.k, *out.psi_tilde0, *out.psi_bar0, out.C0, c.kappa, d).surrogate;
    }
  }
  return out;
}

/// Per-step and cumulative margins of the potential recursion.
struct PotentialRecursion {
  std::vector<Scalar> step_margin;        // psi_k + ray - 1 + log(cos^2 / m) - psi_{k+1}
  std::vector<Scalar> cumulative_margin;  // sum log(cos^2 / m) + psi_0 - sum (1 - ray)
};

inline PotentialRecursion check_potential_recursion(const AnalysisContext& ctx, const Trajectory& traj,
                                                    const WeightScheme& w) {
  if (traj.method.kind != Method::Kind::bfgs) throw DiagnosticsError("potential recursion: BFGS trajectory required");
  const std::vector<Matrix> mats = detail::replay_matrices(traj);
  PotentialRecursion out;
  if (mats.empty()) return out;
  std::vector<Scalar> psi(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) psi[i] = w.weighted_potential(mats[i], linalg::log_det_spd(mats[i]));
  Scalar lhs = 0, rhs = 0;
  for (std::size_t i = 0; i + 1 < traj.records.size(); ++i) {
    const TrajectoryRecord& rec = traj.records[i];
    if (!rec.has_step) break;
    const Scalar gap = ctx.obj.value_change(ctx.ref.x_star, rec.x);
    const StepDiagnostics dg = weighted_step_quantities(rec, gap, w, ctx.constants);
    out.step_margin.push_back(potential_recursion_margin(psi[i], psi[i + 1], dg));
    lhs += std::log(dg.cos_theta * dg.cos_theta / dg.m_hat);
    rhs += 1 - dg.ray_ratio;
    out.cumulative_margin.push_back(lhs + psi[0] - rhs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One certified inequality at one iteration; pass iff margin >= -slack.
struct CheckRecord {
  std::string name;
  int k_begin = 0;
  int k_end = 0;
  Scalar margin = 0;
  Scalar slack = 0;
  bool pass = true;
};

struct CheckSummary {
  std::string name;
  int count = 0;
  int failures = 0;
  Scalar worst_margin = std::numeric_limits<Scalar>::infinity();
  int worst_k = -1;
  int first_failure_k = -1;
};

struct BoundReport {
  std::vector<CheckRecord> records;
  std::map<std::string, std::string> metadata;

  void add(std::string name, int k_begin, int k_end, Scalar margin, Scalar slack) {
    const bool ok = std::isfinite(static_cast<double>(margin)) && margin >= -slack;
    records.push_back({std::move(name), k_begin, k_end, margin, slack, ok});
  }
  void add(std::string name, int k, Scalar margin, Scalar slack) { add(std::move(name), k, k, margin, slack); }

  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const CheckRecord& r) { return r.pass; });
  }

  std::vector<CheckRecord> failures() const {
    std::vector<CheckRecord> out;
    for (const auto& r : records)
      if (!r.pass) out.push_back(r);
    return out;
  }

  /// Smallest margin over all records, or +inf when empty.
  Scalar min_margin() const {
    Scalar m = std::numeric_limits<Scalar>::infinity();
    for (const auto& r : records) m = std::min(m, r.margin);
    return m;
  }

  std::optional<int> first_failure_iteration() const {
    std::optional<int> k;
    for (const auto& r : records)
      if (!r.pass && (!k || r.k_begin < *k)) k = r.k_begin;
    return k;
  }

  /// Iterations at which the named check failed.
  std::vector<int> failing_iterations(const std::string& name) const {
    std::vector<int> out;
    for (const auto& r : records)
      if (!r.pass && r.name == name) out.push_back(r.k_begin);
    return out;
  }

  bool has_check(const std::string& name) const {
    return std::any_of(records.begin(), records.end(), [&](const CheckRecord& r) { return r.name == name; });
  }

  /// Worst margin of the named check; +inf when it was never evaluated.
  Scalar worst(const std::string& name) const {
    Scalar m = std::numeric_limits<Scalar>::infinity();
    for (const auto& r : records)
      if (r.name == name) m = std::min(m, r.margin);
    return m;
  }

  bool passed(const std::string& name) const {
    return std::all_of(records.begin(), records.end(),
                       [&](const CheckRecord& r) { return r.name != name || r.pass; });
  }

  /// Checks whose name starts with prefix all passed.
  bool passed_prefix(const std::string& prefix) const {
    return std::all_of(records.begin(), records.end(),
                       [&](const CheckRecord& r) { return r.name.rfind(prefix, 0) != 0 || r.pass; });
  }

  std::vector<CheckSummary> summary() const {
    std::vector<CheckSummary> out;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records) {
      auto [it, inserted] = index.emplace(r.name, out.size());
      if (inserted) out.push_back(CheckSummary{r.name});
      CheckSummary& s = out[it->second];
      ++s.count;
      if (r.margin < s.worst_margin) {
        s.worst_margin = r.margin;
        s.worst_k = r.k_begin;
      }
      if (!r.pass) {
        ++s.failures;
        if (s.first_failure_k < 0) s.first_failure_k = r.k_begin;
      }
    }
    return out;
  }
};

struct ValidationConfig {
  Scalar ls_tol = 1e-10;
  int sandwich_stride = 10;
  std::vector<Scalar> sandwich_taus{0, Scalar(0.5), 1};
  int quad_order = 16;
  Scalar identity_tol = 1e-7;             // plus 10 ls_tol
  Scalar step_bound_slack = 1e-9;              // plus 10 ls_tol
  Scalar trace_det_tol = 1e-8;
  Scalar recursion_slack = 1e-7;          // times max(1, psi)
  Scalar cumulative_slack = 1e-6;         // times max(1, psi_0)
  Scalar sandwich_slack = 1e-8;           // times L
  Scalar bound_slack = 1e-7;              // relative
  Scalar dixon_tol = 1e-6;
  int dixon_horizon = 30;
  bool check_sandwich = true;
  bool check_identity_weight = true;
  Scalar reference_margin = 1e2;
};

class ReferencePrecisionError : public DiagnosticsError {
 public:
  using DiagnosticsError::DiagnosticsError;
};

namespace detail {

inline Scalar rel_margin(Scalar bound, Scalar value) {
  return (bound - value) / std::max(std::abs(bound), std::numeric_limits<Scalar>::min());
}

}  // namespace detail

/// Runs every applicable check on a trajectory.
///
/// Steps are rebuilt from (x_k, d_k, eta_k), so a record whose step length was
/// altered fails the identity and orthogonality checks at that iteration.
/// Potential and trace/determinant checks apply to BFGS; rate bounds apply to
/// every update in the convex Broyden class; gradient descent gets the
/// method-independent checks only. Companions, if given, are compared with
/// traj iterate by iterate.
inline BoundReport validate_trajectory(const ObjectiveModel& obj, const Trajectory& traj, const ReferenceSolution& ref,
                                       const SmoothnessConstants& c, const ValidationConfig& cfg = {},
                                       const std::vector<const Trajectory*>& companions = {}) {
  BoundReport report;
  report.metadata["method"] = traj.method.name();
  report.metadata["schemes"] = "LI,hess*";
  report.metadata["ls_tol"] = std::to_string(static_cast<double>(cfg.ls_tol));
  if (traj.records.empty()) return report;

  const Index d = obj.dim();
  const AnalysisContext ctx{obj, ref, c};
  const std::vector<Matrix> mats = detail::replay_matrices(traj);
  const TrajectoryAnalysis an = analyze_trajectory(ctx, traj, traj.method.uses_matrix() ? &mats : nullptr);

  const Scalar final_gap = an.rows.back().gap;
  if (traj.iterations() > 0 && ref.value_error_bound(c.mu) * cfg.reference_margin > final_gap)
    throw ReferencePrecisionError("validate: reference solution is not tighter than the final gap by the required margin");

  report.metadata["b0"] = an.b0_kind == B0Kind::L ? "LI" : an.b0_kind == B0Kind::mu ? "muI" : "other";

  const WeightScheme lip = WeightScheme::gradient_lipschitz(c.L, d);
  const WeightScheme hess = WeightScheme::minimizer_hessian(ref.hess_star);
  const WeightScheme ident = WeightScheme::identity(d);
  const bool is_bfgs = traj.method.kind == Method::Kind::bfgs;
  const bool broyden_class = traj.method.uses_matrix();
  const Scalar id_tol = cfg.identity_tol + 10 * cfg.ls_tol;
  const Scalar step_bound_slack = cfg.step_bound_slack + 10 * cfg.ls_tol;

  Scalar cum_lhs_lip = 0, cum_rhs_lip = 0, cum_lhs_hess = 0, cum_rhs_hess = 0;
  Scalar sum_C = 0;

  for (std::size_t i = 0; i + 1 < traj.records.size(); ++i) {
    const TrajectoryRecord& rec = traj.records[i];
    const TrajectoryRecord& nxt = traj.records[i + 1];
    if (!rec.has_step) continue;
    const int k = rec.k;
    const Scalar gap = an.rows[i].gap;

    // Rebuild the step from the recorded step length.
    const Vector x_new = rec.x + rec.eta * rec.d;
    const Vector g_new = obj.gradient_at(x_new);
    const Vector s = x_new - rec.x;
    const Vector y = g_new - rec.g;
    const Scalar dec = -obj.value_change(rec.x, x_new);
    const Scalar gap_new = obj.value_change(ref.x_star, x_new);

    const Scalar drift = (x_new - nxt.x).norm() / std::max(s.norm(), std::numeric_limits<Scalar>::min());
    report.add("recorded_step", k, -drift, 1e-12);
    report.add("monotone_decrease", k, dec / gap, 0);
    const Scalar orth = std::abs(g_new.dot(s)) / std::abs(rec.g.dot(s));
    report.add("orthogonality", k, (cfg.ls_tol - orth) / cfg.ls_tol, 1e-6);

    if (!(s.dot(y) > 0) || !(gap > 0)) {
      report.add("curvature_positive", k, s.dot(y) > 0 ? 0 : -1, 0);
      continue;
    }
    const StepDiagnostics dl = weighted_step_quantities(rec.g, s, y, dec, gap, lip, c);
    const StepDiagnostics dh = weighted_step_quantities(rec.g, s, y, dec, gap, hess, c);
    report.add("one_step_identity[LI]", k, -std::abs(one_step_identity_residual(dl, gap, gap_new)), id_tol);
    report.add("one_step_identity[hess*]", k, -std::abs(one_step_identity_residual(dh, gap, gap_new)), id_tol);
    if (cfg.check_identity_weight) {
      const StepDiagnostics di = weighted_step_quantities(rec.g, s, y, dec, gap, ident, c);
      report.add("one_step_identity[I]", k, -std::abs(one_step_identity_residual(di, gap, gap_new)), id_tol);
    }

    const StepBoundMargins ml = check_step_bounds(dl, WeightKind::gradient_lipschitz, c);
    const StepBoundMargins mh = check_step_bounds(dh, WeightKind::minimizer_hessian, c);
    report.add("step_ratio_lower", k, ml.alpha, step_bound_slack);
    report.add("gradient_ratio_lower[LI]", k, ml.q, step_bound_slack);
    report.add("gradient_ratio_lower[hess*]", k, mh.q, step_bound_slack);
    report.add("curvature_ratio_upper[LI]", k, ml.ray, step_bound_slack);
    report.add("curvature_ratio_upper[hess*]", k, mh.ray, step_bound_slack);
    report.add("secant_curvature_range[LI]", k, std::min(*ml.m_lower, *ml.m_upper), step_bound_slack);

    if (cfg.check_sandwich && cfg.sandwich_stride > 0 && k % cfg.sandwich_stride == 0) {
      const SandwichMargins sm = check_hessian_sandwich(obj, rec.x, nxt.x, ref, c, an.rows[i].C, cfg.sandwich_taus,
                                                        cfg.quad_order);
      report.add("hessian_sandwich", k, sm.worst(), cfg.sandwich_slack);
    }

    if (is_bfgs && an.rows[i].psi_bar && an.rows[i + 1].psi_bar) {
      const Matrix& B = mats[i];
      const Matrix& Bn = mats[i + 1];
      for (const WeightScheme* w : {&lip, &hess}) {
        const std::string tag = std::string("[") + to_string(w->kind()) + "]";
        const TraceDetResiduals td =
            weighted_trace_det_residuals(*w, B, Bn, *an.rows[i].log_det_B, *an.rows[i + 1].log_det_B, rec.s, rec.y);
        report.add("trace_identity" + tag, k, -td.trace, cfg.trace_det_tol);
        report.add("det_identity" + tag, k, -td.log_det, cfg.trace_det_tol);
      }
      // The potential recursion is checked on the recorded step that produced B_{k+1}.
      const StepDiagnostics rl = *an.rows[i].lip;
      const StepDiagnostics rh = *an.rows[i].hess;
      const Scalar psi_l = *an.rows[i].psi_bar, psi_ln = *an.rows[i + 1].psi_bar;
      const Scalar psi_h = *an.rows[i].psi_tilde, psi_hn = *an.rows[i + 1].psi_tilde;
      report.add("potential_recursion[LI]", k, potential_recursion_margin(psi_l, psi_ln, rl) / std::max<Scalar>(1, psi_l),
                 cfg.recursion_slack);
      report.add("potential_recursion[hess*]", k,
                 potential_recursion_margin(psi_h, psi_hn, rh) / std::max<Scalar>(1, psi_h), cfg.recursion_slack);
      cum_lhs_lip += std::log(rl.cos_theta * rl.cos_theta / rl.m_hat);
      cum_rhs_lip += 1 - rl.ray_ratio;
      cum_lhs_hess += std::log(rh.cos_theta * rh.cos_theta / rh.m_hat);
      cum_rhs_hess += 1 - rh.ray_ratio;
      const Scalar p0l = *an.psi_bar0, p0h = *an.psi_tilde0;
      report.add("potential_cumulative[LI]", k, (cum_lhs_lip - (-p0l + cum_rhs_lip)) / std::max<Scalar>(1, p0l),
                 cfg.cumulative_slack);
      report.add("potential_cumulative[hess*]", k, (cum_lhs_hess - (-p0h + cum_rhs_hess)) / std::max<Scalar>(1, p0h),
                 cfg.cumulative_slack);
    }

    sum_C += an.rows[i].C;
    if (broyden_class && an.psi_bar0) {
      const int kk = k + 1;
      const Scalar r = an.rows[i + 1].rel_gap;
      const Scalar psi_bar0 = *an.psi_bar0, psi_tilde0 = *an.psi_tilde0;
      const LinearBounds lb = global_linear_bounds(kk, psi_bar0, c.kappa, an.C0);
      report.add("linear_rate_first_phase", kk, detail::rel_margin(lb.first_phase, r), cfg.bound_slack);
      if (lb.improved_active) report.add("linear_rate_improved", kk, detail::rel_margin(lb.improved, r), cfg.bound_slack);
      if (lb.second_phase_active)
        report.add("linear_rate_second_phase", kk, detail::rel_margin(lb.second_phase, r), cfg.bound_slack);
      const SuperlinearBounds sb = global_superlinear_bounds(kk, psi_tilde0, psi_bar0, an.C0, c.kappa, d, sum_C);
      report.add("superlinear_rate", kk, detail::rel_margin(sb.surrogate, r), cfg.bound_slack);
      report.add("superlinear_rate_measured", kk, detail::rel_margin(sb.measured, r), cfg.bound_slack);
      report.add("measured_not_looser", kk, detail::rel_margin(sb.surrogate, sb.measured), cfg.bound_slack);
      const Scalar cb = sum_C_bound(psi_bar0, an.C0, c.kappa);
      report.add("sum_C_bound", kk, cb > 0 ? detail::rel_margin(cb, sum_C) : -sum_C, cfg.bound_slack);
      if (an.b0_kind == B0Kind::L) {
        const ClosedFormLinear cl = closed_form_linear_L(kk, c.kappa, an.C0);
        report.add("li_linear_rate", kk, detail::rel_margin(cl.first, r), cfg.bound_slack);
        if (cl.second_active) report.add("li_linear_rate_second_phase", kk, detail::rel_margin(cl.second, r), cfg.bound_slack);
        report.add("li_superlinear_rate", kk, detail::rel_margin(sb.li_closed_form, r), cfg.bound_slack);
      } else if (an.b0_kind == B0Kind::mu) {
        const ClosedFormLinear cm = closed_form_linear_mu(kk, d, c.kappa, an.C0);
        report.add("mu_linear_rate", kk, detail::rel_margin(cm.first, r), cfg.bound_slack);
        if (cm.improved_active) report.add("mu_linear_rate_improved", kk, detail::rel_margin(cm.improved, r), cfg.bound_slack);
        if (cm.second_active) report.add("mu_linear_rate_second_phase", kk, detail::rel_margin(cm.second, r), cfg.bound_slack);
        report.add("mu_superlinear_rate", kk, detail::rel_margin(sb.mu_closed_form, r), cfg.bound_slack);
      }
    }
  }

  for (const Trajectory* other : companions) {
    const std::string name = "dixon_agreement[" + other->method.name() + "]";
    const std::size_t n = std::min(traj.records.size(), other->records.size());
    for (std::size_t i = 0; i < n && traj.records[i].k <= cfg.dixon_horizon; ++i) {
      const Vector& xb = traj.records[i].x;
      const Scalar dist = (other->records[i].x - xb).norm();
      const Scalar allowed = cfg.dixon_tol * (1 + xb.norm());
      report.add(name, traj.records[i].k, (allowed - dist) / allowed, 0);
    }
  }
  return report;
}

}  // namespace qnlab

#endif  // QNLAB_DIAGNOSTICS_HPP
