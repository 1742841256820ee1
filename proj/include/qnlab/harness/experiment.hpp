#ifndef QNLAB_HARNESS_EXPERIMENT_HPP
#define QNLAB_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qnlab/broyden.hpp"
#include "qnlab/diagnostics.hpp"
#include "qnlab/harness/config.hpp"
#include "qnlab/harness/csv.hpp"
#include "qnlab/harness/svg.hpp"
#include "qnlab/objectives.hpp"

namespace qnlab::harness {

/// A solver or diagnostics failure tagged with the run it came from.
class ExperimentError : public Error {
 public:
  ExperimentError(const std::string& what, std::string run) : Error(what), run_(std::move(run)) {}
  const std::string& run() const { return run_; }

 private:
  std::string run_;
};

inline ObjectiveModel build_objective(const ExperimentConfig& cfg) {
  if (cfg.objective == ObjectiveKind::quadratic) return make_random_quadratic(cfg.dim, cfg.kappa, cfg.objective_seed);
  if (cfg.lambda) return make_hard_cubic(cfg.dim, cfg.alpha, cfg.beta, *cfg.lambda, cfg.delta, cfg.estimation);
  return make_hard_cubic_for_kappa(cfg.dim, cfg.kappa, cfg.alpha, cfg.beta, cfg.delta, cfg.estimation);
}

/// The shared pieces every run of one experiment needs.
struct ExperimentContext {
  ExperimentConfig cfg;
  ObjectiveModel obj;
  ReferenceSolution ref;
  Vector x0;

  static ExperimentContext create(const ExperimentConfig& cfg) {
    cfg.validate();
    ObjectiveModel obj = build_objective(cfg);
    ReferenceSolution ref = reference_solution(obj, cfg.reference_gtol);
    Vector x0 = random_start(cfg.dim, cfg.x0_seed);
    return {cfg, std::move(obj), std::move(ref), std::move(x0)};
  }

  StoppingRule stopping(const Method& m) const {
    StoppingRule s = cfg.stop;
    s.x_star = ref.x_star;
    if (!m.uses_matrix() && cfg.gd_max_iters) s.max_iters = *cfg.gd_max_iters;
    return s;
  }

  ValidationConfig validation() const {
    ValidationConfig v;
    v.ls_tol = cfg.ls.dd_rel_tol;
    v.sandwich_stride = cfg.sandwich_stride;
    v.check_sandwich = cfg.sandwich_stride > 0;
    return v;
  }
};

struct RunOutput {
  std::string method;
  std::string b0;  // "-" for gradient descent
  Trajectory trajectory;
  TraceTable table;

  std::string id() const { return run_stem(method, b0); }
};

inline TraceTable make_trace_table(const ExperimentContext& ctx, const Trajectory& traj, const std::string& b0) {
  const auto& c = ctx.obj.constants();
  const AnalysisContext actx{ctx.obj, ctx.ref, c};
  const TrajectoryAnalysis an = analyze_trajectory(actx, traj);
  const WeightScheme w = ctx.cfg.scheme == WeightKind::minimizer_hessian ? WeightScheme::minimizer_hessian(ctx.ref.hess_star)
                         : ctx.cfg.scheme == WeightKind::identity     ? WeightScheme::identity(ctx.obj.dim())
                                                                       : WeightScheme::gradient_lipschitz(c.L, ctx.obj.dim());
  TraceTable t;
  t.method = traj.method.name();
  t.b0 = b0;
  t.rows.reserve(traj.records.size());
  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    const TrajectoryRecord& rec = traj.records[i];
    const IterateAnalysis& a = an.rows[i];
    TraceRow r;
    r.k = rec.k;
    r.f = rec.f;
    r.rel_gap = a.rel_gap;
    r.grad_norm = a.grad_norm;
    if (a.gap > 0) {
      r.q_hat = w.inv_quad(rec.g) / a.gap;
      r.C_k = a.C;
    } else {
      r.C_k = Scalar(0);
    }
    if (rec.has_step && a.gap > 0) {
      const StepDiagnostics d = weighted_step_quantities(rec, a.gap, w, c);
      r.eta = rec.eta;
      r.alpha_hat = d.alpha_hat;
      r.m_hat = d.m_hat;
      r.cos_theta = d.cos_theta;
    } else if (rec.has_step) {
      r.eta = rec.eta;
    }
    r.psi_bar = a.psi_bar;
    r.psi_tilde = a.psi_tilde;
    r.bound_thm1 = a.bound_thm1;
    r.bound_thm2 = a.bound_thm2;
    t.rows.push_back(r);
  }
  return t;
}

/// One solver run for (method, b0).
inline RunOutput run_one(const ExperimentContext& ctx, const Method& m, const std::string& b0_entry) {
  RunOutput out;
  out.method = m.name();
  out.b0 = m.uses_matrix() ? b0_entry : "-";
  const std::string id = out.id();
  try {
    const Index d = ctx.obj.dim();
    const Matrix b0 = m.uses_matrix() ? b0_from_policy(resolve_b0(ctx.cfg, b0_entry), ctx.obj.constants(), d)
                                      : Matrix(Matrix::Identity(d, d));
    out.trajectory = run(ctx.obj, ctx.x0, b0, m, ctx.stopping(m), ctx.cfg.ls, ctx.cfg.retain_matrices);
    out.table = make_trace_table(ctx, out.trajectory, out.b0);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ExperimentError("run " + id + ": " + e.what(), id);
  }
  return out;
}

struct ExperimentResult {
  ExperimentContext ctx;
  std::vector<RunOutput> runs;

  const RunOutput* find(const std::string& method, const std::string& b0) const {
    for (const auto& r : runs)
      if (r.method == method && r.b0 == b0) return &r;
    return nullptr;
  }

  std::vector<TraceTable> tables() const {
    std::vector<TraceTable> out;
    for (const auto& r : runs) out.push_back(r.table);
    return out;
  }
};

/// Runs every (method, b0) pair in config order; gradient descent runs once.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res{ExperimentContext::create(cfg), {}};
  for (const Method& m : cfg.methods) {
    if (!m.uses_matrix()) {
      res.runs.push_back(run_one(res.ctx, m, "-"));
      continue;
    }
    for (const std::string& b : cfg.b0) res.runs.push_back(run_one(res.ctx, m, b));
  }
  return res;
}

/// Writes one CSV per run, the effective config, and a convergence plot.
inline void write_experiment(const ExperimentResult& res, const std::filesystem::path& dir, const std::string& title = {}) {
  std::filesystem::create_directories(dir);
  for (const auto& r : res.runs) emit_csv(r.table, dir / (r.id() + ".csv"));
  {
    std::ofstream cfg_out(dir / "config.cfg", std::ios::binary);
    if (!cfg_out) throw Error("cannot write '" + (dir / "config.cfg").string() + "'");
    cfg_out << to_config_text(res.ctx.cfg);
  }
  PlotStyle style;
  style.title = title;
  emit_svg_plot(res.tables(), dir / "convergence.svg", style);
}

/// Full validation of one run, with optional companions for iterate agreement.
inline BoundReport verify_run(const ExperimentContext& ctx, const Trajectory& traj,
                              const std::vector<const Trajectory*>& companions = {}) {
  return validate_trajectory(ctx.obj, traj, ctx.ref, ctx.obj.constants(), ctx.validation(), companions);
}

namespace detail {

inline Scalar column_error(const std::optional<Scalar>& stored, const std::optional<Scalar>& fresh) {
  if (stored.has_value() != fresh.has_value()) return std::numeric_limits<Scalar>::infinity();
  if (!stored) return 0;
  const Scalar scale = std::max({std::abs(*stored), std::abs(*fresh), std::numeric_limits<Scalar>::min()});
  return std::abs(*stored - *fresh) / scale;
}

}  // namespace detail

/// Certifies a stored trace against a fresh simulation of the same config.
///
/// Stored values are compared with the simulation row by row, then every
/// diagnostic is recomputed with the stored step lengths.
inline BoundReport verify_trace(const ExperimentContext& ctx, const TraceTable& trace, const std::string& method_name,
                                const std::string& b0) {
  const Method m = Method::parse(method_name);
  RunOutput fresh = run_one(ctx, m, m.uses_matrix() ? b0 : "-");
  Trajectory traj = fresh.trajectory;

  BoundReport consistency;
  const std::size_t n = std::min(trace.rows.size(), traj.records.size());
  if (trace.rows.size() != traj.records.size())
    consistency.add("trace_length", static_cast<int>(n), -1, 0);
  constexpr Scalar tol = 1e-9;
  for (std::size_t i = 0; i < n; ++i) {
    const TraceRow& s = trace.rows[i];
    const TraceRow& f = fresh.table.rows[i];
    Scalar err = s.k == f.k ? 0 : std::numeric_limits<Scalar>::infinity();
    err = std::max(err, detail::column_error(s.f, f.f));
    err = std::max(err, detail::column_error(s.rel_gap, f.rel_gap));
    err = std::max(err, detail::column_error(s.grad_norm, f.grad_norm));
    err = std::max(err, detail::column_error(s.C_k, f.C_k));
    err = std::max(err, detail::column_error(s.psi_bar, f.psi_bar));
    err = std::max(err, detail::column_error(s.psi_tilde, f.psi_tilde));
    err = std::max(err, detail::column_error(s.bound_thm1, f.bound_thm1));
    err = std::max(err, detail::column_error(s.bound_thm2, f.bound_thm2));
    consistency.add("trace_consistency", f.k, 1 - err / tol, 0);
    TrajectoryRecord& rec = traj.records[i];
    if (rec.has_step) {
      if (!s.eta) {
        consistency.add("trace_step_length", f.k, -1, 0);
      } else {
        rec.eta = *s.eta;
      }
    }
  }
  BoundReport report = verify_run(ctx, traj);
  report.metadata["run"] = fresh.id();
  report.records.insert(report.records.begin(), consistency.records.begin(), consistency.records.end());
  return report;
}

}  // namespace qnlab::harness

#endif  // QNLAB_HARNESS_EXPERIMENT_HPP
