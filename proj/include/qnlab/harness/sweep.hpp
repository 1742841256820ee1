#ifndef QNLAB_HARNESS_SWEEP_HPP
#define QNLAB_HARNESS_SWEEP_HPP

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qnlab/harness/experiment.hpp"

namespace qnlab::harness {

inline constexpr std::array<Scalar, 3> gap_thresholds{1e-4, 1e-8, 1e-12};
inline constexpr int onset_window = 5;

/// First k with rel_gap <= threshold.
inline std::optional<int> first_reaching(const TraceTable& t, Scalar threshold) {
  for (const auto& r : t.rows)
    if (r.rel_gap <= threshold) return r.k;
  return std::nullopt;
}

/// First k after which the successive gap ratio stays below
/// 0.5 (1 - 1 / (3 kappa)) for five consecutive iterations.
inline std::optional<int> superlinear_onset(const TraceTable& t, Scalar kappa) {
  const Scalar limit = Scalar(0.5) * (1 - 1 / (3 * kappa));
  int run = 0;
  for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
    const Scalar a = t.rows[i].rel_gap, b = t.rows[i + 1].rel_gap;
    const bool below = a > 0 && b / a < limit;
    run = below ? run + 1 : 0;
    if (run == onset_window) return t.rows[i + 1 - onset_window].k;
  }
  return std::nullopt;
}

struct SweepGrid {
  std::vector<Index> dims;
  std::vector<Scalar> kappas;
  std::string note;  // desk-scale substitution, copied into metadata
};

/// Desk-scale presets: dims fixes kappa and varies d, kappas fixes d and varies kappa.
inline SweepGrid sweep_preset(const std::string& name) {
  if (name == "dims") return {{40, 400}, {1e3}, "kappa = 1e3, d in {40, 400}; d = 4000 omitted at desk scale"};
  if (name == "kappas") return {{200}, {10, 1e2, 1e3}, "d = 200 (scaled down from 600), kappa in {10, 1e2, 1e3}"};
  throw ConfigError("unknown sweep preset '" + name + "'");
}

inline SweepGrid sweep_grid(const ExperimentConfig& cfg) {
  SweepGrid g;
  if (!cfg.sweep_preset.empty()) g = sweep_preset(cfg.sweep_preset);
  if (!cfg.sweep_dims.empty()) g.dims = cfg.sweep_dims;
  if (!cfg.sweep_kappas.empty()) g.kappas = cfg.sweep_kappas;
  if (g.dims.empty() || g.kappas.empty()) throw ConfigError("sweep grid is empty");
  return g;
}

struct RunSummary {
  std::string method;
  std::string b0;
  int iterations = 0;
  std::string termination;
  std::array<std::optional<int>, 3> reached;
  std::optional<int> onset;
  std::optional<bool> verified;
  int failed_checks = 0;
};

struct SweepCell {
  Index dim = 0;
  Scalar kappa = 0;
  std::vector<RunOutput> runs;
  std::vector<RunSummary> summary;
  std::string error;  // empty when the cell completed

  std::string id() const { return "d" + std::to_string(dim) + "_kappa" + format_scalar(kappa); }

  const RunSummary* find(const std::string& method, const std::string& b0) const {
    for (const auto& s : summary)
      if (s.method == method && s.b0 == b0) return &s;
    return nullptr;
  }
};

struct SweepResult {
  SweepGrid grid;
  std::vector<SweepCell> cells;

  const SweepCell* find(Index d, Scalar kappa) const {
    for (const auto& c : cells)
      if (c.dim == d && c.kappa == kappa) return &c;
    return nullptr;
  }
};

/// Config of one cell: the base config with d, kappa, and the sweep caps.
inline ExperimentConfig cell_config(const ExperimentConfig& base, Index d, Scalar kappa) {
  ExperimentConfig cfg = base;
  cfg.dim = d;
  cfg.kappa = kappa;
  cfg.lambda.reset();
  cfg.stop.max_iters = base.sweep_max_iters;
  cfg.gd_max_iters = base.sweep_gd_max_iters;
  return cfg;
}

inline SweepCell run_cell(const ExperimentConfig& base, Index d, Scalar kappa) {
  SweepCell cell;
  cell.dim = d;
  cell.kappa = kappa;
  try {
    const ExperimentConfig cfg = cell_config(base, d, kappa);
    ExperimentResult res = run_experiment(cfg);
    for (auto& r : res.runs) {
      RunSummary s;
      s.method = r.method;
      s.b0 = r.b0;
      s.iterations = r.trajectory.iterations();
      s.termination = to_string(r.trajectory.termination);
      for (std::size_t i = 0; i < gap_thresholds.size(); ++i) s.reached[i] = first_reaching(r.table, gap_thresholds[i]);
      s.onset = superlinear_onset(r.table, res.ctx.obj.constants().kappa);
      if (base.sweep_verify && r.trajectory.method.kind == Method::Kind::bfgs) {
        const BoundReport rep = verify_run(res.ctx, r.trajectory);
        s.verified = rep.passed();
        s.failed_checks = static_cast<int>(rep.failures().size());
      }
      cell.summary.push_back(s);
    }
    cell.runs = std::move(res.runs);
  } catch (const Error& e) {
    cell.error = e.what();
  }
  return cell;
}

/// Runs every (d, kappa) cell; a failed cell records its error and the sweep continues.
inline SweepResult sweep(const ExperimentConfig& base) {
  SweepResult out;
  out.grid = sweep_grid(base);
  std::vector<std::pair<Index, Scalar>> work;
  for (Index d : out.grid.dims)
    for (Scalar k : out.grid.kappas) work.emplace_back(d, k);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t width = base.sweep_threads > 0 ? static_cast<std::size_t>(base.sweep_threads) : hw;
  out.cells.resize(work.size());
  for (std::size_t start = 0; start < work.size(); start += width) {
    std::vector<std::future<SweepCell>> batch;
    const std::size_t stop = std::min(work.size(), start + width);
    for (std::size_t i = start; i < stop; ++i)
      batch.push_back(std::async(std::launch::async, run_cell, std::cref(base), work[i].first, work[i].second));
    for (std::size_t i = start; i < stop; ++i) out.cells[i] = batch[i - start].get();
  }
  return out;
}

inline std::string sweep_summary_csv(const SweepResult& res) {
  std::ostringstream o;
  o << "d,kappa,method,b0,iterations,termination,k_1e-4,k_1e-8,k_1e-12,onset,verified,failed_checks,error\n";
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& c : res.cells) {
    if (!c.error.empty()) {
      std::string err = c.error;
      std::replace(err.begin(), err.end(), ',', ';');
      o << c.dim << ',' << format_scalar(c.kappa) << ",,,,,,,,,,," << err << '\n';
      continue;
    }
    for (const auto& s : c.summary) {
      o << c.dim << ',' << format_scalar(c.kappa) << ',' << s.method << ',' << s.b0 << ',' << s.iterations << ','
        << s.termination << ',' << opt(s.reached[0]) << ',' << opt(s.reached[1]) << ',' << opt(s.reached[2]) << ','
        << opt(s.onset) << ',' << (s.verified ? (*s.verified ? "pass" : "fail") : "") << ',' << s.failed_checks
        << ",\n";
    }
  }
  return o.str();
}

/// Per-cell traces and plots plus summary.csv and metadata.txt at the top level.
inline void write_sweep(const SweepResult& res, const ExperimentConfig& base, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& c : res.cells) {
    if (!c.error.empty() || c.runs.empty()) continue;
    const auto cdir = dir / c.id();
    std::filesystem::create_directories(cdir);
    std::vector<TraceTable> tables;
    for (const auto& r : c.runs) {
      emit_csv(r.table, cdir / (r.id() + ".csv"));
      tables.push_back(r.table);
    }
    std::ofstream cfg_out(cdir / "config.cfg", std::ios::binary);
    cfg_out << to_config_text(cell_config(base, c.dim, c.kappa));
    PlotStyle style;
    style.title = "d = " + std::to_string(c.dim) + ", kappa = " + format_scalar(c.kappa);
    emit_svg_plot(tables, cdir / "convergence.svg", style);
  }
  std::ofstream sum(dir / "summary.csv", std::ios::binary);
  sum << sweep_summary_csv(res);
  std::ofstream meta(dir / "metadata.txt", std::ios::binary);
  meta << "grid: " << res.grid.note << "\n";
  meta << "onset detector: first k after which (f_{k+1} - f*) / (f_k - f*) < 0.5 (1 - 1/(3 kappa)) for "
       << onset_window << " consecutive iterations\n";
  meta << "gradient descent cap: " << base.sweep_gd_max_iters << " iterations\n";
  meta << "quasi-Newton cap: " << base.sweep_max_iters << " iterations\n";
}

}  // namespace qnlab::harness

#endif  // QNLAB_HARNESS_SWEEP_HPP
