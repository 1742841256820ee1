#ifndef QNLAB_HARNESS_CLI_HPP
#define QNLAB_HARNESS_CLI_HPP

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "qnlab/harness/config.hpp"
#include "qnlab/harness/csv.hpp"
#include "qnlab/harness/experiment.hpp"
#include "qnlab/harness/svg.hpp"
#include "qnlab/harness/sweep.hpp"

namespace qnlab::harness {

enum ExitCode : int { exit_ok = 0, exit_solver = 1, exit_verify = 2, exit_config = 3 };

namespace detail {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

inline void add_common(CLI::App* sub, CommonFlags& f, bool config_required) {
  auto* opt = sub->add_option("--config", f.config, "config file (key = value lines)");
  if (config_required) opt->required();
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "seed of the random starting point");
  sub->add_option("--set", f.sets, "override one config key, key=value")->take_all();
}

inline ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  for (const auto& s : f.sets) apply_override(cfg, s);
  if (f.seed) cfg.x0_seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  cfg.validate();
  return cfg;
}

inline std::string sci(Scalar v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3Le", v);
  return buf;
}

inline void print_report(std::ostream& out, const std::string& run, const BoundReport& rep) {
  out << "run " << run << "\n";
  for (const auto& s : rep.summary()) {
    out << "  " << (s.failures == 0 ? "pass " : "FAIL ") << s.name << "  n=" << s.count
        << "  worst_margin=" << sci(s.worst_margin) << " at k=" << s.worst_k;
    if (s.failures > 0) out << "  failures=" << s.failures << " first at k=" << s.first_failure_k;
    out << "\n";
  }
  out << "  verdict: " << (rep.passed() ? "PASS" : "FAIL");
  if (const auto k = rep.first_failure_iteration()) out << " (first failing iteration " << *k << ")";
  out << "\n";
}

inline void write_report(const std::filesystem::path& dir, const std::string& run, const BoundReport& rep) {
  std::filesystem::create_directories(dir);
  std::ofstream o(dir / ("verify_" + run + ".csv"), std::ios::binary);
  o << report_to_csv(rep);
}

}  // namespace detail

/// Entry point of the qnlab tool; args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"quasi-Newton convergence laboratory"};
  app.require_subcommand(1);

  detail::CommonFlags run_f, sweep_f, verify_f;
  auto* run_cmd = app.add_subcommand("run", "simulate every configured (method, B0) pair and write traces");
  detail::add_common(run_cmd, run_f, false);

  auto* sweep_cmd = app.add_subcommand("sweep", "run a (d, kappa) grid and summarize phase onsets");
  detail::add_common(sweep_cmd, sweep_f, false);
  std::string preset;
  sweep_cmd->add_option("--preset", preset, "dims or kappas");

  auto* verify_cmd = app.add_subcommand("verify", "certify a stored trace, or fresh runs, against every bound");
  detail::add_common(verify_cmd, verify_f, false);
  std::string trace_path, method_name, b0_name;
  verify_cmd->add_option("--trace", trace_path, "trace CSV to certify");
  verify_cmd->add_option("--method", method_name, "method of the trace (default: from the file name)");
  verify_cmd->add_option("--b0", b0_name, "B0 policy of the trace (default: from the file name)");

  auto* plot_cmd = app.add_subcommand("plot", "render trace CSVs as a log-gap plot");
  std::vector<std::string> plot_traces;
  std::string plot_out, plot_title, plot_name = "convergence.svg";
  bool plot_bounds = false;
  plot_cmd->add_option("traces", plot_traces, "trace CSV files")->required();
  plot_cmd->add_option("--out", plot_out, "output directory");
  plot_cmd->add_option("--name", plot_name, "output file name");
  plot_cmd->add_option("--title", plot_title, "plot title");
  plot_cmd->add_flag("--bounds", plot_bounds, "overlay the rate bounds as dashed lines");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }

  try {
    if (*run_cmd) {
      const ExperimentConfig cfg = detail::resolve_config(run_f);
      const ExperimentResult res = run_experiment(cfg);
      write_experiment(res, cfg.out_dir);
      for (const auto& r : res.runs)
        out << r.id() << ": " << r.trajectory.iterations() << " iterations, " << to_string(r.trajectory.termination)
            << ", final rel_gap " << detail::sci(r.table.rows.back().rel_gap) << "\n";
      return exit_ok;
    }
    if (*sweep_cmd) {
      ExperimentConfig cfg = detail::resolve_config(sweep_f);
      if (!preset.empty()) apply_setting(cfg, "sweep.preset", preset);
      const SweepResult res = sweep(cfg);
      write_sweep(res, cfg, cfg.out_dir);
      out << sweep_summary_csv(res);
      bool failed = false, verify_failed = false;
      for (const auto& c : res.cells) {
        failed = failed || !c.error.empty();
        for (const auto& s : c.summary) verify_failed = verify_failed || (s.verified && !*s.verified);
      }
      if (failed) return exit_solver;
      return verify_failed ? exit_verify : exit_ok;
    }
    if (*verify_cmd) {
      const ExperimentConfig cfg = detail::resolve_config(verify_f);
      const ExperimentContext ctx = ExperimentContext::create(cfg);
      bool ok = true;
      if (!trace_path.empty()) {
        const TraceTable trace = read_csv(trace_path);
        auto [m, b] = parse_run_stem(std::filesystem::path(trace_path).stem().string());
        if (!method_name.empty()) m = method_name;
        if (!b0_name.empty()) b = b0_name;
        const BoundReport rep = verify_trace(ctx, trace, m, b);
        const std::string id = run_stem(Method::parse(m).name(), Method::parse(m).uses_matrix() ? b : "-");
        detail::print_report(out, id, rep);
        if (!verify_f.out.empty()) detail::write_report(verify_f.out, id, rep);
        ok = rep.passed();
      } else {
        for (const Method& m : cfg.methods) {
          const std::vector<std::string> b0s = m.uses_matrix() ? cfg.b0 : std::vector<std::string>{"-"};
          for (const auto& b : b0s) {
            const RunOutput r = run_one(ctx, m, b);
            const BoundReport rep = verify_run(ctx, r.trajectory);
            detail::print_report(out, r.id(), rep);
            if (!verify_f.out.empty()) detail::write_report(verify_f.out, r.id(), rep);
            ok = ok && rep.passed();
          }
        }
      }
      return ok ? exit_ok : exit_verify;
    }
    if (*plot_cmd) {
      std::vector<TraceTable> tables;
      for (const auto& p : plot_traces) {
        TraceTable t = read_csv(p);
        auto [m, b] = parse_run_stem(std::filesystem::path(p).stem().string());
        t.method = m;
        t.b0 = b;
        tables.push_back(std::move(t));
      }
      PlotStyle style;
      style.title = plot_title;
      style.show_bounds = plot_bounds;
      const std::filesystem::path dir = plot_out.empty() ? std::filesystem::path(".") : std::filesystem::path(plot_out);
      std::filesystem::create_directories(dir);
      emit_svg_plot(tables, dir / plot_name, style);
      out << (dir / plot_name).string() << "\n";
      return exit_ok;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const CsvError& e) {
    err << "trace error: " << e.what() << "\n";
    return exit_config;
  } catch (const DiagnosticsError& e) {
    err << "verification error: " << e.what() << "\n";
    return exit_verify;
  } catch (const Error& e) {
    err << "solver error: " << e.what() << "\n";
    return exit_solver;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return exit_solver;
  }
  return exit_config;
}

}  // namespace qnlab::harness

#endif  // QNLAB_HARNESS_CLI_HPP
