#ifndef QNLAB_HARNESS_CONFIG_HPP
#define QNLAB_HARNESS_CONFIG_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qnlab/broyden.hpp"
#include "qnlab/core.hpp"
#include "qnlab/diagnostics.hpp"
#include "qnlab/linesearch.hpp"
#include "qnlab/objectives.hpp"

namespace qnlab::harness {

// Config dialect: one `key = value` per line, `#` starts a comment, values may
// be wrapped in double quotes, lists are comma separated. Unknown or repeated
// keys are errors. Objective keys also accept their bare names (dim, kappa,
// alpha, beta, delta, lambda).

/// Shortest decimal that parses back to the same Scalar.
inline std::string format_scalar(Scalar v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw Error("format_scalar: conversion failed");
  return std::string(buf, res.ptr);
}

inline Scalar parse_scalar(std::string_view text, std::string_view key = "value") {
  Scalar v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec == std::errc::result_out_of_range && res.ptr == last) {
    // from_chars rejects subnormals; strtold returns them rounded.
    const std::string copy(first, last);
    v = std::strtold(copy.c_str(), nullptr);
    if (std::isfinite(v) && v != 0) return v;
  }
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError(std::string(key) + ": not a number: '" + std::string(text) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view text, std::string_view key = "value") {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(std::string(key) + ": not an unsigned integer: '" + std::string(text) + "'");
  return v;
}

inline int parse_int(std::string_view text, std::string_view key = "value") {
  int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(std::string(key) + ": not an integer: '" + std::string(text) + "'");
  return v;
}

inline bool parse_bool(std::string_view text, std::string_view key = "value") {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key) + ": not a boolean: '" + std::string(text) + "'");
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Ordered key/value pairs of one config text.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!seen.emplace(key, lineno).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

enum class ObjectiveKind { hard_cubic, quadratic };

struct ExperimentConfig {
  ObjectiveKind objective = ObjectiveKind::hard_cubic;
  Index dim = 40;
  Scalar kappa = 1e3;
  Scalar alpha = 12;
  Scalar beta = 1;
  Scalar delta = 1;
  std::optional<Scalar> lambda;  // overrides kappa for the hard cubic
  std::uint64_t objective_seed = 0;
  EstimationConfig estimation;
  Scalar reference_gtol = 1e-13;

  std::vector<Method> methods{Method::bfgs(), Method::gradient_descent()};
  std::vector<std::string> b0{"LI", "muI"};
  std::uint64_t x0_seed = 0;
  LineSearchConfig ls;
  StoppingRule stop = default_stop();
  std::optional<int> gd_max_iters;  // separate cap for gradient descent
  WeightKind scheme = WeightKind::gradient_lipschitz;  // weight of the per-step CSV columns
  bool retain_matrices = false;
  int sandwich_stride = 10;

  std::string out_dir = "out";
  std::filesystem::path base_dir;  // resolves relative matrix paths

  std::string sweep_preset;
  std::vector<Index> sweep_dims;
  std::vector<Scalar> sweep_kappas;
  int sweep_threads = 0;  // 0 picks hardware concurrency
  int sweep_max_iters = 1000;
  int sweep_gd_max_iters = 2000;
  bool sweep_verify = true;

  static StoppingRule default_stop() {
    StoppingRule s;
    s.fgap_tol = 1e-16;
    s.max_iters = 300;
    return s;
  }

  void validate() const {
    if (dim < 1) throw ConfigError("objective.dim must be positive");
    if (!(kappa >= 1)) throw ConfigError("objective.kappa must be at least 1");
    if (methods.empty()) throw ConfigError("method list is empty");
    bool needs_b0 = false;
    for (const Method& m : methods) needs_b0 = needs_b0 || m.uses_matrix();
    if (needs_b0 && b0.empty()) throw ConfigError("b0 list is empty");
    ls.validate();
    if (stop.grad_tol < 0 || stop.fgap_tol < 0 || stop.max_iters < 0)
      throw ConfigError("stop: tolerances and max_iters must be non-negative");
    if (gd_max_iters && *gd_max_iters < 0) throw ConfigError("stop.gd_max_iters must be non-negative");
    if (sandwich_stride < 0) throw ConfigError("verify.sandwich_stride must be non-negative");
    if (sweep_max_iters < 0 || sweep_gd_max_iters < 0) throw ConfigError("sweep iteration caps must be non-negative");
  }
};

inline const char* to_string(ObjectiveKind k) { return k == ObjectiveKind::hard_cubic ? "hard_cubic" : "quadratic"; }

inline WeightKind parse_weight(std::string_view s) {
  if (s == "LI") return WeightKind::gradient_lipschitz;
  if (s == "hess" || s == "hess*") return WeightKind::minimizer_hessian;
  if (s == "I") return WeightKind::identity;
  throw ConfigError("diagnostics.scheme: expected LI, hess, or I");
}

inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto num = [&] { return parse_scalar(value, key); };
  if (key == "objective") {
    if (value == "hard_cubic" || value == "hard-cubic") cfg.objective = ObjectiveKind::hard_cubic;
    else if (value == "quadratic") cfg.objective = ObjectiveKind::quadratic;
    else throw ConfigError("objective: expected hard_cubic or quadratic");
  } else if (key == "objective.dim" || key == "dim") {
    cfg.dim = parse_int(value, key);
  } else if (key == "objective.kappa" || key == "kappa") {
    cfg.kappa = num();
  } else if (key == "objective.alpha" || key == "alpha") {
    cfg.alpha = num();
  } else if (key == "objective.beta" || key == "beta") {
    cfg.beta = num();
  } else if (key == "objective.delta" || key == "delta") {
    cfg.delta = num();
  } else if (key == "objective.lambda" || key == "lambda") {
    cfg.lambda = num();
  } else if (key == "objective.seed") {
    cfg.objective_seed = parse_u64(value, key);
  } else if (key == "estimation.samples") {
    cfg.estimation.samples = parse_int(value, key);
  } else if (key == "estimation.seed") {
    cfg.estimation.seed = parse_u64(value, key);
  } else if (key == "reference.gtol") {
    cfg.reference_gtol = num();
  } else if (key == "method" || key == "methods") {
    cfg.methods.clear();
    try {
      for (const auto& m : split_list(value)) cfg.methods.push_back(Method::parse(m));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (key == "b0") {
    cfg.b0 = split_list(value);
  } else if (key == "x0.seed") {
    cfg.x0_seed = parse_u64(value, key);
  } else if (key == "ls.tol") {
    cfg.ls.dd_rel_tol = num();
  } else if (key == "ls.initial_trial") {
    cfg.ls.initial_trial = num();
  } else if (key == "ls.max_bracket_doublings" || key == "ls.max_doublings") {
    cfg.ls.max_bracket_doublings = parse_int(value, key);
  } else if (key == "ls.max_refinements") {
    cfg.ls.max_refinements = parse_int(value, key);
  } else if (key == "stop.grad_tol") {
    cfg.stop.grad_tol = num();
  } else if (key == "stop.fgap_tol") {
    cfg.stop.fgap_tol = num();
  } else if (key == "stop.max_iters") {
    cfg.stop.max_iters = parse_int(value, key);
  } else if (key == "stop.gd_max_iters") {
    cfg.gd_max_iters = parse_int(value, key);
  } else if (key == "diagnostics.scheme") {
    cfg.scheme = parse_weight(value);
  } else if (key == "retain_matrices") {
    cfg.retain_matrices = parse_bool(value, key);
  } else if (key == "verify.sandwich_stride") {
    cfg.sandwich_stride = parse_int(value, key);
  } else if (key == "output.dir") {
    cfg.out_dir = value;
  } else if (key == "sweep.preset") {
    if (value != "dims" && value != "kappas" && !value.empty()) throw ConfigError("sweep.preset: expected dims or kappas");
    cfg.sweep_preset = value;
  } else if (key == "sweep.dims") {
    cfg.sweep_dims.clear();
    for (const auto& d : split_list(value)) cfg.sweep_dims.push_back(parse_int(d, key));
  } else if (key == "sweep.kappas") {
    cfg.sweep_kappas.clear();
    for (const auto& k : split_list(value)) cfg.sweep_kappas.push_back(parse_scalar(k, key));
  } else if (key == "sweep.threads") {
    cfg.sweep_threads = parse_int(value, key);
  } else if (key == "sweep.max_iters") {
    cfg.sweep_max_iters = parse_int(value, key);
  } else if (key == "sweep.gd_max_iters") {
    cfg.sweep_gd_max_iters = parse_int(value, key);
  } else if (key == "sweep.verify") {
    cfg.sweep_verify = parse_bool(value, key);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Applies a `key=value` override.
inline void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

inline ExperimentConfig parse_config(std::string_view text, std::filesystem::path base_dir = {}) {
  ExperimentConfig cfg;
  cfg.base_dir = std::move(base_dir);
  for (const auto& [k, v] : parse_config_text(text)) apply_setting(cfg, k, v);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

/// Config text that parses back to cfg.
inline std::string to_config_text(const ExperimentConfig& cfg) {
  std::ostringstream o;
  auto join = [](const auto& items, auto fmt) {
    std::string s;
    for (const auto& it : items) s += (s.empty() ? "" : ",") + fmt(it);
    return s;
  };
  o << "objective = " << to_string(cfg.objective) << "\n";
  o << "objective.dim = " << cfg.dim << "\n";
  o << "objective.kappa = " << format_scalar(cfg.kappa) << "\n";
  o << "objective.alpha = " << format_scalar(cfg.alpha) << "\n";
  o << "objective.beta = " << format_scalar(cfg.beta) << "\n";
  o << "objective.delta = " << format_scalar(cfg.delta) << "\n";
  if (cfg.lambda) o << "objective.lambda = " << format_scalar(*cfg.lambda) << "\n";
  o << "objective.seed = " << cfg.objective_seed << "\n";
  o << "estimation.samples = " << cfg.estimation.samples << "\n";
  o << "estimation.seed = " << cfg.estimation.seed << "\n";
  o << "reference.gtol = " << format_scalar(cfg.reference_gtol) << "\n";
  o << "method = " << join(cfg.methods, [](const Method& m) { return m.name(); }) << "\n";
  o << "b0 = " << join(cfg.b0, [](const std::string& b) { return b; }) << "\n";
  o << "x0.seed = " << cfg.x0_seed << "\n";
  o << "ls.tol = " << format_scalar(cfg.ls.dd_rel_tol) << "\n";
  o << "ls.initial_trial = " << format_scalar(cfg.ls.initial_trial) << "\n";
  o << "ls.max_bracket_doublings = " << cfg.ls.max_bracket_doublings << "\n";
  o << "ls.max_refinements = " << cfg.ls.max_refinements << "\n";
  o << "stop.grad_tol = " << format_scalar(cfg.stop.grad_tol) << "\n";
  o << "stop.fgap_tol = " << format_scalar(cfg.stop.fgap_tol) << "\n";
  o << "stop.max_iters = " << cfg.stop.max_iters << "\n";
  if (cfg.gd_max_iters) o << "stop.gd_max_iters = " << *cfg.gd_max_iters << "\n";
  o << "diagnostics.scheme = " << (cfg.scheme == WeightKind::minimizer_hessian ? "hess" : to_string(cfg.scheme)) << "\n";
  o << "retain_matrices = " << (cfg.retain_matrices ? "true" : "false") << "\n";
  o << "verify.sandwich_stride = " << cfg.sandwich_stride << "\n";
  o << "output.dir = \"" << cfg.out_dir << "\"\n";
  if (!cfg.sweep_preset.empty()) o << "sweep.preset = " << cfg.sweep_preset << "\n";
  if (!cfg.sweep_dims.empty())
    o << "sweep.dims = " << join(cfg.sweep_dims, [](Index d) { return std::to_string(d); }) << "\n";
  if (!cfg.sweep_kappas.empty()) o << "sweep.kappas = " << join(cfg.sweep_kappas, format_scalar) << "\n";
  o << "sweep.threads = " << cfg.sweep_threads << "\n";
  o << "sweep.max_iters = " << cfg.sweep_max_iters << "\n";
  o << "sweep.gd_max_iters = " << cfg.sweep_gd_max_iters << "\n";
  o << "sweep.verify = " << (cfg.sweep_verify ? "true" : "false") << "\n";
  return o.str();
}

/// Whitespace-separated square matrix, one row per line.
inline Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path.string() + "'");
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<Scalar> row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_scalar(tok, path.string()));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[i].size()) != n) throw ConfigError("matrix file '" + path.string() + "' is not square");
    for (Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

/// B0 policy for one entry of the b0 list.
inline B0Policy resolve_b0(const ExperimentConfig& cfg, const std::string& entry) {
  if (entry == "LI") return B0Policy::L();
  if (entry == "muI") return B0Policy::mu();
  std::filesystem::path p(entry);
  if (p.is_relative() && !cfg.base_dir.empty()) p = cfg.base_dir / p;
  return B0Policy::from_matrix(read_matrix_file(p), entry);
}

}  // namespace qnlab::harness

#endif  // QNLAB_HARNESS_CONFIG_HPP
