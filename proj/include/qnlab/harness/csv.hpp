#ifndef QNLAB_HARNESS_CSV_HPP
#define QNLAB_HARNESS_CSV_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qnlab/core.hpp"
#include "qnlab/diagnostics.hpp"
#include "qnlab/harness/config.hpp"

namespace qnlab::harness {

inline constexpr std::string_view trace_header =
    "k,f,rel_gap,grad_norm,eta,alpha_hat,q_hat,m_hat,cos_theta,C_k,psi_bar,psi_tilde,bound_thm1,bound_thm2";

struct TraceRow {
  int k = 0;
  Scalar f = 0;
  Scalar rel_gap = 0;
  Scalar grad_norm = 0;
  std::optional<Scalar> eta;
  std::optional<Scalar> alpha_hat;
  std::optional<Scalar> q_hat;
  std::optional<Scalar> m_hat;
  std::optional<Scalar> cos_theta;
  std::optional<Scalar> C_k;
  std::optional<Scalar> psi_bar;
  std::optional<Scalar> psi_tilde;
  std::optional<Scalar> bound_thm1;
  std::optional<Scalar> bound_thm2;

  bool operator==(const TraceRow&) const = default;
};

struct TraceTable {
  std::string method;
  std::string b0;  // "-" for gradient descent
  std::vector<TraceRow> rows;

  std::string label() const { return b0 == "-" ? method : method + " B0=" + b0; }
};

class CsvError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void put(std::string& line, const std::optional<Scalar>& v) {
  line += ',';
  if (v) line += format_scalar(*v);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

inline std::string to_csv(const TraceTable& t) {
  std::string out(trace_header);
  out += '\n';
  for (const TraceRow& r : t.rows) {
    std::string line = std::to_string(r.k);
    detail::put(line, r.f);
    detail::put(line, r.rel_gap);
    detail::put(line, r.grad_norm);
    detail::put(line, r.eta);
    detail::put(line, r.alpha_hat);
    detail::put(line, r.q_hat);
    detail::put(line, r.m_hat);
    detail::put(line, r.cos_theta);
    detail::put(line, r.C_k);
    detail::put(line, r.psi_bar);
    detail::put(line, r.psi_tilde);
    detail::put(line, r.bound_thm1);
    detail::put(line, r.bound_thm2);
    out += line;
    out += '\n';
  }
  return out;
}

inline void emit_csv(const TraceTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("cannot open '" + path.string() + "' for writing");
  const std::string text = to_csv(t);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw CsvError("write failed for '" + path.string() + "'");
}

inline TraceTable parse_csv(std::string_view text) {
  TraceTable t;
  std::size_t pos = 0;
  int lineno = 0;
  bool header = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (header) {
      if (line != trace_header) throw CsvError("trace header does not match the expected schema");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 14) throw CsvError("trace line " + std::to_string(lineno) + ": expected 14 fields");
    auto req = [&](std::string_view s) {
      if (s.empty()) throw CsvError("trace line " + std::to_string(lineno) + ": missing required field");
      return parse_scalar(s, "trace");
    };
    auto opt = [&](std::string_view s) -> std::optional<Scalar> {
      if (s.empty()) return std::nullopt;
      return parse_scalar(s, "trace");
    };
    TraceRow r;
    try {
      r.k = parse_int(f[0], "k");
      r.f = req(f[1]);
      r.rel_gap = req(f[2]);
      r.grad_norm = req(f[3]);
      r.eta = opt(f[4]);
      r.alpha_hat = opt(f[5]);
      r.q_hat = opt(f[6]);
      r.m_hat = opt(f[7]);
      r.cos_theta = opt(f[8]);
      r.C_k = opt(f[9]);
      r.psi_bar = opt(f[10]);
      r.psi_tilde = opt(f[11]);
      r.bound_thm1 = opt(f[12]);
      r.bound_thm2 = opt(f[13]);
    } catch (const ConfigError& e) {
      throw CsvError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!t.rows.empty() && r.k != t.rows.back().k + 1)
      throw CsvError("trace line " + std::to_string(lineno) + ": k must increase by one");
    if (t.rows.empty() && r.k != 0) throw CsvError("trace must start at k = 0");
    t.rows.push_back(r);
  }
  if (header) throw CsvError("trace is empty");
  return t;
}

inline TraceTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open trace '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

/// File stem for a run: "bfgs_LI", "broyden-0.5_muI", "gd".
inline std::string run_stem(const std::string& method, const std::string& b0) {
  std::string m = method;
  for (char& ch : m)
    if (ch == ':') ch = '-';
  if (b0 == "-") return m;
  std::string b = std::filesystem::path(b0).stem().string();
  return m + "_" + b;
}

/// Inverse of run_stem for the built-in policies.
inline std::pair<std::string, std::string> parse_run_stem(const std::string& stem) {
  const auto us = stem.rfind('_');
  std::string m = us == std::string::npos ? stem : stem.substr(0, us);
  std::string b = us == std::string::npos ? "-" : stem.substr(us + 1);
  if (m.rfind("broyden-", 0) == 0) m[7] = ':';
  return {m, b};
}

inline std::string report_to_csv(const BoundReport& r) {
  std::string out = "check,k_begin,k_end,margin,slack,pass\n";
  for (const CheckRecord& c : r.records) {
    out += c.name + ',' + std::to_string(c.k_begin) + ',' + std::to_string(c.k_end) + ',' + format_scalar(c.margin) +
           ',' + format_scalar(c.slack) + ',' + (c.pass ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace qnlab::harness

#endif  // QNLAB_HARNESS_CSV_HPP
