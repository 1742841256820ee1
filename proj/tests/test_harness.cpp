#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qnlab/harness/cli.hpp"

using namespace qnlab;
using namespace qnlab::harness;
namespace fs = std::filesystem;

namespace {

// Small hard cubic that converges in a few dozen iterations.
ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.dim = 8;
  cfg.kappa = 50;
  cfg.stop.max_iters = 120;
  cfg.gd_max_iters = 400;
  return cfg;
}

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / (std::string("qnlab_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

TraceTable geometric_table(const std::vector<Scalar>& ratios) {
  TraceTable t;
  t.method = "bfgs";
  t.b0 = "LI";
  Scalar gap = 1;
  for (std::size_t i = 0; i <= ratios.size(); ++i) {
    TraceRow r;
    r.k = static_cast<int>(i);
    r.rel_gap = gap;
    r.f = gap;
    t.rows.push_back(r);
    if (i < ratios.size()) gap *= ratios[i];
  }
  return t;
}

}  // namespace

TEST(Config, ParsesCommentsQuotesAndLists) {
  const auto cfg = parse_config(
      "# experiment\n"
      "objective = quadratic\n"
      "dim = 12   # bare alias\n"
      "objective.kappa = 1e2\n"
      "method = bfgs, dfp ,broyden:0.25, gd\n"
      "b0 = \"muI\"\n"
      "stop.fgap_tol = 1e-14\n"
      "diagnostics.scheme = hess*\n"
      "sweep.kappas = 10,1e3\n");
  EXPECT_EQ(cfg.objective, ObjectiveKind::quadratic);
  EXPECT_EQ(cfg.dim, 12);
  EXPECT_EQ(cfg.kappa, 100);
  ASSERT_EQ(cfg.methods.size(), 4u);
  EXPECT_EQ(cfg.methods[2].name(), "broyden:0.25");
  EXPECT_EQ(cfg.b0, std::vector<std::string>{"muI"});
  EXPECT_EQ(cfg.stop.fgap_tol, Scalar(1e-14L));
  EXPECT_EQ(cfg.scheme, WeightKind::minimizer_hessian);
  EXPECT_EQ(cfg.sweep_kappas, (std::vector<Scalar>{10, 1000}));
}

TEST(Config, DefaultsMatchTheReferenceRun) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.dim, 40);
  EXPECT_EQ(cfg.kappa, 1000);
  EXPECT_EQ(cfg.ls.dd_rel_tol, Scalar(1e-10));
  EXPECT_EQ(cfg.stop.max_iters, 300);
  EXPECT_EQ(cfg.x0_seed, 0u);
  EXPECT_EQ(cfg.b0, (std::vector<std::string>{"LI", "muI"}));
}

TEST(Config, TextRoundTripIsExact) {
  ExperimentConfig cfg = small_config();
  cfg.lambda = Scalar(1) / 3;
  cfg.methods = {Method::bfgs(), Method::broyden(Scalar(0.5)), Method::gradient_descent()};
  cfg.sweep_dims = {6, 9};
  cfg.sweep_kappas = {10, 1e3};
  cfg.scheme = WeightKind::minimizer_hessian;
  const std::string text = to_config_text(cfg);
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(to_config_text(back), text);
  EXPECT_EQ(*back.lambda, *cfg.lambda);
  EXPECT_EQ(back.methods[1].phi, Scalar(0.5));
}

TEST(Config, ErrorsAreConfigErrors) {
  EXPECT_THROW(parse_config("dim = 4\ndim = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("objective.dimension = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("kappa = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("just a line\n"), ConfigError);
  EXPECT_THROW(parse_config("method = newton\n"), ConfigError);
  EXPECT_THROW(parse_config("method = broyden:1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("diagnostics.scheme = P\n"), ConfigError);
  EXPECT_THROW(parse_config("sweep.preset = fig3\n"), ConfigError);
  EXPECT_THROW(parse_config("retain_matrices = maybe\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/qnlab.cfg"), ConfigError);

  ExperimentConfig cfg;
  cfg.dim = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.kappa = Scalar(0.5);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.b0.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, OverridesApplyAfterTheFile) {
  ExperimentConfig cfg = parse_config("dim = 4\n");
  apply_override(cfg, "dim=9");
  apply_override(cfg, " x0.seed = 7 ");
  EXPECT_EQ(cfg.dim, 9);
  EXPECT_EQ(cfg.x0_seed, 7u);
  EXPECT_THROW(apply_override(cfg, "dim"), ConfigError);
}

TEST(Config, CustomB0FromMatrixFile) {
  const fs::path dir = scratch_dir();
  spit(dir / "b0.txt", "# diagonal\n2 0\n0 3\n");
  ExperimentConfig cfg = parse_config("b0 = b0.txt\n", dir);
  const B0Policy p = resolve_b0(cfg, "b0.txt");
  EXPECT_EQ(p.name(), "b0.txt");
  spit(dir / "bad.txt", "1 2\n3\n");
  EXPECT_THROW(resolve_b0(cfg, "bad.txt"), ConfigError);
  EXPECT_THROW(resolve_b0(cfg, "missing.txt"), ConfigError);
}

TEST(Csv, HeaderAndRowLayout) {
  TraceTable t = geometric_table({Scalar(0.5)});
  t.rows[0].eta = Scalar(0.25);
  const std::string text = to_csv(t);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "k,f,rel_gap,grad_norm,eta,alpha_hat,q_hat,m_hat,cos_theta,C_k,psi_bar,psi_tilde,bound_thm1,bound_thm2");
  EXPECT_NE(text.find("\n0,1,1,0,0.25,,,,,,,,,\n"), std::string::npos);
  EXPECT_NE(text.find("\n1,0.5,0.5,0,,,,,,,,,,\n"), std::string::npos);
}

TEST(Csv, RoundTripIsBitExact) {
  TraceTable t;
  for (int k = 0; k < 4; ++k) {
    TraceRow r;
    r.k = k;
    r.f = Scalar(1) / (3 + k);
    r.rel_gap = std::exp(-Scalar(k) * Scalar(7.1));
    r.grad_norm = std::sqrt(Scalar(2 + k));
    if (k < 3) {
      r.eta = Scalar(0.1) * k;
      r.cos_theta = -Scalar(1) / 7;
      r.psi_bar = std::numeric_limits<Scalar>::denorm_min();
    }
    r.bound_thm2 = std::numeric_limits<Scalar>::max();
    t.rows.push_back(r);
  }
  const TraceTable back = parse_csv(to_csv(t));
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) EXPECT_EQ(back.rows[i], t.rows[i]) << "row " << i;
  EXPECT_EQ(to_csv(back), to_csv(t));
}

TEST(Csv, MalformedTracesAreRejected) {
  const std::string h(trace_header);
  EXPECT_THROW(parse_csv(""), CsvError);
  EXPECT_THROW(parse_csv("k,f\n0,1\n"), CsvError);
  EXPECT_THROW(parse_csv(h + "\n0,1,1\n"), CsvError);
  EXPECT_THROW(parse_csv(h + "\n1,1,1,1,,,,,,,,,,\n"), CsvError);
  EXPECT_THROW(parse_csv(h + "\n0,1,1,1,,,,,,,,,,\n2,1,1,1,,,,,,,,,,\n"), CsvError);
  EXPECT_THROW(parse_csv(h + "\n0,,1,1,,,,,,,,,,\n"), CsvError);
  EXPECT_THROW(parse_csv(h + "\n0,abc,1,1,,,,,,,,,,\n"), CsvError);
  EXPECT_THROW(read_csv("/nonexistent/trace.csv"), CsvError);
  EXPECT_EQ(parse_csv(h + "\n").rows.size(), 0u);
}

TEST(Csv, RunStemsRoundTrip) {
  EXPECT_EQ(run_stem("bfgs", "LI"), "bfgs_LI");
  EXPECT_EQ(run_stem("broyden:0.5", "muI"), "broyden-0.5_muI");
  EXPECT_EQ(run_stem("gd", "-"), "gd");
  EXPECT_EQ(run_stem("dfp", "mats/warm.txt"), "dfp_warm");
  EXPECT_EQ(parse_run_stem("broyden-0.5_muI"), (std::pair<std::string, std::string>{"broyden:0.5", "muI"}));
  EXPECT_EQ(parse_run_stem("gd"), (std::pair<std::string, std::string>{"gd", "-"}));
  EXPECT_EQ(parse_run_stem("bfgs_LI"), (std::pair<std::string, std::string>{"bfgs", "LI"}));
}

TEST(Svg, OnePolylinePerTableAndDecadeTicks) {
  TraceTable a = geometric_table({Scalar(0.1), Scalar(0.1), Scalar(0.1)});
  a.rows.back().rel_gap = Scalar(1e-3);
  TraceTable b = geometric_table({Scalar(0.5), Scalar(0.5)});
  b.b0 = "muI";
  EXPECT_EQ(decade_range({a, b}), (std::pair<int, int>{-3, 0}));
  const std::string svg = render_svg({a, b});
  EXPECT_EQ(count(svg, "class=\"trace\""), 2u);
  EXPECT_EQ(count(svg, "class=\"bound\""), 0u);
  EXPECT_EQ(count(svg, "class=\"ytick\""), 4u);
  EXPECT_NE(svg.find(">bfgs B0=LI<"), std::string::npos);
  EXPECT_NE(svg.find(">bfgs B0=muI<"), std::string::npos);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(Svg, BoundsDrawnAboveTheTrace) {
  TraceTable a = geometric_table({Scalar(0.1), Scalar(0.1)});
  for (auto& r : a.rows) r.bound_thm1 = 10 * r.rel_gap;
  PlotStyle style;
  style.show_bounds = true;
  style.title = "a < b";
  const std::string svg = render_svg({a}, style);
  EXPECT_EQ(count(svg, "class=\"bound\""), 1u);
  EXPECT_NE(svg.find("a &lt; b"), std::string::npos);
  // Smaller screen y means higher on the plot; compare the k = 1 vertices.
  auto second_y = [&](const std::string& cls) {
    const auto at = svg.find("points=\"", svg.find("class=\"" + cls + "\"")) + 8;
    const auto sp = svg.find(' ', at);
    const auto comma = svg.find(',', sp);
    return std::stod(svg.substr(comma + 1));
  };
  EXPECT_LT(second_y("bound"), second_y("trace"));
}

TEST(Svg, EmptyInputsAreErrors) {
  EXPECT_THROW(render_svg({}), PlotError);
  TraceTable empty;
  empty.method = "bfgs";
  empty.b0 = "LI";
  EXPECT_THROW(render_svg({empty}), PlotError);
}

TEST(Experiment, ProducesOneTablePerRun) {
  const ExperimentResult res = run_experiment(small_config());
  ASSERT_EQ(res.runs.size(), 3u);
  EXPECT_NE(res.find("bfgs", "LI"), nullptr);
  EXPECT_NE(res.find("bfgs", "muI"), nullptr);
  EXPECT_NE(res.find("gd", "-"), nullptr);
  for (const auto& r : res.runs) {
    EXPECT_EQ(r.table.rows.size(), static_cast<std::size_t>(r.trajectory.iterations() + 1)) << r.id();
    EXPECT_EQ(r.table.rows.front().rel_gap, 1) << r.id();
    for (std::size_t i = 1; i < r.table.rows.size(); ++i)
      EXPECT_LE(r.table.rows[i].rel_gap, r.table.rows[i - 1].rel_gap) << r.id() << " k=" << i;
    EXPECT_FALSE(r.table.rows.back().eta.has_value());
  }
  const auto& bfgs = res.find("bfgs", "LI")->table;
  EXPECT_TRUE(bfgs.rows.front().psi_bar.has_value());
  EXPECT_FALSE(bfgs.rows.front().bound_thm1.has_value());
  EXPECT_TRUE(bfgs.rows[1].bound_thm1.has_value());
  EXPECT_FALSE(res.find("gd", "-")->table.rows.front().psi_bar.has_value());
  EXPECT_EQ(res.find("bfgs", "LI")->trajectory.termination, Termination::fgap);
}

TEST(Experiment, ZeroIterationCapGivesSingleRowTables) {
  ExperimentConfig cfg = small_config();
  cfg.stop.max_iters = 0;
  cfg.gd_max_iters = 0;
  for (const auto& r : run_experiment(cfg).runs) {
    ASSERT_EQ(r.table.rows.size(), 1u) << r.id();
    EXPECT_EQ(r.table.rows[0].k, 0);
    EXPECT_FALSE(r.table.rows[0].eta.has_value());
  }
}

TEST(Experiment, WeightSchemeOnlyChangesWeightedColumns) {
  ExperimentConfig cfg = small_config();
  const ExperimentResult li = run_experiment(cfg);
  cfg.scheme = WeightKind::minimizer_hessian;
  const ExperimentResult hs = run_experiment(cfg);
  ASSERT_EQ(li.runs.size(), hs.runs.size());
  bool weighted_differs = false;
  for (std::size_t i = 0; i < li.runs.size(); ++i) {
    const auto& a = li.runs[i].table.rows;
    const auto& b = hs.runs[i].table.rows;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].f, b[k].f);
      EXPECT_EQ(a[k].rel_gap, b[k].rel_gap);
      EXPECT_EQ(a[k].eta, b[k].eta);
      EXPECT_EQ(a[k].psi_bar, b[k].psi_bar);
      if (a[k].q_hat && b[k].q_hat && *a[k].q_hat != *b[k].q_hat) weighted_differs = true;
    }
  }
  EXPECT_TRUE(weighted_differs);
}

TEST(Experiment, RepeatedRunsWriteIdenticalFiles) {
  const fs::path dir = scratch_dir();
  const ExperimentConfig cfg = small_config();
  write_experiment(run_experiment(cfg), dir / "a");
  write_experiment(run_experiment(cfg), dir / "b");
  for (const char* name : {"bfgs_LI.csv", "bfgs_muI.csv", "gd.csv", "config.cfg", "convergence.svg"}) {
    const std::string a = slurp(dir / "a" / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, slurp(dir / "b" / name)) << name;
  }
  EXPECT_EQ(to_config_text(load_config(dir / "a" / "config.cfg")), slurp(dir / "a" / "config.cfg"));
}

TEST(Experiment, FreshRunsVerify) {
  const ExperimentResult res = run_experiment(small_config());
  for (const auto& r : res.runs) {
    const BoundReport rep = verify_run(res.ctx, r.trajectory);
    EXPECT_TRUE(rep.passed()) << r.id() << " first failure at " << rep.first_failure_iteration().value_or(-1);
  }
}

TEST(Experiment, StoredTraceVerifiesAndCorruptionIsLocated) {
  const ExperimentResult res = run_experiment(small_config());
  const auto& run = *res.find("bfgs", "muI");
  const TraceTable stored = parse_csv(to_csv(run.table));
  EXPECT_TRUE(verify_trace(res.ctx, stored, "bfgs", "muI").passed());

  TraceTable bad = stored;
  *bad.rows[4].eta *= 2;
  const BoundReport rep = verify_trace(res.ctx, bad, "bfgs", "muI");
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.first_failure_iteration(), 4);

  TraceTable shifted = stored;
  shifted.rows[2].f *= 1 + Scalar(1e-6);
  EXPECT_EQ(verify_trace(res.ctx, shifted, "bfgs", "muI").first_failure_iteration(), 2);
}

TEST(Sweep, OnsetDetectorOnSyntheticGaps) {
  // kappa = 1 gives the limit 1/3: eight slow ratios, then fast ones.
  std::vector<Scalar> ratios(8, Scalar(0.9));
  ratios.insert(ratios.end(), 6, Scalar(0.1));
  const TraceTable t = geometric_table(ratios);
  EXPECT_EQ(superlinear_onset(t, 1), 8);
  EXPECT_EQ(first_reaching(t, Scalar(1e-4)), 12);
  EXPECT_EQ(first_reaching(t, Scalar(1e-9)), std::nullopt);
  EXPECT_EQ(first_reaching(t, Scalar(0.5)), 7);

  std::vector<Scalar> brief(8, Scalar(0.9));
  brief.insert(brief.end(), 4, Scalar(0.1));
  brief.push_back(Scalar(0.9));
  brief.insert(brief.end(), 5, Scalar(0.2));
  EXPECT_EQ(superlinear_onset(geometric_table(brief), 1), 13);
  EXPECT_EQ(superlinear_onset(geometric_table(std::vector<Scalar>(20, Scalar(0.49))), 10), std::nullopt);
}

TEST(Sweep, GridResolution) {
  ExperimentConfig cfg;
  EXPECT_THROW(sweep_grid(cfg), ConfigError);
  cfg.sweep_preset = "dims";
  EXPECT_EQ(sweep_grid(cfg).dims, (std::vector<Index>{40, 400}));
  cfg.sweep_preset = "kappas";
  EXPECT_EQ(sweep_grid(cfg).kappas, (std::vector<Scalar>{10, 100, 1000}));
  cfg.sweep_dims = {7};
  EXPECT_EQ(sweep_grid(cfg).dims, (std::vector<Index>{7}));
  cfg.sweep_preset.clear();
  cfg.sweep_kappas.clear();
  EXPECT_THROW(sweep_grid(cfg), ConfigError);
}

TEST(Sweep, SmallGridCompletesAndSummarizes) {
  ExperimentConfig cfg = small_config();
  cfg.sweep_dims = {6};
  cfg.sweep_kappas = {10, 100};
  cfg.sweep_threads = 2;
  cfg.sweep_max_iters = 150;
  cfg.sweep_gd_max_iters = 600;
  const SweepResult res = sweep(cfg);
  ASSERT_EQ(res.cells.size(), 2u);
  for (const auto& c : res.cells) {
    EXPECT_TRUE(c.error.empty()) << c.error;
    ASSERT_EQ(c.summary.size(), 3u);
    const RunSummary* li = c.find("bfgs", "LI");
    ASSERT_NE(li, nullptr);
    EXPECT_TRUE(li->verified.value_or(false)) << c.id();
    EXPECT_TRUE(li->reached[2].has_value()) << c.id();
    EXPECT_FALSE(c.find("gd", "-")->verified.has_value());
  }
  EXPECT_EQ(res.find(6, 100)->dim, 6);
  const std::string summary = sweep_summary_csv(res);
  EXPECT_EQ(count(summary, "\n"), 7u);

  const fs::path dir = scratch_dir();
  write_sweep(res, cfg, dir);
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "metadata.txt"));
  EXPECT_TRUE(fs::exists(dir / "d6_kappa10" / "bfgs_LI.csv"));
  EXPECT_TRUE(fs::exists(dir / "d6_kappa100" / "convergence.svg"));
}

TEST(Cli, RunVerifyAndPlot) {
  const fs::path dir = scratch_dir();
  spit(dir / "exp.cfg", to_config_text(small_config()));
  std::string out, err;
  ASSERT_EQ(cli({"run", "--config", (dir / "exp.cfg").string(), "--out", (dir / "run").string()}, &out, &err), 0) << err;
  EXPECT_NE(out.find("bfgs_LI:"), std::string::npos);
  ASSERT_TRUE(fs::exists(dir / "run" / "bfgs_muI.csv"));

  const std::string cfg = (dir / "run" / "config.cfg").string();
  EXPECT_EQ(cli({"verify", "--config", cfg, "--trace", (dir / "run" / "bfgs_muI.csv").string()}, &out, &err), 0) << err << out;
  EXPECT_NE(out.find("verdict: PASS"), std::string::npos);

  TraceTable t = read_csv(dir / "run" / "bfgs_muI.csv");
  *t.rows[3].eta *= 2;
  emit_csv(t, dir / "bfgs_muI.csv");
  EXPECT_EQ(cli({"verify", "--config", cfg, "--trace", (dir / "bfgs_muI.csv").string(), "--out", (dir / "rep").string()},
                &out, &err),
            2);
  EXPECT_NE(out.find("first failing iteration 3"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(dir / "rep" / "verify_bfgs_muI.csv"));

  EXPECT_EQ(cli({"verify", "--config", cfg}, &out, &err), 0) << out;

  EXPECT_EQ(cli({"plot", (dir / "run" / "bfgs_LI.csv").string(), (dir / "run" / "gd.csv").string(), "--out",
                 (dir / "plot").string(), "--bounds"},
                &out, &err),
            0)
      << err;
  const std::string svg = slurp(dir / "plot" / "convergence.svg");
  EXPECT_EQ(count(svg, "class=\"trace\""), 2u);
  EXPECT_GE(count(svg, "class=\"bound\""), 1u);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir();
  std::string out, err;
  EXPECT_EQ(cli({"frobnicate"}, &out, &err), 3);
  EXPECT_EQ(cli({}, &out, &err), 3);
  EXPECT_EQ(cli({"--help"}, &out, &err), 0);
  EXPECT_NE(out.find("verify"), std::string::npos);
  spit(dir / "bad.cfg", "objective.dimension = 3\n");
  EXPECT_EQ(cli({"run", "--config", (dir / "bad.cfg").string()}, &out, &err), 3);
  EXPECT_NE(err.find("unknown config key"), std::string::npos);
  EXPECT_EQ(cli({"run", "--config", (dir / "missing.cfg").string()}, &out, &err), 3);
  EXPECT_EQ(cli({"run", "--set", "dim=-2"}, &out, &err), 3);
  EXPECT_EQ(cli({"sweep", "--set", "sweep.threads=1"}, &out, &err), 3);
  EXPECT_EQ(cli({"verify", "--trace", (dir / "none.csv").string()}, &out, &err), 3);
  spit(dir / "junk.csv", "not,a,trace\n");
  EXPECT_EQ(cli({"plot", (dir / "junk.csv").string(), "--out", dir.string()}, &out, &err), 3);

  // A one-step line-search budget cannot bracket the first step.
  EXPECT_EQ(cli({"run", "--out", (dir / "r").string(), "--set", "dim=6", "--set", "ls.max_refinements=1", "--set",
                 "ls.tol=1e-14"},
                &out, &err),
            1)
      << err;
}
