// Runs BFGS with both identity initializations on the hard cubic and prints
// the measured gap next to the certified rate bounds.
#include <cstdio>

#include "qnlab/broyden.hpp"
#include "qnlab/diagnostics.hpp"
#include "qnlab/objectives.hpp"

int main() {
  using namespace qnlab;
  const Index d = 40;
  const ObjectiveModel obj = make_hard_cubic_for_kappa(d, 1e3);
  const ReferenceSolution ref = reference_solution(obj);
  const SmoothnessConstants& c = obj.constants();
  std::printf("mu = %.4Lg  L = %.4Lg  M = %.4Lg (%s)  kappa = %.4Lg\n", c.mu, c.L, c.M, to_string(c.M_provenance),
              c.kappa);

  const Vector x0 = random_start(d, 0);
  StoppingRule stop;
  stop.fgap_tol = 1e-16;
  stop.max_iters = 300;
  stop.x_star = ref.x_star;

  for (const B0Policy& policy : {B0Policy::L(), B0Policy::mu()}) {
    const Trajectory traj = run(obj, x0, b0_from_policy(policy, c, d), Method::bfgs(), stop);
    const TrajectoryAnalysis an = analyze_trajectory({obj, ref, c}, traj);
    std::printf("\nB0 = %s: %d iterations (%s)\n", policy.name().c_str(), traj.iterations(),
                to_string(traj.termination));
    std::printf("%5s %14s %14s %14s\n", "k", "rel_gap", "linear bound", "superlinear");
    for (const IterateAnalysis& row : an.rows) {
      if (row.k % 10 != 0 || !row.bound_thm1) continue;
      std::printf("%5d %14.4Le %14.4Le %14.4Le\n", row.k, row.rel_gap, *row.bound_thm1, *row.bound_thm2);
    }
    const BoundReport report = validate_trajectory(obj, traj, ref, c);
    std::printf("certified: %s (%zu checks, min margin %.3Le)\n", report.passed() ? "yes" : "no",
                report.records.size(), report.min_margin());
  }
  return 0;
}
