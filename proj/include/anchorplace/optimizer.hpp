#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anchorplace/convex_solver.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

enum class InitStrategy { circle_centroid, from_config, random };

struct InitOptions {
  InitStrategy strategy = InitStrategy::circle_centroid;
  std::uint64_t seed = 0;  // random only
  double radius = 10.0;    // circle_centroid, m
  double margin = 10.0;    // random: padding around the prior's horizontal bounding box, m
};

/// Probability-weighted horizontal centroid of the prior locations.
Vec2 weighted_centroid(const TargetPrior& prior);

/// Horizontal starting positions for the chosen strategy.
std::vector<Vec2> initial_positions(const Scenario& s, const InitOptions& init);

/// Starting point with tight auxiliaries b = |a|^6, s = |a|^8.
SurrogatePoint initialize(const Scenario& s, const ProblemData& p, const InitOptions& init);

struct RunOptions {
  double rel_tol = 1e-7;
  int max_iters = 200;
  bool retighten = true;  // reset b, s to |a|^6, |a|^8 after each subproblem
  SolverOptions solver;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;   // tr(B_hat^-1) at the subproblem solution (iteration 0: at the start)
  double true_pcrb = 0.0;   // tr(B^-1) with tight auxiliaries at the new positions
  double max_constraint_slack = 0.0;  // relative slack of the subproblem auxiliaries
  double kkt_residual = 0.0;
  SubproblemDiagnostics subproblem;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  SurrogatePoint final_point;
  bool converged = false;
  std::string stop_reason;
  std::string error;  // set when a subproblem failed; records hold the partial trace

  double final_pcrb() const { return records.empty() ? 0.0 : records.back().true_pcrb; }
};

/// Iterative inner approximation from `init`; stops when the relative decrement of the
/// true objective is at most rel_tol, when no strict decrease is achieved, or at max_iters.
IterationTrace run(const ProblemData& p, const SurrogatePoint& init, const RunOptions& options = {});

/// Horizontal positions from a(m, 0); throws NumericalError if another k disagrees by more than tol.
std::vector<Vec2> recover_locations(const ProblemData& p, const SurrogatePoint& point, double tol = 1e-8);
std::vector<Vec2> recover_locations(const ProblemData& p, const IterationTrace& trace, double tol = 1e-8);

struct KktReport {
  std::vector<double> stationarity;  // per anchor, norm of the Lagrangian gradient in scaled positions
  double max_stationarity = 0.0;
  Grid<double> lambda;  // multipliers of |a|^2 <= b^(1/3)
  Grid<double> eta;     // multipliers of |a|^2 <= s^(1/4)
};

/// Stationarity of the Lagrangian at a tight point, with the multipliers recovered from
/// stationarity in b and s: lambda = 3 p v (a^T B^-2 a) b^(-4/3), eta = 4 p w (a^T B^-2 a) s^(-5/4).
KktReport kkt_residual(const ProblemData& p, const SurrogatePoint& point);

struct MultiStartOptions {
  int starts = 4;  // circle_centroid plus (starts - 1) random starts seeded seed+1, seed+2, ...
  std::uint64_t seed = 0;
  RunOptions run;
  std::vector<std::vector<Vec2>> extra_starts;  // appended after the generated ones
  Execution exec = Execution::parallel;
};

struct MultiStartResult {
  std::vector<IterationTrace> runs;
  std::vector<std::string> labels;
  std::size_t best = 0;
  bool any_converged = false;

  const IterationTrace& best_run() const { return runs.at(best); }
};

/// Best-final-PCRB selection over independent runs; converged runs are preferred.
MultiStartResult optimize(const Scenario& s, const ProblemData& p, const MultiStartOptions& options = {});

}  // namespace anchorplace
