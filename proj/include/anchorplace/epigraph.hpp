#pragma once

#include "anchorplace/convex_solver.hpp"

namespace anchorplace {

struct EpigraphSolution {
  SubproblemVars vars;
  Mat3 T = Mat3::Zero();
  double trace_T = 0.0;
  double objective = 0.0;  // tr(B_hat(vars)^-1)
  bool converged = false;
  SubproblemDiagnostics diagnostics;
};

/// Reference solve of a subproblem in epigraph form: minimize tr(T) subject to
/// [B_hat, I; I, T] >= 0 and the power constraints, with T carried as six
/// explicit variables and a log-det barrier on the 6x6 block matrix.
EpigraphSolution solve_subproblem_epigraph(const SubproblemSpec& spec, const SolverOptions& options = {});

}  // namespace anchorplace
