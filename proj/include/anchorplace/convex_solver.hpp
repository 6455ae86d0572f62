#pragma once

#include <vector>

#include "anchorplace/common.hpp"
#include "anchorplace/pcrb.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

/// Fixed data of the placement problem: prior geometry, anchor heights, the
/// information constants and the prior information matrix.
struct ProblemData {
  std::vector<Vec3> locations;
  std::vector<double> probs;
  std::vector<double> heights;
  double w = 0.0;
  std::vector<double> v;
  Mat3 f_prior = Mat3::Zero();
  double scale = 1.0;  // nondimensionalization length (m)

  static ProblemData from(const Scenario& s, const FimMatrix& f_prior);
  static ProblemData from(const Scenario& s) { return from(s, default_prior_fim(s.prior)); }

  std::size_t anchors() const { return heights.size(); }
  std::size_t locations_count() const { return locations.size(); }
  Vec3 offset(std::size_t m, std::size_t k, const Vec2& xy) const {
    return {xy.x() - locations[k].x(), xy.y() - locations[k].y(), heights[m] - locations[k].z()};
  }
};

/// Linearization state (a, b, s) of one inner-approximation step.
struct SurrogatePoint {
  Grid<Vec3> a;      // m
  Grid<double> b;    // m^6
  Grid<double> s;    // m^8

  /// a from the horizontal positions, b = |a|^6, s = |a|^8.
  static SurrogatePoint tight(const ProblemData& p, const std::vector<Vec2>& xy);

  /// Horizontal positions implied by a(m, 0).
  std::vector<Vec2> xy(const ProblemData& p) const;

  /// b >= |a|^6 and s >= |a|^8 within rel_tol, all strictly positive.
  bool is_feasible(double rel_tol = 1e-9) const;
};

/// Free variables of a subproblem (and of the relaxed problem it approximates).
struct SubproblemVars {
  std::vector<Vec2> xy;
  Grid<double> b;
  Grid<double> s;

  static SubproblemVars from(const ProblemData& p, const SurrogatePoint& point);
};

struct SubproblemSpec {
  ProblemData problem;
  SurrogatePoint linearization;
};

/// Affine inner approximation of the information matrix around the linearization:
/// sum_k p_k sum_m [v_m M(a,b|a0,b0) + w M(a,s|a0,s0)] + F_P with
/// M(a,b|a0,b0) = (a a0^T + a0 a^T)/b0 - b a0 a0^T / b0^2.
Mat3 surrogate_matrix(const SubproblemVars& vars, const SubproblemSpec& spec);

/// Information matrix with free auxiliaries: sum p_k (w a a^T / s + v_m a a^T / b) + F_P.
Mat3 relaxed_matrix(const ProblemData& p, const SubproblemVars& vars);

/// Information matrix with tight auxiliaries (the PCRB objective's matrix).
Mat3 true_matrix(const ProblemData& p, const std::vector<Vec2>& xy);

/// tr(.^-1), or +infinity outside the positive definite domain.
double surrogate_objective(const SubproblemVars& vars, const SubproblemSpec& spec);
double relaxed_objective(const ProblemData& p, const SubproblemVars& vars);
double true_objective(const ProblemData& p, const std::vector<Vec2>& xy);

struct VarsGradient {
  std::vector<Vec2> xy;
  Grid<double> b;
  Grid<double> s;
};

/// Exact gradient of tr(B_hat(x)^-1) over (xy, b, s), using d tr(B^-1) = -tr(B^-1 dB B^-1).
VarsGradient objective_gradient(const SubproblemVars& vars, const SubproblemSpec& spec);
/// Same for the relaxed (non-approximated) objective.
VarsGradient relaxed_gradient(const ProblemData& p, const SubproblemVars& vars);
/// Gradient of the PCRB objective over the horizontal positions only.
std::vector<Vec2> true_gradient(const ProblemData& p, const std::vector<Vec2>& xy);

struct SolverOptions {
  double tol = 1e-8;          // duality-gap target, relative to the starting objective
  double t0 = 1.0;
  double mu = 10.0;
  double newton_tol = 1e-9;   // on lambda^2 / 2
  double ls_alpha = 0.25;
  double ls_beta = 0.5;
  int max_newton_per_stage = 200;
  int max_newton_total = 5000;
  double start_margin = 1e-3;  // relative lift of tight auxiliaries for the first iterate
  bool freeze_auxiliaries = false;  // keep b, s at the linearization values
};

struct SubproblemDiagnostics {
  int newton_iters = 0;
  int barrier_stages = 0;
  double final_gap = 0.0;
};

struct SubproblemSolution {
  SubproblemVars vars;
  double objective = 0.0;  // tr(B_hat^-1) at vars
  bool converged = false;
  SubproblemDiagnostics diagnostics;
  Grid<double> dual_b;  // multipliers of |a|^2 - b^(1/3) <= 0
  Grid<double> dual_s;  // multipliers of |a|^2 - s^(1/4) <= 0
};

/// Minimizes tr(B_hat(x)^-1) subject to b^(1/3) >= |a|^2, s^(1/4) >= |a|^2 with a
/// log-barrier path-following method and damped Newton steps on nondimensional
/// variables. Throws NumericalError when the linearization is infeasible.
SubproblemSolution solve_subproblem(const SubproblemSpec& spec, const SolverOptions& options = {});

}  // namespace anchorplace
