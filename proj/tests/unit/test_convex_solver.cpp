#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "anchorplace/convex_solver.hpp"
#include "anchorplace/epigraph.hpp"
#include "anchorplace/optimizer.hpp"
#include "support.hpp"

using namespace anchorplace;

namespace {

ProblemData paper_problem() { return ProblemData::from(testing_support::paper_scenario()); }

// One rank-one term: a single anchor and location with v = 1, w = 0, no prior.
SubproblemSpec single_term(const Vec3& a0, double b0) {
  ProblemData p;
  p.locations = {{0, 0, 0}};
  p.probs = {1.0};
  p.heights = {a0.z()};
  p.w = 0.0;
  p.v = {1.0};
  SurrogatePoint lin{Grid<Vec3>(1, 1, a0), Grid<double>(1, 1, b0), Grid<double>(1, 1, std::pow(a0.squaredNorm(), 4))};
  return {p, lin};
}

SubproblemVars single_vars(const Vec3& a, double b) {
  return {{Vec2(a.x(), a.y())}, Grid<double>(1, 1, b), Grid<double>(1, 1, std::pow(a.squaredNorm(), 4))};
}

// Random point near a random tight linearization, feasible and inside the surrogate's domain.
struct Draw {
  SubproblemSpec spec;
  SubproblemVars vars;
};

Draw random_draw(const ProblemData& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), d(-2.0, 2.0);
  while (true) {
    SubproblemSpec spec{p, SurrogatePoint::tight(p, testing_support::random_xy(rng, p.anchors()))};
    SubproblemVars v = SubproblemVars::from(p, spec.linearization);
    for (auto& xy : v.xy) xy += Vec2(d(rng), d(rng));
    for (std::size_t m = 0; m < p.anchors(); ++m) {
      for (std::size_t k = 0; k < p.locations_count(); ++k) {
        const double rho = p.offset(m, k, v.xy[m]).squaredNorm();
        v.b(m, k) = std::pow(rho, 3) * (1.0 + 0.5 * u(rng));
        v.s(m, k) = std::pow(rho, 4) * (1.0 + 0.5 * u(rng));
      }
    }
    if (std::isfinite(surrogate_objective(v, spec))) return {spec, v};
  }
}

// Horizontal gradient of the objective when b and s follow |a|^6 and |a|^8.
std::vector<Vec2> reduced_gradient(const ProblemData& p, const SubproblemVars& v, const SubproblemSpec& spec) {
  const VarsGradient g = objective_gradient(v, spec);
  std::vector<Vec2> out;
  for (std::size_t m = 0; m < p.anchors(); ++m) {
    Vec2 r = g.xy[m];
    for (std::size_t k = 0; k < p.locations_count(); ++k) {
      const Vec3 a = p.offset(m, k, v.xy[m]);
      const double rho = a.squaredNorm();
      r += (g.b(m, k) * 6.0 * rho * rho + g.s(m, k) * 8.0 * rho * rho * rho) * a.head<2>();
    }
    out.push_back(r);
  }
  return out;
}

double max_norm(const std::vector<Vec2>& v) {
  double n = 0.0;
  for (const auto& x : v) n = std::max(n, x.norm());
  return n;
}

}  // namespace

TEST(Surrogate, TouchesAtLinearization) {
  const Vec3 a0(3.0, -2.0, 7.0);
  const double b0 = std::pow(a0.squaredNorm(), 3) * 1.3;
  const SubproblemSpec spec = single_term(a0, b0);
  const Mat3 m = surrogate_matrix(single_vars(a0, b0), spec);
  const Mat3 expect = a0 * a0.transpose() / b0;
  EXPECT_LT((m - expect).norm(), 1e-15 * expect.norm());
}

TEST(Surrogate, ZeroLinearizationVanishes) {
  ProblemData p;
  p.locations = {{0, 0, 0}};
  p.probs = {1.0};
  p.heights = {0.0};
  p.w = 1.0;
  p.v = {1.0};
  SurrogatePoint lin{Grid<Vec3>(1, 1, Vec3::Zero()), Grid<double>(1, 1, 1.0), Grid<double>(1, 1, 1.0)};
  const SubproblemVars v{{Vec2(4.0, -1.0)}, Grid<double>(1, 1, 9.0), Grid<double>(1, 1, 2.0)};
  EXPECT_EQ(surrogate_matrix(v, {p, lin}), Mat3::Zero());
}

TEST(Surrogate, RankOneMinorantPsd) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 5.0);
  std::uniform_real_distribution<double> u(0.1, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a0(g(rng), g(rng), g(rng)), a(g(rng), g(rng), a0.z());
    const double b0 = u(rng), b = u(rng);
    const Mat3 diff = a * a.transpose() / b - surrogate_matrix(single_vars(a, b), single_term(a0, b0));
    const double scale = std::max(diff.cwiseAbs().maxCoeff(), a.squaredNorm() / b);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat3>(diff).eigenvalues().minCoeff(), -1e-12 * scale);
  }
}

TEST(Surrogate, UpperBoundsRelaxedAndTrueObjective) {
  const ProblemData p = paper_problem();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    const Draw d = random_draw(p, rng);
    const double sur = surrogate_objective(d.vars, d.spec);
    const double rel = relaxed_objective(p, d.vars);
    EXPECT_GE(sur, rel * (1.0 - 1e-12));
    EXPECT_GE(rel, true_objective(p, d.vars.xy) * (1.0 - 1e-12));
  }
}

TEST(Surrogate, TouchingAndGradientMatchAtTightPoint) {
  const ProblemData p = paper_problem();
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto xy = testing_support::random_xy(rng, 4);
    const SubproblemSpec spec{p, SurrogatePoint::tight(p, xy)};
    const SubproblemVars v = SubproblemVars::from(p, spec.linearization);
    const double f = true_objective(p, xy);
    EXPECT_NEAR(surrogate_objective(v, spec), f, 1e-12 * f);
    const auto gs = objective_gradient(v, spec), gr = relaxed_gradient(p, v);
    for (std::size_t m = 0; m < 4; ++m) {
      EXPECT_LT((gs.xy[m] - gr.xy[m]).norm(), 1e-9 * gr.xy[m].norm() + 1e-20);
      for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(gs.b(m, k), gr.b(m, k), 1e-9 * std::abs(gr.b(m, k)));
        EXPECT_NEAR(gs.s(m, k), gr.s(m, k), 1e-9 * std::abs(gr.s(m, k)));
      }
    }
    const auto red = reduced_gradient(p, v, spec), gt = true_gradient(p, xy);
    for (std::size_t m = 0; m < 4; ++m) EXPECT_LT((red[m] - gt[m]).norm(), 1e-8 * max_norm(gt));
  }
}

template <class F>
double five_point(F&& f, double h) {
  return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h);
}

TEST(Surrogate, GradientMatchesFiniteDifferences) {
  // raise w so the s terms are visible above roundoff
  ProblemData p = paper_problem();
  p.w *= 1e3;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Draw d = random_draw(p, rng);
    const VarsGradient g = objective_gradient(d.vars, d.spec);
    auto f = [&](const SubproblemVars& v) { return surrogate_objective(v, d.spec); };
    const double f0 = f(d.vars);
    // roundoff floor of a difference quotient: a few ulps of f over the step
    const double floor = 100 * std::numeric_limits<double>::epsilon() * f0;
    const double gx_scale = max_norm(g.xy);
    for (std::size_t m = 0; m < 4; ++m) {
      for (int c = 0; c < 2; ++c) {
        const double h = 1e-6;
        SubproblemVars up = d.vars, dn = d.vars;
        up.xy[m][c] += h;
        dn.xy[m][c] -= h;
        const double fd = (f(up) - f(dn)) / (2 * h);
        EXPECT_LE(std::abs(fd - g.xy[m][c]),
                  std::max(1e-5 * std::max(std::abs(g.xy[m][c]), 1e-3 * gx_scale), floor / h));
      }
      for (std::size_t k = 0; k < 4; ++k) {
        auto along_b = [&](double t) {
          SubproblemVars v = d.vars;
          v.b(m, k) += t;
          return f(v);
        };
        auto along_s = [&](double t) {
          SubproblemVars v = d.vars;
          v.s(m, k) += t;
          return f(v);
        };
        const double hb = 1e-3 * d.vars.b(m, k), hs = 1e-3 * d.vars.s(m, k);
        EXPECT_NEAR(five_point(along_b, hb), g.b(m, k), std::max(1e-6 * std::abs(g.b(m, k)), floor / hb));
        EXPECT_NEAR(five_point(along_s, hs), g.s(m, k), std::max(1e-6 * std::abs(g.s(m, k)), floor / hs));
      }
    }
  }
}

TEST(Surrogate, AuxiliaryGradientIsPositive) {
  const ProblemData p = paper_problem();
  std::mt19937_64 rng(2);
  const Draw d = random_draw(p, rng);
  const VarsGradient g = objective_gradient(d.vars, d.spec);
  for (double x : g.b.data()) EXPECT_GT(x, 0.0);
  for (double x : g.s.data()) EXPECT_GT(x, 0.0);
}

TEST(Surrogate, OutsideDomainIsInfinite) {
  const Vec3 a0(3.0, -2.0, 7.0);
  const SubproblemSpec spec = single_term(a0, std::pow(a0.squaredNorm(), 3));
  // opposite direction: the affine term turns negative definite and there is no prior to compensate
  EXPECT_TRUE(std::isinf(surrogate_objective(single_vars(Vec3(-3.0, 2.0, 7.0), 1.0), spec)));
}

TEST(Subproblem, FrozenSingleAnchorMatchesGridSearch) {
  ProblemData p;
  p.locations = {{0, 0, 0}};
  p.probs = {1.0};
  p.heights = {5.0};
  const Vec3 a0(3.0, 1.0, 5.0);
  const double rho = a0.squaredNorm();
  const double b0 = std::pow(1.5 * rho, 3), s0 = std::pow(1.5 * rho, 4);
  p.v = {b0 / rho};
  p.w = 0.5 * s0 / rho;
  p.f_prior = 0.3 * Mat3::Identity();
  const SubproblemSpec spec{p, {Grid<Vec3>(1, 1, a0), Grid<double>(1, 1, b0), Grid<double>(1, 1, s0)}};
  SolverOptions opt;
  opt.freeze_auxiliaries = true;
  const SubproblemSolution sol = solve_subproblem(spec, opt);
  ASSERT_TRUE(sol.converged);

  auto objective = [&](double x, double y) {
    if (x * x + y * y + 25.0 > std::cbrt(b0)) return std::numeric_limits<double>::infinity();
    return surrogate_objective({{Vec2(x, y)}, spec.linearization.b, spec.linearization.s}, spec);
  };
  double bx = 0.0, by = 0.0, best = std::numeric_limits<double>::infinity();
  for (double step = 0.1, half = 10.0; step >= 1e-4; half = 10 * step, step /= 10) {
    const double cx = bx, cy = by;
    for (double x = cx - half; x <= cx + half; x += step)
      for (double y = cy - half; y <= cy + half; y += step)
        if (const double f = objective(x, y); f < best) {
          best = f;
          bx = x;
          by = y;
        }
  }
  EXPECT_NEAR(sol.vars.xy[0].x(), bx, 1e-3);
  EXPECT_NEAR(sol.vars.xy[0].y(), by, 1e-3);
  EXPECT_LE(sol.objective, best * (1 + 1e-9));
}

TEST(Subproblem, FixedPointDoesNotMove) {
  // Four identical anchors on a ring around a single location: the ring radius minimizing the
  // objective is a stationary point by symmetry, hence its own subproblem optimum.
  ProblemData p = paper_problem();
  p.locations = {{0, 0, 0}};
  p.probs = {1.0};
  p.heights = {3, 3, 3, 3};
  p.v = std::vector<double>(4, p.v[0]);
  auto ring = [](double r) {
    std::vector<Vec2> xy;
    for (int m = 0; m < 4; ++m) xy.emplace_back(r * std::cos(M_PI / 2 * m), r * std::sin(M_PI / 2 * m));
    return xy;
  };
  double lo = 0.3, hi = 60.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (true_gradient(p, ring(mid))[0].x() > 0.0 ? hi : lo) = mid;
  }
  const auto xy = ring(0.5 * (lo + hi));
  const SubproblemSolution sol = solve_subproblem({p, SurrogatePoint::tight(p, xy)});
  for (std::size_t m = 0; m < 4; ++m) EXPECT_LT((sol.vars.xy[m] - xy[m]).norm(), 1e-6);

  const IterationTrace t = run(p, SurrogatePoint::tight(p, xy));
  EXPECT_EQ(t.records.size(), 2u);
  EXPECT_TRUE(t.converged);
}

TEST(Subproblem, FirstStepDescends) {
  const Scenario s = testing_support::paper_scenario();
  const ProblemData p = ProblemData::from(s);
  const SurrogatePoint init = initialize(s, p, {});
  const SubproblemSpec spec{p, init};
  const double start = surrogate_objective(SubproblemVars::from(p, init), spec);
  const SubproblemSolution sol = solve_subproblem(spec);
  EXPECT_TRUE(sol.converged);
  EXPECT_LT(sol.objective, start);
  EXPECT_LT(true_objective(p, sol.vars.xy), start);
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t k = 0; k < 4; ++k) {
      const double rho = p.offset(m, k, sol.vars.xy[m]).squaredNorm();
      EXPECT_GE(sol.vars.b(m, k), std::pow(rho, 3) * (1 - 1e-12));
      EXPECT_GE(sol.vars.s(m, k), std::pow(rho, 4) * (1 - 1e-12));
    }
}

TEST(Subproblem, StationaryOnActiveConstraints) {
  const Scenario s = testing_support::paper_scenario();
  const ProblemData p = ProblemData::from(s);
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 5; ++trial) {
    const SubproblemSpec spec{p, SurrogatePoint::tight(p, testing_support::random_xy(rng, 4))};
    const SubproblemSolution sol = solve_subproblem(spec);
    ASSERT_TRUE(sol.converged);
    const double start = max_norm(reduced_gradient(p, SubproblemVars::from(p, spec.linearization), spec));
    EXPECT_LE(max_norm(reduced_gradient(p, sol.vars, spec)), 1e-6 * start);

    // Lagrangian stationarity with the barrier multipliers.
    const VarsGradient g = objective_gradient(sol.vars, spec);
    for (std::size_t m = 0; m < 4; ++m) {
      Vec2 r = g.xy[m];
      for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_GT(sol.dual_b(m, k), 0.0);
        EXPECT_GT(sol.dual_s(m, k), 0.0);
        r += 2.0 * (sol.dual_b(m, k) + sol.dual_s(m, k)) * p.offset(m, k, sol.vars.xy[m]).head<2>();
        const double b = sol.vars.b(m, k), sv = sol.vars.s(m, k);
        EXPECT_NEAR(g.b(m, k), sol.dual_b(m, k) * std::cbrt(b) / (3 * b), 1e-4 * g.b(m, k));
        EXPECT_NEAR(g.s(m, k), sol.dual_s(m, k) * std::sqrt(std::sqrt(sv)) / (4 * sv), 1e-4 * g.s(m, k));
      }
      EXPECT_LE(r.norm(), 1e-4 * start);
    }
  }
}

TEST(Subproblem, InfeasibleLinearizationRejected) {
  const ProblemData p = paper_problem();
  SurrogatePoint lin = SurrogatePoint::tight(p, {{42, 16}, {38, 20}, {5, 3}, {20, 30}});
  lin.b(1, 2) *= 0.5;
  EXPECT_FALSE(lin.is_feasible());
  EXPECT_THROW(solve_subproblem({p, lin}), NumericalError);
}

TEST(Subproblem, EpigraphFormAgrees) {
  const Scenario s = testing_support::paper_scenario();
  const ProblemData p = ProblemData::from(s);
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 3; ++trial) {
    const SubproblemSpec spec{p, SurrogatePoint::tight(p, testing_support::random_xy(rng, 4))};
    const SubproblemSolution a = solve_subproblem(spec);
    const EpigraphSolution b = solve_subproblem_epigraph(spec);
    ASSERT_TRUE(a.converged);
    ASSERT_TRUE(b.converged);
    EXPECT_NEAR(b.objective, a.objective, 1e-6 * a.objective);
    EXPECT_NEAR(b.trace_T, b.objective, 1e-6 * b.objective);
    EXPECT_NEAR(b.trace_T, b.T.trace(), 1e-15 * b.trace_T);
  }
}

TEST(ProblemData, ScaleIsPriorExtent) {
  const ProblemData p = paper_problem();
  EXPECT_NEAR(p.scale, (Vec3(0, 0, 13) - Vec3(45, 25, 3)).norm(), 1e-12);
  EXPECT_EQ(p.f_prior, 1e4 * Mat3::Identity());
}

