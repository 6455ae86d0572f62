#include "anchorplace/optimizer.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "anchorplace/detail/blocks.hpp"

namespace anchorplace {

namespace {

double max_slack(const ProblemData& p, const SubproblemVars& vars) {
  double worst = 0.0;
  for (std::size_t m = 0; m < p.anchors(); ++m) {
    for (std::size_t k = 0; k < p.locations_count(); ++k) {
      const double rho = p.offset(m, k, vars.xy[m]).squaredNorm();
      const double b_t = rho * rho * rho, s_t = b_t * rho;
      worst = std::max({worst, std::abs(vars.b(m, k) - b_t) / b_t, std::abs(vars.s(m, k) - s_t) / s_t});
    }
  }
  return worst;
}

SurrogatePoint carried(const ProblemData& p, const SubproblemVars& vars) {
  SurrogatePoint pt = SurrogatePoint::tight(p, vars.xy);
  pt.b = vars.b;
  pt.s = vars.s;
  return pt;
}

double linearization_value(const ProblemData& p, const SurrogatePoint& pt) {
  return relaxed_objective(p, SubproblemVars::from(p, pt));
}

}  // namespace

Vec2 weighted_centroid(const TargetPrior& prior) {
  Vec2 c = Vec2::Zero();
  for (std::size_t k = 0; k < prior.size(); ++k) c += prior.probs[k] * prior.locations[k].head<2>();
  return c;
}

std::vector<Vec2> initial_positions(const Scenario& s, const InitOptions& init) {
  const std::size_t M = s.num_anchors();
  std::vector<Vec2> xy(M);
  switch (init.strategy) {
    case InitStrategy::circle_centroid: {
      if (!(init.radius > 0.0)) throw ValidationError("init radius must be > 0");
      const Vec2 c = weighted_centroid(s.prior);
      for (std::size_t m = 0; m < M; ++m) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(M);
        xy[m] = c + init.radius * Vec2(std::cos(ang), std::sin(ang));
      }
      break;
    }
    case InitStrategy::from_config:
      for (std::size_t m = 0; m < M; ++m) {
        if (!s.anchors[m].init_xy) throw ValidationError("anchors[" + std::to_string(m) + "].init_xy: missing");
        xy[m] = *s.anchors[m].init_xy;
      }
      break;
    case InitStrategy::random: {
      Vec2 lo = s.prior.locations[0].head<2>(), hi = lo;
      for (const auto& u : s.prior.locations) {
        lo = lo.cwiseMin(u.head<2>());
        hi = hi.cwiseMax(u.head<2>());
      }
      auto rng = detail::substream(init.seed, 0, 0);
      std::uniform_real_distribution<double> ux(lo.x() - init.margin, hi.x() + init.margin);
      std::uniform_real_distribution<double> uy(lo.y() - init.margin, hi.y() + init.margin);
      for (auto& p : xy) {
        const double x = ux(rng);
        p = Vec2(x, uy(rng));
      }
      break;
    }
  }
  return xy;
}

SurrogatePoint initialize(const Scenario& s, const ProblemData& p, const InitOptions& init) {
  return SurrogatePoint::tight(p, initial_positions(s, init));
}

IterationTrace run(const ProblemData& p, const SurrogatePoint& init, const RunOptions& opt) {
  if (!init.is_feasible(1e-9)) throw ValidationError("initial point violates the power constraints");
  IterationTrace trace;
  SurrogatePoint point = init;
  std::vector<Vec2> xy = init.xy(p);

  double current = linearization_value(p, point);
  if (!std::isfinite(current)) throw NumericalError("information matrix is singular at the initial point");
  IterationRecord r0;
  r0.objective = current;
  r0.true_pcrb = true_objective(p, xy);
  r0.kkt_residual = kkt_residual(p, SurrogatePoint::tight(p, xy)).max_stationarity;
  trace.records.push_back(r0);

  for (int it = 1; it <= opt.max_iters; ++it) {
    SubproblemSolution sol;
    try {
      sol = solve_subproblem({p, point}, opt.solver);
    } catch (const NumericalError& e) {
      trace.error = e.what();
      trace.stop_reason = "subproblem failure";
      trace.final_point = point;
      return trace;
    }
    SurrogatePoint next = opt.retighten ? SurrogatePoint::tight(p, sol.vars.xy) : carried(p, sol.vars);
    const double next_value = linearization_value(p, next);
    const double prev_objective = trace.records.back().objective;
    // No strict decrease left at working precision: keep the previous point and record a zero decrement.
    if (!(next_value < current) || !(sol.objective <= prev_objective + 1e-12 * std::abs(prev_objective))) {
      IterationRecord rec;
      rec.iter = it;
      rec.objective = current;
      rec.true_pcrb = trace.records.back().true_pcrb;
      rec.kkt_residual = trace.records.back().kkt_residual;
      rec.subproblem = sol.diagnostics;
      trace.records.push_back(rec);
      const bool within = next_value <= current * (1.0 + opt.rel_tol);
      trace.converged = within;
      trace.stop_reason = within ? "relative decrement below tolerance (point kept)" : "no further decrease";
      break;
    }
    IterationRecord rec;
    rec.iter = it;
    rec.objective = sol.objective;
    rec.true_pcrb = true_objective(p, sol.vars.xy);
    rec.max_constraint_slack = max_slack(p, sol.vars);
    rec.kkt_residual = kkt_residual(p, SurrogatePoint::tight(p, sol.vars.xy)).max_stationarity;
    rec.subproblem = sol.diagnostics;
    trace.records.push_back(rec);

    const double decrement = (current - next_value) / current;
    point = std::move(next);
    current = next_value;
    if (decrement <= opt.rel_tol) {
      trace.converged = true;
      trace.stop_reason = "relative decrement below tolerance";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max iterations";
  trace.final_point = point;
  return trace;
}

std::vector<Vec2> recover_locations(const ProblemData& p, const SurrogatePoint& point, double tol) {
  const std::vector<Vec2> xy = point.xy(p);
  for (std::size_t m = 0; m < p.anchors(); ++m) {
    for (std::size_t k = 1; k < p.locations_count(); ++k) {
      const Vec2 alt = point.a(m, k).head<2>() + p.locations[k].head<2>();
      if ((alt - xy[m]).norm() > tol)
        throw NumericalError("offsets of anchor " + std::to_string(m) + " disagree across prior locations");
    }
  }
  return xy;
}

std::vector<Vec2> recover_locations(const ProblemData& p, const IterationTrace& trace, double tol) {
  return recover_locations(p, trace.final_point, tol);
}

KktReport kkt_residual(const ProblemData& p, const SurrogatePoint& point) {
  const std::size_t M = p.anchors(), K = p.locations_count();
  Mat3 B = p.f_prior;
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < K; ++k)
      B += p.probs[k] * (p.w / point.s(m, k) + p.v[m] / point.b(m, k)) * (point.a(m, k) * point.a(m, k).transpose());
  const Mat3 Binv = inverse3(B);
  const Mat3 Lambda1 = Binv * Binv;

  KktReport rep;
  rep.lambda = Grid<double>(M, K);
  rep.eta = Grid<double>(M, K);
  rep.stationarity.assign(M, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    Vec2 grad = Vec2::Zero();
    for (std::size_t k = 0; k < K; ++k) {
      const Vec3& a = point.a(m, k);
      const double b = point.b(m, k), s = point.s(m, k);
      const Vec3 La = Lambda1 * a;
      const double q = a.dot(La);
      const double lam = 3.0 * p.v[m] * p.probs[k] * q * std::pow(b, -4.0 / 3.0);
      const double eta = 4.0 * p.w * p.probs[k] * q * std::pow(s, -5.0 / 4.0);
      rep.lambda(m, k) = lam;
      rep.eta(m, k) = eta;
      const Vec3 da = -2.0 * p.probs[k] * (p.w / s + p.v[m] / b) * La + 2.0 * (lam + eta) * a;
      grad += da.head<2>();
    }
    // Reported against the nondimensional positions x / L.
    rep.stationarity[m] = p.scale * grad.norm();
    rep.max_stationarity = std::max(rep.max_stationarity, rep.stationarity[m]);
  }
  return rep;
}

MultiStartResult optimize(const Scenario& s, const ProblemData& p, const MultiStartOptions& opt) {
  if (opt.starts < 1 && opt.extra_starts.empty()) throw ValidationError("need at least one start");
  std::vector<std::vector<Vec2>> starts;
  MultiStartResult res;
  for (int i = 0; i < opt.starts; ++i) {
    InitOptions init;
    if (i == 0) {
      init.strategy = InitStrategy::circle_centroid;
      res.labels.push_back("circle_centroid");
    } else {
      init.strategy = InitStrategy::random;
      init.seed = opt.seed + static_cast<std::uint64_t>(i);
      res.labels.push_back("random(" + std::to_string(init.seed) + ")");
    }
    starts.push_back(initial_positions(s, init));
  }
  for (const auto& xy : opt.extra_starts) {
    starts.push_back(xy);
    res.labels.push_back("warm");
  }

  res.runs.resize(starts.size());
  const auto n = static_cast<std::ptrdiff_t>(starts.size());
  auto one = [&](std::ptrdiff_t i) {
    try {
      res.runs[i] = run(p, SurrogatePoint::tight(p, starts[i]), opt.run);
    } catch (const std::exception& e) {
      res.runs[i].error = e.what();
      res.runs[i].stop_reason = "failed";
    }
  };
  if (opt.exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  }

  double best = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& r = res.runs[i];
    if (r.records.empty()) continue;
    const double v = r.final_pcrb();
    const bool better = (r.converged && !best_converged) || (r.converged == best_converged && v < best);
    if (better) {
      best = v;
      best_converged = r.converged;
      res.best = i;
    }
  }
  res.any_converged = best_converged;
  if (!std::isfinite(best)) throw NumericalError("every optimization start failed");
  return res;
}

}  // namespace anchorplace
