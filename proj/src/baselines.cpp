#include "anchorplace/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace anchorplace {

BenchmarkPlacement circle_placement(const Scenario& s, double r0, double phase) {
  if (!(r0 > 0.0)) throw ValidationError("circle placement: r0 must be > 0");
  const auto& probs = s.prior.probs;
  const std::size_t mode = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  BenchmarkPlacement bp;
  bp.name = "circle";
  bp.center = s.prior.locations[mode].head<2>();
  bp.r0 = r0;
  bp.phase = phase;
  const std::size_t M = s.num_anchors();
  for (std::size_t m = 0; m < M; ++m) {
    const double ang = phase + 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(M);
    bp.xy.push_back(bp.center + r0 * Vec2(std::cos(ang), std::sin(ang)));
  }
  return bp;
}

double fermat_weber_objective(const std::vector<Vec3>& pts, double fixed_z, const Vec2& xy) {
  double g = 0.0;
  for (const auto& u : pts) g += Vec3(xy.x() - u.x(), xy.y() - u.y(), fixed_z - u.z()).norm();
  return g;
}

Vec2 fermat_weber_gradient(const std::vector<Vec3>& pts, double fixed_z, const Vec2& xy) {
  Vec2 g = Vec2::Zero();
  for (const auto& u : pts) {
    const Vec3 d(xy.x() - u.x(), xy.y() - u.y(), fixed_z - u.z());
    const double n = d.norm();
    if (n > 0.0) g += d.head<2>() / n;
  }
  return g;
}

WeiszfeldResult weiszfeld(const std::vector<Vec3>& pts, double fixed_z, const Vec2& init, double tol, int max_iters) {
  if (pts.empty()) throw ValidationError("weiszfeld: need at least one point");
  if (!std::isfinite(fixed_z)) throw ValidationError("weiszfeld: fixed_z must be finite");
  WeiszfeldResult res;
  if (pts.size() == 1) {
    res.xy = pts[0].head<2>();
    res.converged = true;
    return res;
  }
  Vec2 x = init;
  double g = fermat_weber_objective(pts, fixed_z, x);
  Vec2 best = x;
  double best_g = g;
  for (int it = 0; it < max_iters; ++it) {
    for (const auto& u : pts)
      if ((x - u.head<2>()).norm() < 1e-9 && fixed_z == u.z()) x += Vec2(1e-6, 1e-6);
    Vec2 num = Vec2::Zero();
    double den = 0.0;
    for (const auto& u : pts) {
      const double d = Vec3(x.x() - u.x(), x.y() - u.y(), fixed_z - u.z()).norm();
      num += u.head<2>() / d;
      den += 1.0 / d;
    }
    const Vec2 next = num / den;
    const double step = (next - x).norm();
    const double g_next = fermat_weber_objective(pts, fixed_z, next);
    if (g_next > g * (1.0 + 1e-15)) res.monotone = false;
    x = next;
    g = g_next;
    res.iters = it + 1;
    if (g <= best_g) {
      best = x;
      best_g = g;
    }
    if (step < tol) {
      res.converged = true;
      break;
    }
  }
  res.xy = best;
  return res;
}

std::vector<std::vector<std::size_t>> ranked_subsets(const std::vector<double>& probs) {
  const std::size_t K = probs.size();
  // Combined probability of the subset without k is (total - p_k): rank by p_k ascending.
  std::vector<std::size_t> excluded(K);
  std::iota(excluded.begin(), excluded.end(), 0);
  std::stable_sort(excluded.begin(), excluded.end(), [&](std::size_t i, std::size_t j) { return probs[i] < probs[j]; });
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t ex : excluded) {
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < K; ++k)
      if (k != ex) members.push_back(k);
    subsets.push_back(std::move(members));
  }
  return subsets;
}

BenchmarkPlacement sequential_fw_placement(const Scenario& s) {
  const std::size_t K = s.num_locations();
  if (K < 2) throw ValidationError("fermat-weber placement needs at least 2 prior locations");
  const auto ranked = ranked_subsets(s.prior.probs);
  BenchmarkPlacement bp;
  bp.name = "fermat_weber_sequential";
  std::vector<std::size_t> all(K);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t m = 0; m < s.num_anchors(); ++m) {
    const auto& members = m == 0 ? all : ranked[(m - 1) % ranked.size()];
    std::vector<Vec3> pts;
    Vec2 mean = Vec2::Zero();
    for (std::size_t k : members) {
      pts.push_back(s.prior.locations[k]);
      mean += s.prior.locations[k].head<2>();
    }
    mean /= static_cast<double>(pts.size());
    const WeiszfeldResult r = weiszfeld(pts, s.anchors[m].height, mean);
    bp.xy.push_back(r.xy);
    bp.subsets.push_back(members);
  }
  return bp;
}

}  // namespace anchorplace
