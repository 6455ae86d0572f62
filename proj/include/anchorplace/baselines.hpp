#pragma once

#include <string>
#include <vector>

#include "anchorplace/scenario.hpp"

namespace anchorplace {

struct BenchmarkPlacement {
  std::string name;  // "circle" or "fermat_weber_sequential"
  std::vector<Vec2> xy;
  // circle
  Vec2 center = Vec2::Zero();
  double r0 = 0.0;
  double phase = 0.0;
  // fermat_weber_sequential: prior-location indices targeted by each anchor
  std::vector<std::vector<std::size_t>> subsets;
};

/// Anchors evenly spaced on a circle of radius r0 around the most probable prior
/// location (lowest index on ties), anchor m at angle phase + 2 pi m / M.
BenchmarkPlacement circle_placement(const Scenario& s, double r0, double phase = 0.0);

struct WeiszfeldResult {
  Vec2 xy = Vec2::Zero();
  int iters = 0;
  bool converged = false;
  bool monotone = true;  // objective never increased
};

/// Sum of 3D distances from (x, y, fixed_z) to the points.
double fermat_weber_objective(const std::vector<Vec3>& pts, double fixed_z, const Vec2& xy);
Vec2 fermat_weber_gradient(const std::vector<Vec3>& pts, double fixed_z, const Vec2& xy);

/// Weiszfeld iteration for the horizontal minimizer of fermat_weber_objective.
WeiszfeldResult weiszfeld(const std::vector<Vec3>& pts, double fixed_z, const Vec2& init, double tol = 1e-13,
                          int max_iters = 100000);

/// Size K-1 subsets of {0..K-1} ordered by combined probability, descending; equal
/// sums are ordered by the lower excluded index first.
std::vector<std::vector<std::size_t>> ranked_subsets(const std::vector<double>& probs);

/// Anchor 0 serves all K locations; anchor m >= 1 serves the m-th ranked subset,
/// wrapping around the ranking when M - 1 exceeds K.
BenchmarkPlacement sequential_fw_placement(const Scenario& s);

}  // namespace anchorplace
