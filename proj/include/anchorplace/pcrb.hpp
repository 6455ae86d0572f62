#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "anchorplace/common.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

/// Symmetric PSD 3x3 Fisher information (m^-2).
struct FimMatrix {
  Mat3 value = Mat3::Zero();

  double min_eigenvalue() const;
  bool is_symmetric(double rel_tol = 1e-12) const;
  bool is_psd(double rel_tol = 1e-9) const;
};

/// Horizontal anchor positions plus the derived offsets a_{m,k} and ranges r_{m,k}.
struct Placement {
  std::vector<Vec2> xy;
  std::vector<double> heights;
  Grid<Vec3> offsets;   // [x_m - x_k, y_m - y_k, z_m - z_k]
  Grid<double> ranges;  // |offsets(m, k)|

  std::size_t num_anchors() const { return xy.size(); }
  Vec3 anchor(std::size_t m) const { return {xy[m].x(), xy[m].y(), heights[m]}; }

  /// Throws NumericalError if any range falls below the scenario's guard.
  static Placement build(const Scenario& s, std::vector<Vec2> xy);
};

/// Euclidean anchor-target distance; throws NumericalError below `guard`.
double range(const Vec2& anchor_xy, double anchor_z, const Vec3& target, double guard = 0.0);

/// Per-pair scale factor of the observed information: w / r^8 + v_m / r^6.
double xi_bar(const DerivedConstants& d, std::size_t m, double r);

/// Observed information collapsed onto the K prior points:
/// sum_k p_k sum_m xi_bar(m,k) a_{m,k} a_{m,k}^T.
FimMatrix observed_fim(const DerivedConstants& d, const TargetPrior& prior, const Placement& placement);
FimMatrix observed_fim(const Scenario& s, const Placement& placement);

struct MonteCarloPrior {
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
  Execution exec = Execution::parallel;
};
struct SeparatedApprox {};
using PriorFimMethod = std::variant<MonteCarloPrior, SeparatedApprox>;

/// Prior information of the Gaussian-mixture smoothed location prior.
/// SeparatedApprox returns I / sigma2 and refuses priors with components
/// closer than 10 sigma. MonteCarloPrior accepts any K >= 1 (no validation
/// of the probabilities beyond positivity).
FimMatrix prior_fim(const TargetPrior& prior, const PriorFimMethod& method);

/// The prior information used by default for optimization: the separated
/// approximation when admissible, otherwise a fixed-seed Monte Carlo estimate.
FimMatrix default_prior_fim(const TargetPrior& prior);

struct PcrbReport {
  FimMatrix f_obs;
  FimMatrix f_prior;
  double pcrb = 0.0;  // m^2
  Grid<double> xi;    // xi_bar(m, k)
};

PcrbReport pcrb(const Scenario& s, const Placement& placement, const FimMatrix& f_prior);
PcrbReport pcrb(const Scenario& s, const Placement& placement);

/// 3x3 inverse via the adjugate; throws NumericalError if |det| <= 1e-300.
Mat3 inverse3(const Mat3& m);
/// tr(m^-1); throws NumericalError unless m is positive definite.
double trace_inverse(const Mat3& m);

/// Diagonal blocks of the range-domain Fisher information at fixed ranges.
struct FimBlocks {
  std::vector<double> xi;    // delay/range information per anchor
  std::vector<double> wbar;  // per real/imag RCS component
};
FimBlocks fim_blocks(const Scenario& s, std::span<const double> ranges);

/// Row m = (u - anchor_m)^T / r_m.
Eigen::MatrixX3d range_jacobian(const Placement& placement, const Vec3& target);

}  // namespace anchorplace
