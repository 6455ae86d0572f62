#include "anchorplace/pcrb.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace anchorplace {

double FimMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat3> es(value, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool FimMatrix::is_symmetric(double rel_tol) const {
  const double scale = std::max(value.cwiseAbs().maxCoeff(), 1e-300);
  return (value - value.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool FimMatrix::is_psd(double rel_tol) const {
  return min_eigenvalue() >= -rel_tol * std::max(value.norm(), 1e-300);
}

double range(const Vec2& anchor_xy, double anchor_z, const Vec3& target, double guard) {
  const Vec3 d(anchor_xy.x() - target.x(), anchor_xy.y() - target.y(), anchor_z - target.z());
  const double r = d.norm();
  if (r < guard) {
    std::ostringstream os;
    os << "range guard violated: r = " << r << " m < " << guard << " m";
    throw NumericalError(os.str());
  }
  return r;
}

Placement Placement::build(const Scenario& s, std::vector<Vec2> xy) {
  if (xy.size() != s.num_anchors()) throw ValidationError("placement: expected one position per anchor");
  Placement p;
  p.xy = std::move(xy);
  p.heights = s.heights();
  const std::size_t M = p.xy.size(), K = s.num_locations();
  p.offsets = Grid<Vec3>(M, K);
  p.ranges = Grid<double>(M, K);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      const Vec3& u = s.prior.locations[k];
      p.offsets(m, k) = Vec3(p.xy[m].x() - u.x(), p.xy[m].y() - u.y(), p.heights[m] - u.z());
      p.ranges(m, k) = range(p.xy[m], p.heights[m], u, s.range_guard);
    }
  }
  return p;
}

double xi_bar(const DerivedConstants& d, std::size_t m, double r) {
  const double r2 = r * r;
  const double r6 = r2 * r2 * r2;
  return d.w / (r6 * r2) + d.v[m] / r6;
}

FimMatrix observed_fim(const DerivedConstants& d, const TargetPrior& prior, const Placement& placement) {
  FimMatrix f;
  for (std::size_t k = 0; k < prior.size(); ++k) {
    Mat3 per_location = Mat3::Zero();
    for (std::size_t m = 0; m < placement.num_anchors(); ++m) {
      const Vec3& a = placement.offsets(m, k);
      per_location.noalias() += xi_bar(d, m, placement.ranges(m, k)) * (a * a.transpose());
    }
    f.value += prior.probs[k] * per_location;
  }
  return f;
}

FimMatrix observed_fim(const Scenario& s, const Placement& placement) {
  return observed_fim(derived_constants(s), s.prior, placement);
}

FimMatrix default_prior_fim(const TargetPrior& prior) {
  if (prior.size() < 2 || prior.min_pairwise_distance() >= 10.0 * std::sqrt(prior.sigma2))
    return prior_fim(prior, SeparatedApprox{});
  return prior_fim(prior, MonteCarloPrior{});
}

Mat3 inverse3(const Mat3& m) {
  Mat3 adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double det = m(0, 0) * adj(0, 0) + m(0, 1) * adj(1, 0) + m(0, 2) * adj(2, 0);
  if (!(std::abs(det) > 1e-300)) throw NumericalError("singular 3x3 matrix");
  return adj / det;
}

double trace_inverse(const Mat3& m) {
  // Leading principal minors decide positive definiteness of the symmetric part.
  const double d1 = m(0, 0);
  const double d2 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double d3 = m.determinant();
  if (!(d1 > 0.0 && d2 > 0.0 && d3 > 0.0)) throw NumericalError("information matrix is not positive definite");
  return inverse3(m).trace();
}

PcrbReport pcrb(const Scenario& s, const Placement& placement, const FimMatrix& f_prior) {
  const DerivedConstants d = derived_constants(s);
  PcrbReport r;
  r.f_obs = observed_fim(d, s.prior, placement);
  r.f_prior = f_prior;
  r.xi = Grid<double>(placement.num_anchors(), s.num_locations());
  for (std::size_t m = 0; m < placement.num_anchors(); ++m)
    for (std::size_t k = 0; k < s.num_locations(); ++k) r.xi(m, k) = xi_bar(d, m, placement.ranges(m, k));
  r.pcrb = trace_inverse(r.f_obs.value + r.f_prior.value);
  return r;
}

PcrbReport pcrb(const Scenario& s, const Placement& placement) {
  return pcrb(s, placement, default_prior_fim(s.prior));
}

FimBlocks fim_blocks(const Scenario& s, std::span<const double> ranges) {
  if (ranges.size() != s.num_anchors()) throw ValidationError("fim_blocks: expected one range per anchor");
  const DerivedConstants d = derived_constants(s);
  const double beta0_sq = d.beta0_lin * d.beta0_lin;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double c2 = s.radio.c * s.radio.c;
  FimBlocks b;
  for (std::size_t m = 0; m < ranges.size(); ++m) {
    const double r = ranges[m];
    if (r < s.range_guard) throw NumericalError("fim_blocks: range below guard");
    const double r2 = r * r, r4 = r2 * r2, r6 = r4 * r2;
    const double amp = d.p_lin * beta0_sq / d.noise_lin;
    b.xi.push_back(8.0 * amp * s.radio.sigma_alpha2 / r6 +
                   32.0 * pi2 * amp * d.lambda[m] * s.radio.sigma_alpha2 / (c2 * r4));
    b.wbar.push_back(2.0 * amp / r4);
  }
  return b;
}

Eigen::MatrixX3d range_jacobian(const Placement& placement, const Vec3& target) {
  Eigen::MatrixX3d J(placement.num_anchors(), 3);
  for (std::size_t m = 0; m < placement.num_anchors(); ++m) {
    const Vec3 diff = target - placement.anchor(m);
    J.row(m) = (diff / diff.norm()).transpose();
  }
  return J;
}

}  // namespace anchorplace
