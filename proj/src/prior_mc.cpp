#include <cmath>
#include <limits>

#include "anchorplace/detail/blocks.hpp"
#include "anchorplace/pcrb.hpp"

namespace anchorplace {

namespace {

constexpr std::size_t kPriorBlock = 4096;

struct CovAccumulator {
  Mat3 sum = Mat3::Zero();
};

/// Responsibility-weighted covariance of the component means at u.
Mat3 mean_covariance(const TargetPrior& prior, const Vec3& u) {
  const std::size_t K = prior.size();
  std::vector<double> logw(K);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    logw[k] = std::log(prior.probs[k]) - (u - prior.locations[k]).squaredNorm() / (2.0 * prior.sigma2);
    top = std::max(top, logw[k]);
  }
  double norm = 0.0;
  for (auto& lw : logw) norm += (lw = std::exp(lw - top));
  Vec3 mean = Vec3::Zero();
  for (std::size_t k = 0; k < K; ++k) mean += (logw[k] / norm) * prior.locations[k];
  Mat3 cov = Mat3::Zero();
  for (std::size_t k = 0; k < K; ++k) {
    const double g = logw[k] / norm;
    if (g == 0.0) continue;
    const Vec3 d = prior.locations[k] - mean;
    cov.noalias() += g * (d * d.transpose());
  }
  return cov;
}

FimMatrix monte_carlo(const TargetPrior& prior, const MonteCarloPrior& mc) {
  if (prior.size() == 0) throw ValidationError("prior_fim: empty prior");
  if (mc.n_samples == 0) throw ValidationError("prior_fim: n_samples must be positive");
  const double sigma = std::sqrt(prior.sigma2);
  // E[score score^T] = I/sigma^2 - E[Cov_gamma(u_k)]/sigma^4 over the mixture,
  // estimated per component with ceil(n p_k) stratified draws.
  Mat3 correction = Mat3::Zero();
  for (std::size_t k = 0; k < prior.size(); ++k) {
    const auto n_k = static_cast<std::size_t>(std::ceil(static_cast<double>(mc.n_samples) * prior.probs[k]));
    if (n_k == 0) continue;
    const auto partial = detail::run_blocks<CovAccumulator>(
        n_k, kPriorBlock, mc.exec, [&](std::size_t block, std::size_t begin, std::size_t end) {
          auto rng = detail::substream(mc.seed, k, block);
          std::normal_distribution<double> gauss;
          CovAccumulator acc;
          for (std::size_t i = begin; i < end; ++i) {
            const Vec3 u = prior.locations[k] + sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
            acc.sum += mean_covariance(prior, u);
          }
          return acc;
        });
    Mat3 total = Mat3::Zero();
    for (const auto& p : partial) total += p.sum;
    correction += prior.probs[k] * total / static_cast<double>(n_k);
  }
  FimMatrix f;
  f.value = Mat3::Identity() / prior.sigma2 - correction / (prior.sigma2 * prior.sigma2);
  f.value = 0.5 * (f.value + f.value.transpose());
  return f;
}

}  // namespace

FimMatrix prior_fim(const TargetPrior& prior, const PriorFimMethod& method) {
  if (!(prior.sigma2 > 0.0)) throw ValidationError("prior_fim: sigma2 must be > 0");
  if (const auto* mc = std::get_if<MonteCarloPrior>(&method)) return monte_carlo(prior, *mc);
  if (prior.size() >= 2 && prior.min_pairwise_distance() < 10.0 * std::sqrt(prior.sigma2))
    throw ValidationError("prior_fim: separated approximation needs components at least 10 sigma apart");
  FimMatrix f;
  f.value = Mat3::Identity() / prior.sigma2;
  return f;
}

}  // namespace anchorplace
