#include "anchorplace/simulate.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "anchorplace/detail/blocks.hpp"

namespace anchorplace {

namespace {

constexpr std::uint64_t kEchoStream = 0x6563686fULL;
constexpr std::uint64_t kFimStream = 0x66696dULL;
constexpr std::uint64_t kMseStream = 0x6d7365ULL;
constexpr std::size_t kTrialBlock = 256;

struct Amplitudes {
  std::vector<double> sqrt_phat;  // sqrt(P / |N_m|)
  double beta0 = 0.0;             // amplitude reference gain
  double noise = 0.0;             // sigma_z^2 (W)
};

Amplitudes amplitudes(const Scenario& s) {
  const DerivedConstants d = derived_constants(s);
  Amplitudes a;
  a.beta0 = d.beta0_lin;
  a.noise = d.noise_lin;
  for (const auto& set : s.waveform.allocations) a.sqrt_phat.push_back(std::sqrt(d.p_lin / static_cast<double>(set.size())));
  return a;
}

cplx draw_cn(std::mt19937_64& rng, std::normal_distribution<double>& gauss, double var) {
  const double sd = std::sqrt(var / 2.0);
  const double re = gauss(rng);
  return {sd * re, sd * gauss(rng)};
}

std::vector<double> ranges_to(const Placement& placement, const Vec3& u) {
  std::vector<double> r;
  for (std::size_t m = 0; m < placement.num_anchors(); ++m) r.push_back((placement.anchor(m) - u).norm());
  return r;
}

EchoRealization echo_with(const Scenario& s, const Amplitudes& amp, const std::vector<CVec>& g,
                          const std::vector<double>& r, const Vec3& u, std::mt19937_64& rng, const EchoOptions& opt) {
  std::normal_distribution<double> gauss;
  EchoRealization e;
  e.u = u;
  const std::size_t M = s.num_anchors();
  for (std::size_t m = 0; m < M; ++m) {
    const cplx alpha = opt.alpha ? opt.alpha->at(m) : draw_cn(rng, gauss, s.radio.sigma_alpha2);
    e.alpha.push_back(alpha);
    CVec y = (amp.sqrt_phat[m] * amp.beta0 / (r[m] * r[m]) * alpha) * g[m];
    if (!opt.noiseless)
      for (Eigen::Index n = 0; n < y.size(); ++n) y[n] += draw_cn(rng, gauss, amp.noise);
    e.y.push_back(std::move(y));
  }
  return e;
}

struct MomentAcc {
  Eigen::MatrixXd sum, sumsq;
  Eigen::VectorXd score, scoresq;
};

}  // namespace

CVec steering(const Waveform& waveform, std::size_t m, double r, double c) {
  if (m >= waveform.allocations.size()) throw std::out_of_range("steering: anchor index out of range");
  const auto& set = waveform.allocations[m];
  const double tau = 2.0 * r / c;
  CVec g(static_cast<Eigen::Index>(set.size()));
  for (std::size_t n = 0; n < set.size(); ++n) {
    // Reduce the cycle count before scaling by 2 pi to keep the phase accurate.
    const double cycles = static_cast<double>(set[n]) * waveform.delta_f * tau;
    const double frac = cycles - std::round(cycles);
    g[static_cast<Eigen::Index>(n)] = std::polar(1.0, -2.0 * std::numbers::pi * frac);
  }
  return g;
}

EchoRealization generate_echo(const Scenario& s, const Placement& placement, const Vec3& u, std::uint64_t seed,
                              const EchoOptions& options) {
  if (options.alpha && options.alpha->size() != s.num_anchors())
    throw ValidationError("echo: need one fixed RCS value per anchor");
  const Amplitudes amp = amplitudes(s);
  const std::vector<double> r = ranges_to(placement, u);
  std::vector<CVec> g;
  for (std::size_t m = 0; m < s.num_anchors(); ++m) g.push_back(steering(s.waveform, m, r[m], s.radio.c));
  auto rng = detail::substream(seed, kEchoStream, 0);
  EchoRealization e = echo_with(s, amp, g, r, u, rng, options);
  e.seed = seed;
  return e;
}

FimBlocks fim_blocks_signal_model(const Scenario& s, std::span<const double> ranges) {
  if (ranges.size() != s.num_anchors()) throw ValidationError("fim_blocks: expected one range per anchor");
  const DerivedConstants d = derived_constants(s);
  const double amp = d.p_lin * d.beta0_lin * d.beta0_lin / d.noise_lin;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  FimBlocks b;
  for (std::size_t m = 0; m < ranges.size(); ++m) {
    const double r = ranges[m], r2 = r * r, r4 = r2 * r2;
    const double n_m = static_cast<double>(s.waveform.allocations[m].size());
    b.xi.push_back(8.0 * amp * s.radio.sigma_alpha2 / (r4 * r2) +
                   32.0 * pi2 * amp * s.radio.sigma_alpha2 * d.lambda[m] / (n_m * s.radio.c * s.radio.c * r4));
    b.wbar.push_back(2.0 * amp / r4);
  }
  return b;
}

FimMcEstimate estimate_fim_mc(const Scenario& s, const Placement& placement, const Vec3& u, const FimMcOptions& opt) {
  if (opt.n_trials < 2) throw ValidationError("estimate_fim_mc: need at least 2 trials");
  const std::size_t M = s.num_anchors(), P = 3 * M;
  const Amplitudes amp = amplitudes(s);
  const std::vector<double> r = ranges_to(placement, u);
  std::vector<CVec> g, dphase;  // steering and d g / d r divided by g
  for (std::size_t m = 0; m < M; ++m) {
    g.push_back(steering(s.waveform, m, r[m], s.radio.c));
    CVec dp(g.back().size());
    for (std::size_t n = 0; n < s.waveform.allocations[m].size(); ++n)
      dp[static_cast<Eigen::Index>(n)] =
          cplx(0.0, -4.0 * std::numbers::pi * s.waveform.allocations[m][n] * s.waveform.delta_f / s.radio.c);
    dphase.push_back(std::move(dp));
  }

  const auto partial = detail::run_blocks<MomentAcc>(
      opt.n_trials, kTrialBlock, opt.exec, [&](std::size_t, std::size_t begin, std::size_t end) {
        MomentAcc acc{Eigen::MatrixXd::Zero(P, P), Eigen::MatrixXd::Zero(P, P), Eigen::VectorXd::Zero(P),
                      Eigen::VectorXd::Zero(P)};
        Eigen::VectorXd score(P);
        for (std::size_t trial = begin; trial < end; ++trial) {
          auto rng = detail::substream(opt.seed, kFimStream, trial);
          const EchoRealization e = echo_with(s, amp, g, r, u, rng, {});
          for (std::size_t m = 0; m < M; ++m) {
            const double scale = amp.sqrt_phat[m] * amp.beta0 / (r[m] * r[m]);
            const CVec h = scale * g[m];
            const CVec mu = e.alpha[m] * h;
            const CVec resid = e.y[m] - mu;
            const CVec dmu_dr = mu * (-2.0 / r[m]) + mu.cwiseProduct(dphase[m]);
            // score = (2 / sigma^2) Re{resid^H d mu}
            const double k2 = 2.0 / amp.noise;
            score[3 * m] = k2 * resid.dot(dmu_dr).real();
            score[3 * m + 1] = k2 * resid.dot(h).real();
            score[3 * m + 2] = k2 * resid.dot(cplx(0.0, 1.0) * h).real();
          }
          const Eigen::MatrixXd outer = score * score.transpose();
          acc.sum += outer;
          acc.sumsq += outer.cwiseProduct(outer);
          acc.score += score;
          acc.scoresq += score.cwiseProduct(score);
        }
        return acc;
      });

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(P, P), sumsq = sum;
  Eigen::VectorXd ssum = Eigen::VectorXd::Zero(P), ssq = ssum;
  for (const auto& a : partial) {
    sum += a.sum;
    sumsq += a.sumsq;
    ssum += a.score;
    ssq += a.scoresq;
  }
  const double n = static_cast<double>(opt.n_trials);
  FimMcEstimate est;
  est.n_trials = opt.n_trials;
  est.mean = sum / n;
  const Eigen::MatrixXd var = (sumsq / n - est.mean.cwiseProduct(est.mean)) * (n / (n - 1.0));
  est.se = (var.cwiseMax(0.0) / n).cwiseSqrt();
  est.score_mean = ssum / n;
  const Eigen::VectorXd svar = (ssq / n - est.score_mean.cwiseProduct(est.score_mean)) * (n / (n - 1.0));
  est.score_se = (svar.cwiseMax(0.0) / n).cwiseSqrt();
  for (std::size_t m = 0; m < M; ++m) {
    est.xi.push_back(est.mean(3 * m, 3 * m));
    est.xi_se.push_back(est.se(3 * m, 3 * m));
    est.wbar.push_back(est.mean(3 * m + 1, 3 * m + 1));
    est.wbar_se.push_back(est.se(3 * m + 1, 3 * m + 1));
    est.wbar_imag.push_back(est.mean(3 * m + 2, 3 * m + 2));
    est.wbar_imag_se.push_back(est.se(3 * m + 2, 3 * m + 2));
  }
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = i + 1; j < P; ++j)
      if (est.se(i, j) > 0.0) est.max_offdiag_z = std::max(est.max_offdiag_z, std::abs(est.mean(i, j)) / est.se(i, j));
  return est;
}

namespace {

struct Candidates {
  std::vector<std::vector<CVec>> h;       // [k][m] = sqrt(p_hat) beta0 / r^2 g
  std::vector<std::vector<double>> hn2;   // |h|^2
};

Candidates candidates(const Scenario& s, const Placement& placement, const Amplitudes& amp) {
  Candidates c;
  for (std::size_t k = 0; k < s.num_locations(); ++k) {
    std::vector<CVec> hk;
    std::vector<double> nk;
    for (std::size_t m = 0; m < s.num_anchors(); ++m) {
      const double r = (placement.anchor(m) - s.prior.locations[k]).norm();
      hk.push_back(amp.sqrt_phat[m] * amp.beta0 / (r * r) * steering(s.waveform, m, r, s.radio.c));
      nk.push_back(hk.back().squaredNorm());
    }
    c.h.push_back(std::move(hk));
    c.hn2.push_back(std::move(nk));
  }
  return c;
}

MapResult map_with(const Scenario& s, const Candidates& c, const Amplitudes& amp, const EchoRealization& echo) {
  MapResult res;
  const double sa = s.radio.sigma_alpha2, s2 = amp.noise;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.num_locations(); ++k) {
    double ll = std::log(s.prior.probs[k]);
    for (std::size_t m = 0; m < s.num_anchors(); ++m) {
      // y ~ CN(0, sigma_alpha^2 h h^H + sigma^2 I) after integrating out alpha.
      const double g = sa * c.hn2[k][m];
      const double proj = std::norm(c.h[k][m].dot(echo.y[m]));
      ll += -std::log1p(g / s2) + sa * proj / (s2 * (s2 + g));
    }
    res.log_posterior.push_back(ll);
    if (ll > best) {
      best = ll;
      res.index = k;
    }
  }
  res.u = s.prior.locations[res.index];
  return res;
}

struct MseAcc {
  double sum = 0.0, sumsq = 0.0;
  std::size_t hits = 0;
};

}  // namespace

MapResult map_estimate(const Scenario& s, const Placement& placement, const EchoRealization& echo) {
  if (echo.y.size() != s.num_anchors()) throw ValidationError("map_estimate: echo does not match the scenario");
  const Amplitudes amp = amplitudes(s);
  return map_with(s, candidates(s, placement, amp), amp, echo);
}

MseReport mse_trials(const Scenario& s, const Placement& placement, double pcrb, const MseOptions& opt) {
  if (opt.n_trials < 2) throw ValidationError("mse_trials: need at least 2 trials");
  const Amplitudes amp = amplitudes(s);
  const Candidates cand = candidates(s, placement, amp);
  const double sigma = std::sqrt(s.prior.sigma2);
  std::vector<double> cdf;
  double acc_p = 0.0;
  for (double p : s.prior.probs) cdf.push_back(acc_p += p);

  const auto partial = detail::run_blocks<MseAcc>(
      opt.n_trials, kTrialBlock, opt.exec, [&](std::size_t, std::size_t begin, std::size_t end) {
        MseAcc acc;
        for (std::size_t trial = begin; trial < end; ++trial) {
          auto rng = detail::substream(opt.seed, kMseStream, trial);
          std::uniform_real_distribution<double> unif(0.0, acc_p);
          std::normal_distribution<double> gauss;
          const double pick = unif(rng);
          std::size_t k = 0;
          while (k + 1 < cdf.size() && pick >= cdf[k]) ++k;
          const double gx = gauss(rng), gy = gauss(rng), gz = gauss(rng);
          const Vec3 u = s.prior.locations[k] + sigma * Vec3(gx, gy, gz);
          const std::vector<double> r = ranges_to(placement, u);
          std::vector<CVec> g;
          for (std::size_t m = 0; m < s.num_anchors(); ++m) g.push_back(steering(s.waveform, m, r[m], s.radio.c));
          const EchoRealization e = echo_with(s, amp, g, r, u, rng, {});
          const MapResult est = map_with(s, cand, amp, e);
          const double err = (est.u - u).squaredNorm();
          acc.sum += err;
          acc.sumsq += err * err;
          acc.hits += est.index == k ? 1 : 0;
        }
        return acc;
      });

  MseAcc tot;
  for (const auto& a : partial) {
    tot.sum += a.sum;
    tot.sumsq += a.sumsq;
    tot.hits += a.hits;
  }
  const double n = static_cast<double>(opt.n_trials);
  MseReport rep;
  rep.n_trials = opt.n_trials;
  rep.mse = tot.sum / n;
  const double var = std::max(0.0, (tot.sumsq / n - rep.mse * rep.mse) * n / (n - 1.0));
  rep.mse_se = std::sqrt(var / n);
  constexpr double kZ99 = 2.3263478740408408;
  rep.lower_99 = rep.mse - kZ99 * rep.mse_se;
  rep.detection_rate = static_cast<double>(tot.hits) / n;
  rep.pcrb = pcrb;
  rep.bound_holds = rep.lower_99 >= pcrb;
  return rep;
}

}  // namespace anchorplace
