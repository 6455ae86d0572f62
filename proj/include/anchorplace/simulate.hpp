#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "anchorplace/pcrb.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;

/// Entry n = exp(-j 2 pi N_m(n) delta_f tau), tau = 2 r / c.
CVec steering(const Waveform& waveform, std::size_t m, double r, double c);

struct EchoOptions {
  std::optional<std::vector<cplx>> alpha;  // fixed RCS per anchor instead of CN(0, sigma_alpha^2) draws
  bool noiseless = false;
};

struct EchoRealization {
  std::vector<CVec> y;
  Vec3 u = Vec3::Zero();
  std::vector<cplx> alpha;
  std::uint64_t seed = 0;
};

/// y_m = sqrt(P / |N_m|) (beta0 / r_m^2) alpha_m g_m + z_m with all-ones pilots.
EchoRealization generate_echo(const Scenario& s, const Placement& placement, const Vec3& u, std::uint64_t seed,
                              const EchoOptions& options = {});

/// Closed-form diagonal blocks implied by the echo model above (per-subcarrier power P / |N_m|).
FimBlocks fim_blocks_signal_model(const Scenario& s, std::span<const double> ranges);

struct FimMcOptions {
  std::size_t n_trials = 100000;
  std::uint64_t seed = 0;
  Execution exec = Execution::parallel;
};

/// Score outer-product estimate of the Fisher information in phi = (r_m, Re alpha_m, Im alpha_m)
/// per anchor, parameters ordered 3m, 3m+1, 3m+2, averaged over noise and RCS draws.
struct FimMcEstimate {
  std::size_t n_trials = 0;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd se;
  Eigen::VectorXd score_mean;
  Eigen::VectorXd score_se;
  std::vector<double> xi, xi_se;      // (r_m, r_m)
  std::vector<double> wbar, wbar_se;  // (Re alpha_m, Re alpha_m)
  std::vector<double> wbar_imag, wbar_imag_se;
  double max_offdiag_z = 0.0;  // largest |mean| / se over off-diagonal entries
};

FimMcEstimate estimate_fim_mc(const Scenario& s, const Placement& placement, const Vec3& u,
                              const FimMcOptions& options = {});

struct MapResult {
  std::size_t index = 0;
  Vec3 u = Vec3::Zero();
  std::vector<double> log_posterior;  // up to a common constant
};

/// Discrete MAP over the prior locations with each anchor's RCS marginalized.
MapResult map_estimate(const Scenario& s, const Placement& placement, const EchoRealization& echo);

struct MseOptions {
  std::size_t n_trials = 10000;
  std::uint64_t seed = 0;
  Execution exec = Execution::parallel;
};

struct MseReport {
  std::size_t n_trials = 0;
  double mse = 0.0;
  double mse_se = 0.0;
  double lower_99 = 0.0;  // one-sided 99% lower confidence limit of the MSE
  double detection_rate = 0.0;
  double pcrb = 0.0;
  bool bound_holds = false;  // lower_99 >= pcrb
};

/// Truth drawn from the Gaussian-mixture prior, echo simulated at the truth, MAP estimate scored.
MseReport mse_trials(const Scenario& s, const Placement& placement, double pcrb, const MseOptions& options = {});

}  // namespace anchorplace
