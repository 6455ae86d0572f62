#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchorplace/common.hpp"

namespace anchorplace {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kDefaultRangeGuard = 1e-3;

/// Discrete target location prior, smoothed into a Gaussian mixture with
/// per-component variance sigma2 for Fisher-information calculus.
struct TargetPrior {
  std::vector<Vec3> locations;  // m
  std::vector<double> probs;
  double sigma2 = 1e-4;  // m^2

  std::size_t size() const { return locations.size(); }
  double min_pairwise_distance() const;
  void validate() const;
};

struct AnchorSite {
  double height = 0.0;  // m
  std::optional<Vec2> init_xy;
};

/// OFDM numerology plus the per-anchor disjoint subcarrier sets.
struct Waveform {
  int n_total = 0;
  double delta_f = 0.0;  // Hz
  std::vector<std::vector<int>> allocations;

  /// Interleaved comb: anchor m (0-based) gets {offset + m + stride * n, n < count}.
  static std::vector<std::vector<int>> comb(std::size_t anchors, int offset, int stride, int count);

  void validate(std::size_t anchors) const;
};

struct RadioParams {
  double p_dbm = 20.0;
  double noise_dbm = -90.0;
  double beta0_db = -30.0;
  double sigma_alpha2 = 1.0;
  double c = kSpeedOfLight;

  void validate() const;
};

struct Scenario {
  TargetPrior prior;
  std::vector<AnchorSite> anchors;
  Waveform waveform;
  RadioParams radio;
  double range_guard = kDefaultRangeGuard;  // m

  std::size_t num_anchors() const { return anchors.size(); }
  std::size_t num_locations() const { return prior.size(); }
  std::vector<double> heights() const;

  void validate() const;

  /// Copy with a different per-anchor power budget.
  Scenario with_power(double p_dbm) const;
};

/// Linear-unit constants shared by every information expression.
struct DerivedConstants {
  double w = 0.0;             // 8 P beta0^2 sigma_alpha^2 / sigma_z^2
  std::vector<double> v;      // 32 pi^2 P beta0^2 lambda_m sigma_alpha^2 / (c^2 sigma_z^2)
  std::vector<double> lambda; // Hz^2
  double p_lin = 0.0;         // W
  double noise_lin = 0.0;     // W
  double beta0_lin = 0.0;     // power ratio; beta0^2 in the formulas
};

double dbm_to_watts(double dbm);
double db_to_linear(double db);

/// Sum over the anchor's subcarriers of (n * delta_f)^2.
double lambda_m(const Waveform& waveform, std::size_t m);

DerivedConstants derived_constants(const Scenario& s);

Scenario parse_scenario(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

}  // namespace anchorplace
