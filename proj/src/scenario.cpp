#include "anchorplace/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace anchorplace {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ValidationError(field + ": " + what);
}

Vec3 read_vec3(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) fail(field, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) fail(ctx + "." + key, "missing");
  return j.at(key);
}

}  // namespace

double TargetPrior::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < locations.size(); ++i)
    for (std::size_t j = i + 1; j < locations.size(); ++j)
      best = std::min(best, (locations[i] - locations[j]).norm());
  return best;
}

void TargetPrior::validate() const {
  if (locations.size() < 2) fail("prior.locations", "need at least 2 locations");
  if (probs.size() != locations.size()) fail("prior.probs", "length must match prior.locations");
  double total = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (!(probs[k] > 0.0 && probs[k] < 1.0))
      fail("prior.probs", "entry " + std::to_string(k) + " outside (0,1)");
    total += probs[k];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "sum is " << total << ", must be 1 within 1e-12";
    fail("prior.probs", os.str());
  }
  for (const auto& u : locations)
    if (!u.allFinite()) fail("prior.locations", "non-finite coordinate");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) fail("prior.sigma2", "must be > 0");
  if (!(min_pairwise_distance() > 0.0)) fail("prior.locations", "locations must be pairwise distinct");
}

std::vector<std::vector<int>> Waveform::comb(std::size_t anchors, int offset, int stride, int count) {
  if (stride <= 0 || count <= 0) fail("waveform.allocation_rule", "stride and count must be positive");
  std::vector<std::vector<int>> sets(anchors);
  for (std::size_t m = 0; m < anchors; ++m) {
    sets[m].reserve(count);
    for (int n = 0; n < count; ++n) sets[m].push_back(offset + static_cast<int>(m) + stride * n);
  }
  return sets;
}

void Waveform::validate(std::size_t anchors) const {
  if (n_total <= 1) fail("waveform.n_total", "must be > 1");
  if (!(delta_f > 0.0)) fail("waveform.delta_f_hz", "must be > 0");
  if (allocations.size() != anchors)
    fail("waveform.allocations", "need one subcarrier set per anchor");
  std::set<int> seen;
  for (std::size_t m = 0; m < allocations.size(); ++m) {
    const auto& set = allocations[m];
    if (set.empty()) fail("waveform.allocations", "set " + std::to_string(m) + " is empty");
    for (int n : set) {
      // Both the 0-based {0..N-1} and the 1-based {1..N} conventions are accepted.
      if (n < 0 || n > n_total)
        fail("waveform.allocations", "index " + std::to_string(n) + " outside [0, n_total]");
      if (!seen.insert(n).second)
        fail("waveform.allocations", "subcarrier " + std::to_string(n) + " allocated twice");
    }
  }
}

void RadioParams::validate() const {
  if (!std::isfinite(p_dbm)) fail("radio.p_dbm", "must be finite");
  if (!std::isfinite(noise_dbm)) fail("radio.noise_dbm", "must be finite");
  if (!std::isfinite(beta0_db)) fail("radio.beta0_db", "must be finite");
  if (!(sigma_alpha2 > 0.0)) fail("radio.sigma_alpha2", "must be > 0");
  if (!(c > 0.0)) fail("radio.c", "must be > 0");
}

std::vector<double> Scenario::heights() const {
  std::vector<double> h;
  h.reserve(anchors.size());
  for (const auto& a : anchors) h.push_back(a.height);
  return h;
}

void Scenario::validate() const {
  prior.validate();
  if (anchors.size() < 4) fail("anchors", "need at least 4 anchors for 3D localization");
  for (std::size_t m = 0; m < anchors.size(); ++m) {
    if (!std::isfinite(anchors[m].height)) fail("anchors[" + std::to_string(m) + "].height", "must be finite");
    if (anchors[m].init_xy && !anchors[m].init_xy->allFinite())
      fail("anchors[" + std::to_string(m) + "].init_xy", "must be finite");
  }
  waveform.validate(anchors.size());
  radio.validate();
  if (!(range_guard > 0.0)) fail("range_guard_m", "must be > 0");
  for (std::size_t m = 0; m < anchors.size(); ++m)
    for (std::size_t k = 0; k < prior.size(); ++k)
      if (std::abs(anchors[m].height - prior.locations[k].z()) < range_guard)
        fail("anchors[" + std::to_string(m) + "].height",
             "within range_guard_m of the height of prior location " + std::to_string(k) +
                 "; the anchor could coincide with the target");
}

Scenario Scenario::with_power(double p_dbm) const {
  Scenario copy = *this;
  copy.radio.p_dbm = p_dbm;
  return copy;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double lambda_m(const Waveform& waveform, std::size_t m) {
  if (m >= waveform.allocations.size()) throw std::out_of_range("lambda_m: anchor index out of range");
  // Exact integer accumulation of n^2; fits comfortably in 64 bits for realistic N.
  long long sum = 0;
  for (int n : waveform.allocations[m]) sum += static_cast<long long>(n) * n;
  return static_cast<double>(sum) * waveform.delta_f * waveform.delta_f;
}

DerivedConstants derived_constants(const Scenario& s) {
  DerivedConstants d;
  d.p_lin = dbm_to_watts(s.radio.p_dbm);
  d.noise_lin = dbm_to_watts(s.radio.noise_dbm);
  d.beta0_lin = db_to_linear(s.radio.beta0_db);
  const double beta0_sq = d.beta0_lin * d.beta0_lin;
  const double common = d.p_lin * beta0_sq * s.radio.sigma_alpha2 / d.noise_lin;
  d.w = 8.0 * common;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  for (std::size_t m = 0; m < s.num_anchors(); ++m) {
    const double lam = lambda_m(s.waveform, m);
    d.lambda.push_back(lam);
    d.v.push_back(32.0 * pi2 * common * lam / (s.radio.c * s.radio.c));
  }
  return d;
}

Scenario parse_scenario(const nlohmann::json& j) {
  Scenario s;
  try {
    const auto& prior = require(j, "prior", "scenario");
    for (const auto& loc : require(prior, "locations", "prior")) s.prior.locations.push_back(read_vec3(loc, "prior.locations"));
    s.prior.probs = require(prior, "probs", "prior").get<std::vector<double>>();
    s.prior.sigma2 = require(prior, "sigma2", "prior").get<double>();

    for (const auto& a : require(j, "anchors", "scenario")) {
      AnchorSite site;
      site.height = require(a, "height", "anchors[]").get<double>();
      if (a.contains("init_xy") && !a.at("init_xy").is_null()) {
        const auto& xy = a.at("init_xy");
        if (!xy.is_array() || xy.size() != 2) fail("anchors[].init_xy", "expected [x, y]");
        site.init_xy = Vec2(xy[0].get<double>(), xy[1].get<double>());
      }
      s.anchors.push_back(site);
    }

    const auto& wf = require(j, "waveform", "scenario");
    s.waveform.n_total = require(wf, "n_total", "waveform").get<int>();
    s.waveform.delta_f = require(wf, "delta_f_hz", "waveform").get<double>();
    if (wf.contains("allocations")) {
      s.waveform.allocations = wf.at("allocations").get<std::vector<std::vector<int>>>();
    } else if (wf.contains("allocation_rule")) {
      const auto& rule = wf.at("allocation_rule");
      s.waveform.allocations = Waveform::comb(s.anchors.size(), require(rule, "offset", "allocation_rule").get<int>(),
                                              require(rule, "stride", "allocation_rule").get<int>(),
                                              require(rule, "count", "allocation_rule").get<int>());
    } else {
      fail("waveform", "need either allocations or allocation_rule");
    }

    const auto& radio = require(j, "radio", "scenario");
    s.radio.p_dbm = require(radio, "p_dbm", "radio").get<double>();
    s.radio.noise_dbm = require(radio, "noise_dbm", "radio").get<double>();
    s.radio.beta0_db = require(radio, "beta0_db", "radio").get<double>();
    s.radio.sigma_alpha2 = require(radio, "sigma_alpha2", "radio").get<double>();
    s.radio.c = radio.value("c", kSpeedOfLight);
    s.range_guard = j.value("range_guard_m", kDefaultRangeGuard);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  auto& locs = j["prior"]["locations"] = nlohmann::json::array();
  for (const auto& u : s.prior.locations) locs.push_back({u.x(), u.y(), u.z()});
  j["prior"]["probs"] = s.prior.probs;
  j["prior"]["sigma2"] = s.prior.sigma2;
  auto& anchors = j["anchors"] = nlohmann::json::array();
  for (const auto& a : s.anchors) {
    nlohmann::json site{{"height", a.height}};
    if (a.init_xy) site["init_xy"] = {a.init_xy->x(), a.init_xy->y()};
    anchors.push_back(site);
  }
  j["waveform"] = {{"n_total", s.waveform.n_total},
                   {"delta_f_hz", s.waveform.delta_f},
                   {"allocations", s.waveform.allocations}};
  j["radio"] = {{"p_dbm", s.radio.p_dbm},
                {"noise_dbm", s.radio.noise_dbm},
                {"beta0_db", s.radio.beta0_db},
                {"sigma_alpha2", s.radio.sigma_alpha2},
                {"c", s.radio.c}};
  j["range_guard_m"] = s.range_guard;
  return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("scenario file " + path.string() + " does not parse: " + e.what());
  }
  return parse_scenario(j);
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write scenario file: " + path.string());
  out << to_json(s).dump(2) << '\n';
}

}  // namespace anchorplace
