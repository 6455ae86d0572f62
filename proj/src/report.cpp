#include "anchorplace/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

namespace anchorplace {

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},       {"scenario", scenario_path}, {"scenario_sha1", scenario_hash},
          {"seed", seed},             {"tolerances", tolerances},  {"outputs", outputs}};
}

std::string RunManifest::csv_preamble() const {
  std::ostringstream os;
  os << "# command: " << command << '\n';
  os << "# scenario: " << scenario_path << '\n';
  os << "# scenario_sha1: " << scenario_hash << '\n';
  os << "# seed: " << seed << '\n';
  os << "# tolerances: " << tolerances.dump() << '\n';
  return os.str();
}

RunManifest make_manifest(std::string command, const std::filesystem::path& scenario_path, std::uint64_t seed) {
  RunManifest m;
  m.command = std::move(command);
  m.scenario_path = scenario_path.string();
  m.scenario_hash = git_blob_sha1(read_file(scenario_path));
  m.seed = seed;
  return m;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::json placement_json(const std::string& name, const std::vector<Vec2>& xy, const std::vector<double>& heights) {
  nlohmann::json anchors = nlohmann::json::array();
  for (std::size_t m = 0; m < xy.size(); ++m)
    anchors.push_back({{"x", xy[m].x()}, {"y", xy[m].y()}, {"z", heights.at(m)}});
  return {{"name", name}, {"anchors", anchors}};
}

std::vector<Vec2> parse_placement(const nlohmann::json& j, std::size_t anchors) {
  try {
    if (!j.contains("anchors") || !j.at("anchors").is_array()) throw ValidationError("placement.anchors: missing");
    const auto& arr = j.at("anchors");
    if (arr.size() != anchors)
      throw ValidationError("placement.anchors: expected " + std::to_string(anchors) + " entries, got " +
                            std::to_string(arr.size()));
    std::vector<Vec2> xy;
    for (const auto& a : arr) {
      const Vec2 p(a.at("x").get<double>(), a.at("y").get<double>());
      if (!p.allFinite()) throw ValidationError("placement.anchors: non-finite coordinate");
      xy.push_back(p);
    }
    return xy;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("placement: ") + e.what());
  }
}

std::vector<Vec2> load_placement(const std::filesystem::path& path, std::size_t anchors) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open placement file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("placement file " + path.string() + " does not parse: " + e.what());
  }
  return parse_placement(j, anchors);
}

namespace {

nlohmann::json mat_json(const Mat3& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return rows;
}

}  // namespace

nlohmann::json pcrb_report_json(const PcrbReport& r) {
  nlohmann::json xi = nlohmann::json::array();
  for (std::size_t m = 0; m < r.xi.rows(); ++m) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < r.xi.cols(); ++k) row.push_back(r.xi(m, k));
    xi.push_back(row);
  }
  return {{"pcrb", r.pcrb}, {"f_obs", mat_json(r.f_obs.value)}, {"f_prior", mat_json(r.f_prior.value)}, {"xi_bar", xi}};
}

std::string pcrb_report_csv(const PcrbReport& r) {
  std::ostringstream os;
  os << "quantity,i,j,value\n";
  os << "pcrb,,," << format_double(r.pcrb) << '\n';
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) os << "f_obs," << i << ',' << j << ',' << format_double(r.f_obs.value(i, j)) << '\n';
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) os << "f_prior," << i << ',' << j << ',' << format_double(r.f_prior.value(i, j)) << '\n';
  for (std::size_t m = 0; m < r.xi.rows(); ++m)
    for (std::size_t k = 0; k < r.xi.cols(); ++k) os << "xi_bar," << m << ',' << k << ',' << format_double(r.xi(m, k)) << '\n';
  return os.str();
}

nlohmann::json trace_json(const IterationTrace& t) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : t.records)
    recs.push_back({{"iter", r.iter},
                    {"objective", r.objective},
                    {"true_pcrb", r.true_pcrb},
                    {"max_constraint_slack", r.max_constraint_slack},
                    {"kkt_residual", r.kkt_residual},
                    {"newton_iters", r.subproblem.newton_iters},
                    {"barrier_stages", r.subproblem.barrier_stages},
                    {"final_gap", r.subproblem.final_gap}});
  nlohmann::json j{{"records", recs}, {"converged", t.converged}, {"stop_reason", t.stop_reason}};
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

std::string trace_csv(const IterationTrace& t) {
  std::ostringstream os;
  os << "iter,objective,true_pcrb,kkt_residual,newton_iters\n";
  for (const auto& r : t.records)
    os << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.true_pcrb) << ','
       << format_double(r.kkt_residual) << ',' << r.subproblem.newton_iters << '\n';
  return os.str();
}

double crossing_power(const std::vector<double>& p_dbm, const std::vector<double>& pcrb, double level) {
  const double target = std::log10(level);
  for (std::size_t i = 0; i + 1 < p_dbm.size(); ++i) {
    const double a = std::log10(pcrb[i]), b = std::log10(pcrb[i + 1]);
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    if ((a - target) * (b - target) <= 0.0 && a != b)
      return p_dbm[i] + (target - a) / (b - a) * (p_dbm[i + 1] - p_dbm[i]);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double extrapolated_crossing(const std::vector<double>& p, const std::vector<double>& y, double level) {
  const std::size_t n = p.size();
  if (n < 2 || !(y[n - 1] > level) || !(y[n - 1] < y[n - 2])) return std::numeric_limits<double>::quiet_NaN();
  const double slope = (std::log10(y[n - 1]) - std::log10(y[n - 2])) / (p[n - 1] - p[n - 2]);
  return p[n - 1] + (std::log10(level) - std::log10(y[n - 1])) / slope;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "p_dbm,pcrb_proposed,pcrb_bench1,pcrb_bench2\n";
  for (const auto& r : rows)
    os << format_double(r.p_dbm) << ',' << format_double(r.pcrb_proposed) << ',' << format_double(r.pcrb_bench1) << ','
       << format_double(r.pcrb_bench2) << '\n';
  return os.str();
}

std::string svg_log_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series) {
  constexpr double W = 640, H = 420, left = 80, right = 160, top = 40, bottom = 60;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, std::log10(s.y[i]));
      y1 = std::max(y1, std::log10(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  y0 = std::floor(y0);
  y1 = std::ceil(y1);
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double ly) { return top + (y1 - ly) / (y1 - y0) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(e) << "\" y2=\"" << py(e)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = x0 + (x1 - x0) * i / 5.0;
    os << "<text x=\"" << px(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << x << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << top + ph / 2
     << ")\">" << y_label << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* col = colors[si % 5];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.y[i] > 0.0 && std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(std::log10(s.y[i])) << ' ';
    os << "\"/>\n";
    const double ly = top + 20 + 20 * static_cast<double>(si);
    os << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

nlohmann::json fim_mc_json(const FimMcEstimate& est, const FimBlocks& printed, const FimBlocks& signal_model) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t m = 0; m < est.xi.size(); ++m)
    rows.push_back({{"anchor", m},
                    {"xi_mc", est.xi[m]},
                    {"xi_se", est.xi_se[m]},
                    {"xi_closed", printed.xi[m]},
                    {"xi_closed_per_subcarrier_power", signal_model.xi[m]},
                    {"wbar_mc", est.wbar[m]},
                    {"wbar_se", est.wbar_se[m]},
                    {"wbar_imag_mc", est.wbar_imag[m]},
                    {"wbar_closed", printed.wbar[m]}});
  return {{"n_trials", est.n_trials}, {"anchors", rows}, {"max_offdiag_z", est.max_offdiag_z}};
}

nlohmann::json mse_json(const MseReport& r) {
  return {{"n_trials", r.n_trials},
          {"mse", r.mse},
          {"mse_se", r.mse_se},
          {"mse_lower_99", r.lower_99},
          {"detection_rate", r.detection_rate},
          {"pcrb", r.pcrb},
          {"mse_ge_pcrb", r.bound_holds},
          {"note", "one-sided check: the discrete MAP estimator is biased toward the prior and the bound is "
                   "computed for the Gaussian-mixture-smoothed prior"}};
}

}  // namespace anchorplace
