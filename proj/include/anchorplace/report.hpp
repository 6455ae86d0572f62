#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anchorplace/baselines.hpp"
#include "anchorplace/optimizer.hpp"
#include "anchorplace/pcrb.hpp"
#include "anchorplace/simulate.hpp"

namespace anchorplace {

/// SHA-1 of "blob <size>\0<bytes>", as printed by `git hash-object`.
std::string git_blob_sha1(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

struct RunManifest {
  std::string command;
  std::string scenario_path;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  nlohmann::json tolerances = nlohmann::json::object();
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
  /// "# key: value" lines placed ahead of the CSV header.
  std::string csv_preamble() const;
};

/// Manifest with the content hash of the scenario file's bytes.
RunManifest make_manifest(std::string command, const std::filesystem::path& scenario_path, std::uint64_t seed = 0);

/// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_double(double x);

// Placements: {"name": ..., "anchors": [{"x": .., "y": .., "z": ..}, ...]}
nlohmann::json placement_json(const std::string& name, const std::vector<Vec2>& xy, const std::vector<double>& heights);
std::vector<Vec2> parse_placement(const nlohmann::json& j, std::size_t anchors);
std::vector<Vec2> load_placement(const std::filesystem::path& path, std::size_t anchors);

nlohmann::json pcrb_report_json(const PcrbReport& r);
std::string pcrb_report_csv(const PcrbReport& r);

nlohmann::json trace_json(const IterationTrace& t);
/// Columns: iter,objective,true_pcrb,kkt_residual,newton_iters
std::string trace_csv(const IterationTrace& t);

struct SweepRow {
  double p_dbm = 0.0;
  double pcrb_proposed = 0.0;
  double pcrb_bench1 = 0.0;
  double pcrb_bench2 = 0.0;
};

/// Power at which the curve crosses `level`, by linear interpolation of log10(pcrb) in dBm; NaN if never.
double crossing_power(const std::vector<double>& p_dbm, const std::vector<double>& pcrb, double level);

/// Log-linear extension through the last two points when the curve ends above `level`; NaN otherwise.
double extrapolated_crossing(const std::vector<double>& p_dbm, const std::vector<double>& pcrb, double level);

/// Columns: p_dbm,pcrb_proposed,pcrb_bench1,pcrb_bench2
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct ChartSeries {
  std::string label;
  std::vector<double> x, y;
};
/// Line chart with a log10 y axis.
std::string svg_log_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series);

nlohmann::json fim_mc_json(const FimMcEstimate& est, const FimBlocks& printed, const FimBlocks& signal_model);
nlohmann::json mse_json(const MseReport& r);

}  // namespace anchorplace
