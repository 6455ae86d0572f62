#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "anchorplace/scenario.hpp"

namespace testing_support {

inline std::string data_path(const std::string& name) { return std::string(ANCHORPLACE_DATA_DIR) + "/" + name; }

inline anchorplace::Scenario paper_scenario() { return anchorplace::load_scenario(data_path("paper_scenario.json")); }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("anchorplace_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Uniform horizontal positions over the paper scene's bounding box with a margin.
inline std::vector<anchorplace::Vec2> random_xy(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> ux(-10.0, 55.0), uy(-10.0, 35.0);
  std::vector<anchorplace::Vec2> xy;
  for (std::size_t i = 0; i < m; ++i) xy.emplace_back(ux(rng), uy(rng));
  return xy;
}

}  // namespace testing_support
