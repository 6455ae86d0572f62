#pragma once

#include <string>
#include <vector>

#include "anchorplace/baselines.hpp"
#include "anchorplace/optimizer.hpp"
#include "anchorplace/report.hpp"

namespace anchorplace {

struct SweepOptions {
  double r0 = 2.0;     // benchmark I circle radius, m
  double phase = 0.0;  // benchmark I circle phase, rad
  MultiStartOptions multi_start;
};

struct PowerSweep {
  std::vector<SweepRow> rows;
  std::vector<std::vector<Vec2>> proposed;  // best placement per power (empty on failure)
  BenchmarkPlacement circle;
  BenchmarkPlacement fermat_weber;
  std::vector<std::string> warnings;
  bool all_converged = true;
};

/// Proposed scheme and both benchmarks over `powers`, sharing one prior FIM.
/// Each power's multi-start also runs from the previous power's optimum.
PowerSweep power_sweep(const Scenario& base, const std::vector<double>& powers, const SweepOptions& options = {});

struct SweepGaps {
  double level = 1e-4;
  double p_dbm_proposed = 0.0;
  double gap_bench1_db = 0.0;
  double gap_bench2_db = 0.0;
  bool bench1_extrapolated = false;
  bool bench2_extrapolated = false;
  bool ordering_everywhere = false;  // proposed < bench2 < bench1 at every row
  std::vector<double> ordering_failures;  // powers where it does not hold
};

/// Power gaps at `level`; benchmarks that never reach it are extrapolated.
SweepGaps sweep_gaps(const std::vector<SweepRow>& rows, double level = 1e-4);

}  // namespace anchorplace
