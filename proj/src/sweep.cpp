#include "anchorplace/sweep.hpp"

#include <cmath>
#include <limits>

namespace anchorplace {

PowerSweep power_sweep(const Scenario& base, const std::vector<double>& powers, const SweepOptions& options) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const FimMatrix f_prior = default_prior_fim(base.prior);
  PowerSweep out;
  out.circle = circle_placement(base, options.r0, options.phase);
  out.fermat_weber = sequential_fw_placement(base);
  std::vector<Vec2> warm;
  for (double pdbm : powers) {
    const Scenario s = base.with_power(pdbm);
    SweepRow row{pdbm, nan, nan, nan};
    try {
      row.pcrb_bench1 = pcrb(s, Placement::build(s, out.circle.xy), f_prior).pcrb;
      row.pcrb_bench2 = pcrb(s, Placement::build(s, out.fermat_weber.xy), f_prior).pcrb;
      MultiStartOptions o = options.multi_start;
      if (!warm.empty()) o.extra_starts.push_back(warm);
      const ProblemData p = ProblemData::from(s, f_prior);
      const MultiStartResult res = optimize(s, p, o);
      warm = recover_locations(p, res.best_run());
      row.pcrb_proposed = pcrb(s, Placement::build(s, warm), f_prior).pcrb;
      if (!res.any_converged) out.all_converged = false;
    } catch (const NumericalError& e) {
      out.warnings.push_back(format_double(pdbm) + " dBm: " + e.what());
      out.all_converged = false;
      warm.clear();
    }
    out.rows.push_back(row);
    out.proposed.push_back(warm);
  }
  return out;
}

SweepGaps sweep_gaps(const std::vector<SweepRow>& rows, double level) {
  std::vector<double> pp, prop, b1, b2;
  SweepGaps g;
  g.level = level;
  for (const auto& r : rows) {
    pp.push_back(r.p_dbm);
    prop.push_back(r.pcrb_proposed);
    b1.push_back(r.pcrb_bench1);
    b2.push_back(r.pcrb_bench2);
    if (!(r.pcrb_proposed < r.pcrb_bench2 && r.pcrb_bench2 < r.pcrb_bench1)) g.ordering_failures.push_back(r.p_dbm);
  }
  g.ordering_everywhere = g.ordering_failures.empty();
  g.p_dbm_proposed = crossing_power(pp, prop, level);
  double c1 = crossing_power(pp, b1, level), c2 = crossing_power(pp, b2, level);
  g.bench1_extrapolated = std::isnan(c1);
  g.bench2_extrapolated = std::isnan(c2);
  if (g.bench1_extrapolated) c1 = extrapolated_crossing(pp, b1, level);
  if (g.bench2_extrapolated) c2 = extrapolated_crossing(pp, b2, level);
  g.gap_bench1_db = c1 - g.p_dbm_proposed;
  g.gap_bench2_db = c2 - g.p_dbm_proposed;
  return g;
}

}  // namespace anchorplace
