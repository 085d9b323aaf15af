#pragma once

// CSV output. Doubles are written in shortest round-trip form so parsing a
// report reproduces the in-memory values exactly.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aoirrm/harness.hpp"

namespace aoirrm::report {

std::string format_double(double v);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for n < 2
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

inline constexpr const char* kMetricsHeader =
    "sweep_param,sweep_value,policy,seed,slot,avg_power_w,avg_drops,avg_aoi_slots,avg_aoi_s,"
    "avg_utility";
inline constexpr const char* kSummaryHeader = "sweep_param,sweep_value,policy,metric,mean,stddev,n";

struct MetricsRow {
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string policy;
  std::uint64_t seed = 0;
  int slot = 0;
  double avg_power_w = 0.0;
  double avg_drops = 0.0;
  double avg_aoi_slots = 0.0;
  double avg_aoi_s = 0.0;
  double avg_utility = 0.0;
};

/// Long format: one row per (cell, slot).
void write_metrics_csv(std::ostream& os, const std::vector<harness::SweepCell>& cells,
                       double slot_s);

/// Mean and stddev across seeds of per-seed episode means, per (value, policy, metric).
void write_summary_csv(std::ostream& os, const std::vector<harness::SweepCell>& cells);

std::vector<MetricsRow> parse_metrics_csv(std::istream& is);

void write_loss_csv(std::ostream& os, const std::vector<std::pair<int, double>>& loss);

}  // namespace aoirrm::report
