#include "aoirrm/report.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace aoirrm::report {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<harness::SweepCell>& cells,
                       double slot_s) {
  os << kMetricsHeader << '\n';
  for (const auto& c : cells) {
    const std::string prefix = c.param + ',' + format_double(c.value) + ',' +
                               harness::to_string(c.policy) + ',' + std::to_string(c.seed) + ',';
    for (std::size_t j = 0; j < c.result.slots.size(); ++j) {
      const auto& m = c.result.slots[j];
      os << prefix << j << ',' << format_double(m.power_w) << ',' << format_double(m.drops) << ','
         << format_double(m.aoi_slots) << ',' << format_double(m.aoi_slots * slot_s) << ','
         << format_double(m.utility) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const std::vector<harness::SweepCell>& cells) {
  os << kSummaryHeader << '\n';
  // preserve first-appearance order of (value, policy)
  std::vector<std::tuple<std::string, double, harness::PolicyKind>> order;
  std::map<std::tuple<std::string, double, int>, std::vector<const harness::EpisodeSummary*>> groups;
  for (const auto& c : cells) {
    const auto key = std::make_tuple(c.param, c.value, static_cast<int>(c.policy));
    auto& g = groups[key];
    if (g.empty()) order.emplace_back(c.param, c.value, c.policy);
    g.push_back(&c.result.summary);
  }
  using Getter = double (*)(const harness::EpisodeSummary&);
  const std::pair<const char*, Getter> metrics[] = {
      {"avg_power_w", [](const harness::EpisodeSummary& s) { return s.power_w; }},
      {"avg_drops", [](const harness::EpisodeSummary& s) { return s.drops; }},
      {"avg_aoi_slots", [](const harness::EpisodeSummary& s) { return s.aoi_slots; }},
      {"avg_aoi_s", [](const harness::EpisodeSummary& s) { return s.aoi_s; }},
      {"avg_utility", [](const harness::EpisodeSummary& s) { return s.utility; }},
  };
  for (const auto& [param, value, policy] : order) {
    const auto& g = groups[std::make_tuple(param, value, static_cast<int>(policy))];
    for (const auto& [name, get] : metrics) {
      std::vector<double> xs;
      for (const auto* s : g) xs.push_back(get(*s));
      const MeanStd ms = mean_std(xs);
      os << param << ',' << format_double(value) << ',' << harness::to_string(policy) << ','
         << name << ',' << format_double(ms.mean) << ',' << format_double(ms.stddev) << ','
         << ms.n << '\n';
    }
  }
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error("metrics CSV: bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw Error("metrics CSV: missing or unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw Error("metrics CSV: expected 10 fields, got " + std::to_string(f.size()));
    MetricsRow r;
    r.sweep_param = f[0];
    r.sweep_value = parse_double(f[1]);
    r.policy = f[2];
    r.seed = std::stoull(f[3]);
    r.slot = std::stoi(f[4]);
    r.avg_power_w = parse_double(f[5]);
    r.avg_drops = parse_double(f[6]);
    r.avg_aoi_slots = parse_double(f[7]);
    r.avg_aoi_s = parse_double(f[8]);
    r.avg_utility = parse_double(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_loss_csv(std::ostream& os, const std::vector<std::pair<int, double>>& loss) {
  os << "slot,loss\n";
  for (const auto& [slot, v] : loss) os << slot << ',' << format_double(v) << '\n';
}

}  // namespace aoirrm::report
