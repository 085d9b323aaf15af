#include "aoirrm/environment.hpp"

#include <numeric>

namespace aoirrm::sim {

Environment::Environment(const ExperimentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      phy_(cfg.phy_params()),
      traffic_(cfg.traffic_params()),
      map_(mobility::build_map(cfg.map_config())),
      mobility_rng_(make_stream(seed, mobility_stream)),
      arrival_rng_(make_stream(seed, arrival_stream)),
      cluster_rng_(make_stream(seed, cluster_stream)),
      policy_rng_(make_stream(seed, policy_stream)) {
  validate(cfg_);
  const auto k = static_cast<std::size_t>(cfg_.pairs);
  traces_.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    traces_.push_back(mobility::spawn_vehicle(map_, cfg_.pair_distance_m, mobility_rng_));
  }
  states_.resize(k);
  observations_.resize(k);
  links_.resize(k);
  capacity_.resize(k);
  for (auto& s : states_) {
    s.aoi_slots = 1;
    s.arrivals = phy::sample_arrivals(traffic_, arrival_rng_);
  }
  refresh_channels();
  regroup();
}

void Environment::refresh_channels() {
  for (std::size_t i = 0; i < traces_.size(); ++i) {
    const auto g = mobility::pair_geometry(traces_[i], cfg_.pair_distance_m);
    auto& s = states_[i];
    s.vtx_position = g.vtx_position;
    s.vrx_position = g.vrx_position;
    links_[i] = mobility::classify_link(map_, g.vtx_position, g.vrx_position, phy_.ell0_m);
    s.gain = phy::channel_gain(links_[i], g.vtx_position, g.vrx_position, phy_);
    capacity_[i] = phy::max_packets(s.gain, 1, phy_, traffic_.r_max_global);
  }
}

void Environment::regroup() {
  std::vector<Vec2> mids;
  mids.reserve(states_.size());
  for (const auto& s : states_) mids.push_back(midpoint(s.vtx_position, s.vrx_position));
  grouping_ = clustering::cluster_groups(mids, cfg_.groups, cfg_.cluster_config(), cluster_rng_);
}

std::vector<mdp::Feasibility> Environment::feasibility() const {
  std::vector<mdp::Feasibility> f(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) f[i] = {states_[i].arrivals, capacity_[i]};
  return f;
}

StepResult Environment::step(const mdp::Decision& d) {
  mdp::check_decision(d, grouping_, cfg_.bands, feasibility());
  const std::size_t k = states_.size();
  StepResult r;
  r.power_w.resize(k);
  r.drops.resize(k);
  r.aoi_slots.resize(k);
  r.utility.resize(k);
  const bool seconds = cfg_.aoi_units() == mdp::AoiUnits::seconds;
  for (std::size_t i = 0; i < k; ++i) {
    auto& s = states_[i];
    const int f = d.band_flag[i];
    const int n = d.scheduled[i];
    r.power_w[i] = phy::tx_power(s.gain, f, n, phy_);
    r.drops[i] = phy::packet_drops(s.arrivals, f, n);
    r.aoi_slots[i] = s.aoi_slots;
    const double aoi = seconds ? s.aoi_slots * phy_.slot_s : s.aoi_slots;
    r.utility[i] = mdp::utility(r.power_w[i], r.drops[i], aoi, cfg_.vartheta, cfg_.xi);
    s.aoi_slots = phy::advance_aoi(s.aoi_slots, f, n, traffic_.a_max_slots);
    observations_[i] = {f, n};
  }
  const double inv = 1.0 / static_cast<double>(k);
  r.mean_power_w = std::accumulate(r.power_w.begin(), r.power_w.end(), 0.0) * inv;
  r.mean_drops = std::accumulate(r.drops.begin(), r.drops.end(), 0.0) * inv;
  r.mean_aoi_slots = std::accumulate(r.aoi_slots.begin(), r.aoi_slots.end(), 0.0) * inv;
  r.mean_utility = std::accumulate(r.utility.begin(), r.utility.end(), 0.0) * inv;

  for (auto& t : traces_) t = mobility::step_vehicle(map_, std::move(t), cfg_.speed_mps, phy_.slot_s, mobility_rng_);
  for (auto& s : states_) s.arrivals = phy::sample_arrivals(traffic_, arrival_rng_);
  refresh_channels();
  ++slot_;
  if (slot_ % cfg_.recluster_period == 0) regroup();
  return r;
}

}  // namespace aoirrm::sim
