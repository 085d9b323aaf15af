#pragma once

// Slot-level simulator: vehicle pairs on the road grid, channel states,
// arrivals, AoI, periodic regrouping and per-slot QoE accounting.

#include <cstdint>
#include <vector>

#include "aoirrm/clustering.hpp"
#include "aoirrm/config.hpp"
#include "aoirrm/mdp.hpp"
#include "aoirrm/mobility.hpp"
#include "aoirrm/phy.hpp"

namespace aoirrm::sim {

/// Independent randomness streams of one run.
enum Stream : std::uint64_t { mobility_stream = 0, arrival_stream = 1, cluster_stream = 2,
                              policy_stream = 3, training_stream = 4, init_stream = 5 };

struct StepResult {
  std::vector<double> power_w;
  std::vector<double> drops;
  std::vector<double> aoi_slots;  // AoI entering the slot, as used by the utility
  std::vector<double> utility;
  double mean_power_w = 0.0;
  double mean_drops = 0.0;
  double mean_aoi_slots = 0.0;
  double mean_utility = 0.0;
};

class Environment {
 public:
  Environment(const ExperimentConfig& cfg, std::uint64_t seed);

  int pairs() const { return static_cast<int>(states_.size()); }
  int bands() const { return cfg_.bands; }
  std::int64_t slot() const { return slot_; }

  const std::vector<mdp::VuePairState>& states() const { return states_; }
  const std::vector<mdp::Observation>& observations() const { return observations_; }
  const std::vector<mobility::LinkClass>& link_classes() const { return links_; }
  const clustering::GroupAssignment& grouping() const { return grouping_; }
  std::vector<mdp::Feasibility> feasibility() const;

  /// Applies a decision for the current slot and advances to the next one.
  /// Throws mdp::DecisionError if the decision violates any constraint.
  StepResult step(const mdp::Decision& d);

  Rng& policy_rng() { return policy_rng_; }
  const mobility::RoadMap& map() const { return map_; }
  const ExperimentConfig& config() const { return cfg_; }
  const phy::PhyParams& phy() const { return phy_; }
  const phy::TrafficParams& traffic() const { return traffic_; }

 private:
  void refresh_channels();
  void regroup();

  ExperimentConfig cfg_;
  phy::PhyParams phy_;
  phy::TrafficParams traffic_;
  mobility::RoadMap map_;
  Rng mobility_rng_, arrival_rng_, cluster_rng_, policy_rng_;
  std::vector<mobility::VehicleTrace> traces_;
  std::vector<mdp::VuePairState> states_;
  std::vector<mdp::Observation> observations_;
  std::vector<mobility::LinkClass> links_;
  std::vector<int> capacity_;
  clustering::GroupAssignment grouping_;
  std::int64_t slot_ = 0;
};

}  // namespace aoirrm::sim
