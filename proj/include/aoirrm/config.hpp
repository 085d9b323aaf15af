#pragma once

// Experiment configuration. Loaded from a JSON object whose keys are exactly
// the field names below; unknown keys are rejected.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "aoirrm/clustering.hpp"
#include "aoirrm/mdp.hpp"
#include "aoirrm/mobility.hpp"
#include "aoirrm/phy.hpp"

namespace aoirrm {

struct ExperimentConfig {
  // geometry and mobility
  double side_length_m = 250.0;
  int intersections_per_axis = 3;
  double lane_width_m = 4.0;
  double speed_mps = 60.0 / 3.6;

  // scenario
  int pairs = 56;                // K
  int bands = 5;                 // B
  int groups = 10;               // G
  double pair_distance_m = 50.0; // ell
  double arrival_rate = 5.0;     // lambda, packets per slot

  // channel and power
  double phi_db = -68.5;
  double rho_db = -54.5;
  double eta = 1.61;
  double ell0_m = 15.0;
  double psi = 1.0;
  double bandwidth_hz = 800e3;
  double noise_psd_dbm_per_hz = -174.0;
  double interference_w = -1.0;  // negative: equal to the noise power
  double slot_s = 3e-3;
  double packet_bits = 2000.0;
  double p_max_w = 2.0;

  // queue and AoI caps
  int x_max = 15;
  int r_max_global = 15;
  int a_max_slots = 100;

  // clustering
  double zeta_m = 150.0;
  double varrho_m = 30.0;
  int recluster_period = 1;

  // utility
  double vartheta = 2.0;
  double xi = 0.9;
  std::string aoi_utility_units = "slots";

  // learning
  double gamma = 0.9;
  int window = 10;             // N
  int replay_capacity = 5000;  // M
  int batch_size = 200;        // M~
  int hidden_units = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int target_sync_period = 100;
  int warmup_experiences = -1;  // negative: max(batch_size, 500)
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.6;
  int total_slots = 20000;
  bool plateau_stop = false;
  int plateau_window = 2000;
  double plateau_tolerance = 1e-3;

  // evaluation and seeding
  std::uint64_t seed = 1;
  int eval_slots = 5000;

  phy::PhyParams phy_params() const;
  phy::TrafficParams traffic_params() const;
  mobility::MapConfig map_config() const;
  clustering::ClusterConfig cluster_config() const;
  mdp::AoiUnits aoi_units() const;
  int effective_warmup() const;
};

/// Throws ConfigError naming the first violated constraint.
void validate(const ExperimentConfig& c);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

/// Sets one field by name from a JSON value (used by sweeps and overrides).
void set_field(ExperimentConfig& c, const std::string& key, const nlohmann::json& value);

/// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const ExperimentConfig& c);

}  // namespace aoirrm
