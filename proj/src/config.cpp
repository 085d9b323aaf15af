#include "aoirrm/config.hpp"

#include <fstream>
#include <sstream>

namespace aoirrm {

namespace {

template <typename Config, typename F>
void for_each_field(Config& c, F&& f) {
  f("side_length_m", c.side_length_m);
  f("intersections_per_axis", c.intersections_per_axis);
  f("lane_width_m", c.lane_width_m);
  f("speed_mps", c.speed_mps);
  f("pairs", c.pairs);
  f("bands", c.bands);
  f("groups", c.groups);
  f("pair_distance_m", c.pair_distance_m);
  f("arrival_rate", c.arrival_rate);
  f("phi_db", c.phi_db);
  f("rho_db", c.rho_db);
  f("eta", c.eta);
  f("ell0_m", c.ell0_m);
  f("psi", c.psi);
  f("bandwidth_hz", c.bandwidth_hz);
  f("noise_psd_dbm_per_hz", c.noise_psd_dbm_per_hz);
  f("interference_w", c.interference_w);
  f("slot_s", c.slot_s);
  f("packet_bits", c.packet_bits);
  f("p_max_w", c.p_max_w);
  f("x_max", c.x_max);
  f("r_max_global", c.r_max_global);
  f("a_max_slots", c.a_max_slots);
  f("zeta_m", c.zeta_m);
  f("varrho_m", c.varrho_m);
  f("recluster_period", c.recluster_period);
  f("vartheta", c.vartheta);
  f("xi", c.xi);
  f("aoi_utility_units", c.aoi_utility_units);
  f("gamma", c.gamma);
  f("window", c.window);
  f("replay_capacity", c.replay_capacity);
  f("batch_size", c.batch_size);
  f("hidden_units", c.hidden_units);
  f("learning_rate", c.learning_rate);
  f("adam_beta1", c.adam_beta1);
  f("adam_beta2", c.adam_beta2);
  f("adam_eps", c.adam_eps);
  f("target_sync_period", c.target_sync_period);
  f("warmup_experiences", c.warmup_experiences);
  f("epsilon_start", c.epsilon_start);
  f("epsilon_end", c.epsilon_end);
  f("epsilon_decay_fraction", c.epsilon_decay_fraction);
  f("total_slots", c.total_slots);
  f("plateau_stop", c.plateau_stop);
  f("plateau_window", c.plateau_window);
  f("plateau_tolerance", c.plateau_tolerance);
  f("seed", c.seed);
  f("eval_slots", c.eval_slots);
}

template <typename T>
void assign(T& field, const nlohmann::json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key + ": expected a boolean");
      field = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(key + ": expected a string");
      field = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {
        // allow integral floats such as 5.0
        if (!v.is_number() || v.get<double>() != static_cast<double>(static_cast<T>(v.get<double>()))) {
          throw ConfigError(key + ": expected an integer");
        }
        field = static_cast<T>(v.get<double>());
      } else {
        field = v.get<T>();
      }
    } else {
      if (!v.is_number()) throw ConfigError(key + ": expected a number");
      field = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid configuration: " + what);
}

}  // namespace

phy::PhyParams ExperimentConfig::phy_params() const {
  phy::PhyParams p;
  p.phi = db_to_linear(phi_db);
  p.rho = db_to_linear(rho_db);
  p.eta = eta;
  p.ell0_m = ell0_m;
  p.psi = psi;
  p.bandwidth_hz = bandwidth_hz;
  p.noise_psd_w_per_hz = dbm_to_watts(noise_psd_dbm_per_hz);
  p.slot_s = slot_s;
  p.packet_bits = packet_bits;
  p.p_max_w = p_max_w;
  p.interference_w = interference_w < 0.0 ? p.noise_w() : interference_w;
  return p;
}

phy::TrafficParams ExperimentConfig::traffic_params() const {
  return {arrival_rate, x_max, r_max_global, a_max_slots};
}

mobility::MapConfig ExperimentConfig::map_config() const {
  return {side_length_m, intersections_per_axis, lane_width_m};
}

clustering::ClusterConfig ExperimentConfig::cluster_config() const { return {zeta_m, varrho_m}; }

mdp::AoiUnits ExperimentConfig::aoi_units() const {
  return aoi_utility_units == "seconds" ? mdp::AoiUnits::seconds : mdp::AoiUnits::slots;
}

int ExperimentConfig::effective_warmup() const {
  return warmup_experiences >= 0 ? warmup_experiences : std::max(batch_size, 500);
}

void validate(const ExperimentConfig& c) {
  phy::validate(c.phy_params());
  phy::validate(c.traffic_params());
  (void)mobility::build_map(c.map_config());
  require(c.groups > 1, "groups must exceed 1");
  require(c.bands >= 0, "bands must be non-negative");
  require(c.pairs >= c.groups, "pairs must be at least groups");
  require(c.pair_distance_m > 0.0, "pair_distance_m must be positive");
  require(c.speed_mps >= 0.0, "speed_mps must be non-negative");
  require(c.zeta_m > 0.0 && c.varrho_m > 0.0, "zeta_m and varrho_m must be positive");
  require(c.recluster_period >= 1, "recluster_period must be at least 1");
  require(c.vartheta >= 0.0 && c.xi >= 0.0, "utility weights must be non-negative");
  require(c.aoi_utility_units == "slots" || c.aoi_utility_units == "seconds",
          "aoi_utility_units must be \"slots\" or \"seconds\"");
  require(c.gamma >= 0.0 && c.gamma < 1.0, "gamma must lie in [0, 1)");
  require(c.window >= 1, "window must be at least 1");
  require(c.replay_capacity >= 1, "replay_capacity must be positive");
  require(c.batch_size >= 1 && c.batch_size <= c.replay_capacity,
          "batch_size must lie in [1, replay_capacity]");
  require(c.hidden_units >= 1, "hidden_units must be positive");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(c.adam_eps > 0.0, "adam_eps must be positive");
  require(c.target_sync_period >= 1, "target_sync_period must be at least 1");
  require(c.effective_warmup() <= c.replay_capacity, "warmup_experiences exceeds replay_capacity");
  require(c.epsilon_start >= 0.0 && c.epsilon_start <= 1.0 && c.epsilon_end >= 0.0 &&
              c.epsilon_end <= 1.0,
          "epsilon values must lie in [0, 1]");
  require(c.epsilon_decay_fraction >= 0.0 && c.epsilon_decay_fraction <= 1.0,
          "epsilon_decay_fraction must lie in [0, 1]");
  require(c.total_slots >= 1, "total_slots must be positive");
  require(c.plateau_window >= 1 && c.plateau_tolerance >= 0.0, "invalid plateau settings");
  require(c.eval_slots >= 1, "eval_slots must be positive");
}

void set_field(ExperimentConfig& c, const std::string& key, const nlohmann::json& value) {
  bool found = false;
  for_each_field(c, [&](const char* name, auto& field) {
    if (key == name) {
      assign(field, value, key);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown configuration key: " + key);
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) set_field(c, key, value);
  validate(c);
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for_each_field(c, [&](const char* name, const auto& field) { j[name] = field; });
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration file " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace aoirrm
