#pragma once

// Decision rules, episode runner, offline training loop and parameter sweeps.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aoirrm/config.hpp"
#include "aoirrm/drqn.hpp"
#include "aoirrm/environment.hpp"

namespace aoirrm::harness {

enum class PolicyKind { proposed, channel_aware, packet_aware, aoi_aware, random };

PolicyKind parse_policy(const std::string& name);
const char* to_string(PolicyKind k);

/// Baseline rule: per group, rank pairs by channel gain, arrivals, AoI or a
/// uniform key (ties to the lower index) and grant the top min(B, |group|).
/// The first three send min(X, R_max); Random sends a uniform count in
/// {0..min(X, R_max)}. Random consumes exactly two draws per pair per slot.
mdp::Decision decide_baseline(PolicyKind kind, const std::vector<mdp::VuePairState>& states,
                              const std::vector<mdp::Feasibility>& feasibility,
                              const clustering::GroupAssignment& grouping, int bands, Rng& rng);

/// Band allocation from per-pair Q-values (actions x pairs), infeasible
/// actions masked out.
mdp::Decision decide_from_q(const Eigen::MatrixXd& q, const std::vector<mdp::Feasibility>& feasibility,
                            const clustering::GroupAssignment& grouping, int bands);

/// Forward pass per pair on its own window, then decide_from_q.
mdp::Decision decide_proposed(const drqn::DrqnParams& theta, const drqn::ObservationPool& pools,
                              const clustering::GroupAssignment& grouping,
                              const std::vector<mdp::Feasibility>& feasibility, int bands);

struct SlotMetrics {
  double power_w = 0.0;
  double drops = 0.0;
  double aoi_slots = 0.0;
  double utility = 0.0;
};

struct EpisodeSummary {
  double power_w = 0.0;
  double drops = 0.0;
  double aoi_slots = 0.0;
  double aoi_s = 0.0;
  double utility = 0.0;
  double discounted_return = 0.0;
};

struct EpisodeResult {
  std::vector<SlotMetrics> slots;
  EpisodeSummary summary;
};

/// Runs `slots` slots of `policy` from a fresh environment seeded with `seed`.
/// `theta` is required for the proposed policy.
EpisodeResult run_episode(const ExperimentConfig& cfg, PolicyKind policy,
                          const drqn::DrqnParams* theta, int slots, std::uint64_t seed);

struct TrainResult {
  drqn::DrqnParams params;
  std::vector<std::pair<int, double>> loss;  // (slot, loss) for slots with a gradient step
  std::vector<double> utility;               // mean utility per slot
  int slots_run = 0;
  bool stopped_on_plateau = false;
  std::string rng_state;
};

struct TrainOptions {
  // Overrides the exploration schedule with a constant when set.
  std::optional<double> fixed_epsilon;
  // Called once per slot with the decision taken; used by tests.
  std::function<void(const sim::Environment&, const mdp::Decision&)> on_decision;
};

/// Offline training of the shared network: regroup, act epsilon-greedily,
/// collect utilities, refresh the observation windows, store the experience,
/// take one minibatch Adam step once warm, and sync the target periodically.
TrainResult train_offline(const ExperimentConfig& cfg, std::uint64_t seed,
                          const TrainOptions& opts = {});

/// Exploration rate at slot j of a run with the configured schedule.
double epsilon_at(const ExperimentConfig& cfg, int slot);

struct SweepCell {
  std::string param;
  double value = 0.0;
  PolicyKind policy = PolicyKind::random;
  std::uint64_t seed = 0;
  EpisodeResult result;
};

/// Maps a sweep name (B, ell, K, lambda) onto the config field it changes.
void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double value);

std::vector<SweepCell> run_experiment(const ExperimentConfig& cfg, const std::string& param,
                                      const std::vector<double>& values,
                                      const std::vector<PolicyKind>& policies,
                                      const std::vector<std::uint64_t>& seeds,
                                      const drqn::DrqnParams* theta, int slots);

}  // namespace aoirrm::harness
