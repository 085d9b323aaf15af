#pragma once

// A two-pair, one-band scheduling MDP small enough to enumerate. Each pair
// has two positions (near/far receiver), X in {0,1} and AoI in {1..a_max}.

#include <array>
#include <cstdint>
#include <vector>

#include "aoirrm/mdp.hpp"
#include "aoirrm/phy.hpp"

namespace aoirrm::mdp {

struct ToySpec {
  std::array<double, 2> gains{2.6e-10, 6.2e-15};  // per position
  double stay_prob = 0.8;
  double lambda = 1.0;  // arrivals truncated at one packet
  int a_max = 3;
  int r_max = 1;
  // When set, the band always goes to exactly one pair, which sends
  // min(X, R_max) packets; per-pair actions then determine the joint action.
  bool work_conserving = false;
  double vartheta = 2.0;
  double xi = 0.9;
  phy::PhyParams phy;
};

struct ToyLocal {
  int position = 0;
  int arrivals = 0;
  int aoi = 1;
};

class ToyMdp {
 public:
  explicit ToyMdp(const ToySpec& spec);

  static constexpr int kPairs = 2;
  int num_local() const { return 2 * 2 * spec_.a_max; }
  int num_states() const { return num_local() * num_local(); }

  ToyLocal local(int state, int pair) const;
  int joint_index(const std::array<ToyLocal, 2>& locals) const;
  int capacity(int position) const;

  /// Joint actions available in a state, in the order used by `mdp()`.
  const std::vector<std::array<Action, 2>>& actions(int state) const {
    return actions_.at(static_cast<std::size_t>(state));
  }
  double pair_utility(int state, int pair, Action a) const;
  const EnumerableMdp& mdp() const { return mdp_; }

  /// Samples the successor state of one slot.
  int sample_next(int state, const std::array<Action, 2>& a, Rng& rng) const;

  /// Index of `a` in actions(state), or -1.
  int find_action(int state, const std::array<Action, 2>& a) const;

  const ToySpec& spec() const { return spec_; }

 private:
  int local_index(ToyLocal l) const;

  ToySpec spec_;
  std::vector<std::vector<std::array<Action, 2>>> actions_;
  EnumerableMdp mdp_;
};

/// Per-pair SARSA on the toy, keyed by the global state, acting epsilon-greedily
/// around the greedy decomposed decision.
struct ToySarsaResult {
  std::array<QTable, 2> tables;
  std::vector<int> greedy_policy;  // action index per state
};

ToySarsaResult train_toy_sarsa(const ToyMdp& toy, std::uint64_t steps, const LearnCfg& cfg,
                               Rng& rng);

/// Greedy decomposed decision for every state from per-pair tables.
std::vector<int> toy_greedy_policy(const ToyMdp& toy, const std::array<QTable, 2>& tables);

}  // namespace aoirrm::mdp
