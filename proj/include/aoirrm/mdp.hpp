#pragma once

// MDP layer: states, utility, tabular SARSA (joint and per-VUE), the greedy
// decomposed decision and a value-iteration oracle for small enumerable MDPs.

#include <compare>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "aoirrm/clustering.hpp"
#include "aoirrm/common.hpp"

namespace aoirrm::mdp {

struct VuePairState {
  Vec2 vtx_position;
  Vec2 vrx_position;
  double gain = 0.0;
  int arrivals = 0;
  int aoi_slots = 1;
};

/// What a VUE-pair saw of the previous slot's decision.
struct Observation {
  int prev_band_flag = 0;
  int prev_scheduled = 0;
};

struct Action {
  int f = 0;
  int r = 0;
  friend auto operator<=>(const Action&, const Action&) = default;
};

/// Joint decision over all VUE-pairs; band_index is -1 where no band is held.
struct Decision {
  std::vector<int> band_flag;
  std::vector<int> scheduled;
  std::vector<int> band_index;

  explicit Decision(std::size_t k = 0) : band_flag(k, 0), scheduled(k, 0), band_index(k, -1) {}
  std::size_t size() const { return band_flag.size(); }
  Action action(std::size_t k) const { return {band_flag[k], scheduled[k]}; }
};

/// Per-VUE upper bound on scheduled packets: min(X, R_max).
struct Feasibility {
  int arrivals = 0;
  int capacity = 0;
  int limit() const { return std::min(arrivals, capacity); }
};

class DecisionError : public Error {
 public:
  using Error::Error;
};

/// Throws DecisionError unless the decision honours the one-band-per-pair rule,
/// exclusive band use inside each group, and the per-pair feasibility bound.
void check_decision(const Decision& d, const clustering::GroupAssignment& grouping, int bands,
                    std::span<const Feasibility> feasibility);

enum class AoiUnits { slots, seconds };

/// Per-slot QoE utility. `aoi` is expressed in whichever unit the caller chose.
double utility(double p_w, double drops, double aoi, double vartheta, double xi);

/// (1 - gamma) * sum_j gamma^(j-1) u_j over a finite rollout.
double discounted_return(std::span<const double> utilities, double gamma);

using StateKey = std::vector<std::int64_t>;
using ActionKey = std::vector<int>;

ActionKey action_key(Action a);
ActionKey action_key(std::span<const Action> joint);

class QTable {
 public:
  enum class Scope { joint, per_vue };

  explicit QTable(Scope scope = Scope::per_vue) : scope_(scope) {}

  Scope scope() const { return scope_; }
  double value(const StateKey& s, const ActionKey& a) const;
  std::uint64_t visits(const StateKey& s, const ActionKey& a) const;
  void set(const StateKey& s, const ActionKey& a, double v);
  std::size_t size() const { return entries_.size(); }

  struct Entry {
    double value = 0.0;
    std::uint64_t visits = 0;
  };
  struct Key {
    StateKey state;
    ActionKey action;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  const std::unordered_map<Key, Entry, KeyHash>& entries() const { return entries_; }

  /// One SARSA step; returns the updated value.
  double update(const StateKey& s, const ActionKey& a, double target_utility, const StateKey& s2,
                const ActionKey& a2, double alpha, double gamma);

 private:
  Scope scope_;
  std::unordered_map<Key, Entry, KeyHash> entries_;
};

struct LearnCfg {
  double discount = 0.9;
  enum class Alpha { visit_count, constant } alpha_kind = Alpha::visit_count;
  double alpha_constant = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  std::uint64_t epsilon_decay_steps = 100000;

  /// alpha for an entry visited `visits` times before this update.
  double alpha(std::uint64_t visits) const;
  double epsilon(std::uint64_t step) const;
};

void validate(const LearnCfg& cfg);

/// Q(s,a) <- (1-alpha) Q(s,a) + alpha ((1-gamma) u + gamma Q(s',a')).
double sarsa_update_joint(QTable& q, const StateKey& s, std::span<const Action> a, double u,
                          const StateKey& s2, std::span<const Action> a2, double alpha,
                          double gamma);

double sarsa_update_per_vue(QTable& q_k, const StateKey& s, Action a, double u_k,
                            const StateKey& s2, Action a2, double alpha, double gamma);

/// What one VUE-pair gains from holding a band, and the packet count it would use.
struct BandBid {
  double gain = 0.0;  // best band-holding value minus the opt-out value
  int best_r = 0;
};

/// `q_band[r]` is the value of holding a band and scheduling r packets, for
/// r = 0..limit; only r >= 1 is a real transmission. Ties prefer larger r.
BandBid make_bid(double q_opt_out, std::span<const double> q_band, int limit);

/// Grants each group's bands to its highest strictly positive bids (ties to the
/// lower pair index); band indices are handed out in rank order.
Decision allocate_bands(std::span<const BandBid> bids, const clustering::GroupAssignment& grouping,
                        int bands);

/// Joint decision maximising the sum of per-VUE Q-values under the band constraints.
Decision greedy_joint_decision(std::span<const QTable> tables, std::span<const StateKey> keys,
                               const clustering::GroupAssignment& grouping, int bands,
                               std::span<const Feasibility> feasibility);

/// Tabular key for a VUE-pair's local view: positions binned to `bin_m`, plus
/// arrivals, AoI and the previous decision.
StateKey local_state_key(const VuePairState& s, const Observation& o, double bin_m);

/// Finite MDP with explicit transition lists, used as a ground-truth oracle.
struct EnumerableMdp {
  struct Outcome {
    double utility = 0.0;
    std::vector<std::pair<int, double>> next;  // (state, probability)
  };
  int num_states = 0;
  std::vector<std::vector<ActionKey>> actions;   // per state
  std::vector<std::vector<Outcome>> outcomes;    // parallel to actions
};

class KernelError : public Error {
 public:
  using Error::Error;
};

/// Throws KernelError when a transition row does not sum to one within 1e-9.
void validate(const EnumerableMdp& m);

struct ValueIterationResult {
  Eigen::VectorXd values;
  std::vector<int> policy;  // action index per state
  int iterations = 0;
};

/// Iterates V(s) = max_a (1-gamma) U(s,a) + gamma sum P V until the fixed
/// point is within `tol` in sup-norm. Ties pick the lexicographically
/// smallest action key.
ValueIterationResult value_iteration_oracle(const EnumerableMdp& m, double gamma, double tol);

/// Exact value of a deterministic policy (dense linear solve).
Eigen::VectorXd evaluate_policy(const EnumerableMdp& m, std::span<const int> policy, double gamma);

}  // namespace aoirrm::mdp
