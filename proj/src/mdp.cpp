#include "aoirrm/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace aoirrm::mdp {

void check_decision(const Decision& d, const clustering::GroupAssignment& grouping, int bands,
                    std::span<const Feasibility> feasibility) {
  const std::size_t k = d.size();
  if (feasibility.size() != k || grouping.group_of.size() != k) {
    throw DecisionError("decision size does not match the number of pairs");
  }
  for (std::size_t i = 0; i < k; ++i) {
    const int f = d.band_flag[i];
    const int r = d.scheduled[i];
    const int b = d.band_index[i];
    if (f != 0 && f != 1) throw DecisionError("band flag must be 0 or 1");
    if ((f == 1) != (b >= 0) || b >= bands) throw DecisionError("band index inconsistent with flag");
    if (r < 0 || (f == 0 && r != 0)) throw DecisionError("packets scheduled without a band");
    if (r > feasibility[i].limit()) {
      throw DecisionError("pair " + std::to_string(i) + " schedules " + std::to_string(r) +
                          " packets above its feasible limit " +
                          std::to_string(feasibility[i].limit()));
    }
  }
  for (const auto& members : grouping.groups) {
    std::vector<bool> used(static_cast<std::size_t>(std::max(bands, 0)), false);
    for (int m : members) {
      const int b = d.band_index[static_cast<std::size_t>(m)];
      if (b < 0) continue;
      if (used[static_cast<std::size_t>(b)]) throw DecisionError("band reused inside a group");
      used[static_cast<std::size_t>(b)] = true;
    }
  }
}

double utility(double p_w, double drops, double aoi, double vartheta, double xi) {
  return std::exp(-p_w) + vartheta * std::exp(-drops) + xi * std::exp(-aoi);
}

double discounted_return(std::span<const double> utilities, double gamma) {
  if (utilities.empty()) throw PreconditionError("discounted_return: empty sequence");
  double acc = 0.0;
  double w = 1.0;
  for (double u : utilities) {
    acc += w * u;
    w *= gamma;
  }
  return (1.0 - gamma) * acc;
}

ActionKey action_key(Action a) { return {a.f, a.r}; }

ActionKey action_key(std::span<const Action> joint) {
  ActionKey k;
  k.reserve(joint.size() * 2);
  for (const Action& a : joint) {
    k.push_back(a.f);
    k.push_back(a.r);
  }
  return k;
}

std::size_t QTable::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  };
  for (auto v : k.state) mix(static_cast<std::uint64_t>(v));
  mix(0xFFFFULL);
  for (auto v : k.action) mix(static_cast<std::uint64_t>(v));
  return static_cast<std::size_t>(h);
}

double QTable::value(const StateKey& s, const ActionKey& a) const {
  const auto it = entries_.find(Key{s, a});
  return it == entries_.end() ? 0.0 : it->second.value;
}

std::uint64_t QTable::visits(const StateKey& s, const ActionKey& a) const {
  const auto it = entries_.find(Key{s, a});
  return it == entries_.end() ? 0 : it->second.visits;
}

void QTable::set(const StateKey& s, const ActionKey& a, double v) { entries_[Key{s, a}].value = v; }

double QTable::update(const StateKey& s, const ActionKey& a, double target_utility,
                      const StateKey& s2, const ActionKey& a2, double alpha, double gamma) {
  const double next = value(s2, a2);
  Entry& e = entries_[Key{s, a}];
  e.value = (1.0 - alpha) * e.value + alpha * ((1.0 - gamma) * target_utility + gamma * next);
  ++e.visits;
  return e.value;
}

double LearnCfg::alpha(std::uint64_t visits) const {
  if (alpha_kind == Alpha::constant) return alpha_constant;
  return 1.0 / (1.0 + static_cast<double>(visits));
}

double LearnCfg::epsilon(std::uint64_t step) const {
  if (step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(epsilon_decay_steps);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

void validate(const LearnCfg& cfg) {
  if (!(cfg.discount >= 0.0 && cfg.discount < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (cfg.alpha_kind == LearnCfg::Alpha::constant &&
      !(cfg.alpha_constant >= 0.0 && cfg.alpha_constant < 1.0)) {
    throw ConfigError("constant learning rate must lie in [0, 1)");
  }
  for (double e : {cfg.epsilon_start, cfg.epsilon_end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  }
}

double sarsa_update_joint(QTable& q, const StateKey& s, std::span<const Action> a, double u,
                          const StateKey& s2, std::span<const Action> a2, double alpha,
                          double gamma) {
  return q.update(s, action_key(a), u, s2, action_key(a2), alpha, gamma);
}

double sarsa_update_per_vue(QTable& q_k, const StateKey& s, Action a, double u_k,
                            const StateKey& s2, Action a2, double alpha, double gamma) {
  return q_k.update(s, action_key(a), u_k, s2, action_key(a2), alpha, gamma);
}

BandBid make_bid(double q_opt_out, std::span<const double> q_band, int limit) {
  BandBid bid;
  double best = -std::numeric_limits<double>::infinity();
  const int top = std::min<int>(limit, static_cast<int>(q_band.size()) - 1);
  for (int r = 1; r <= top; ++r) {
    if (q_band[static_cast<std::size_t>(r)] >= best) {
      best = q_band[static_cast<std::size_t>(r)];
      bid.best_r = r;
    }
  }
  // a band with nothing to send is worth exactly the opt-out
  bid.gain = bid.best_r > 0 ? best - q_opt_out : 0.0;
  return bid;
}

Decision allocate_bands(std::span<const BandBid> bids, const clustering::GroupAssignment& grouping,
                        int bands) {
  Decision d(bids.size());
  for (const auto& members : grouping.groups) {
    std::vector<int> ranked;
    for (int m : members) {
      if (bids[static_cast<std::size_t>(m)].gain > 0.0) ranked.push_back(m);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
      const double ga = bids[static_cast<std::size_t>(a)].gain;
      const double gb = bids[static_cast<std::size_t>(b)].gain;
      return ga != gb ? ga > gb : a < b;
    });
    const int grants = std::min<int>(bands, static_cast<int>(ranked.size()));
    for (int i = 0; i < grants; ++i) {
      const auto k = static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)]);
      d.band_flag[k] = 1;
      d.scheduled[k] = bids[k].best_r;
      d.band_index[k] = i;
    }
  }
  return d;
}

Decision greedy_joint_decision(std::span<const QTable> tables, std::span<const StateKey> keys,
                               const clustering::GroupAssignment& grouping, int bands,
                               std::span<const Feasibility> feasibility) {
  std::vector<BandBid> bids(tables.size());
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const int limit = feasibility[k].limit();
    std::vector<double> q_band(static_cast<std::size_t>(limit) + 1);
    for (int r = 0; r <= limit; ++r) {
      q_band[static_cast<std::size_t>(r)] = tables[k].value(keys[k], action_key(Action{1, r}));
    }
    bids[k] = make_bid(tables[k].value(keys[k], action_key(Action{0, 0})), q_band, limit);
  }
  return allocate_bands(bids, grouping, bands);
}

StateKey local_state_key(const VuePairState& s, const Observation& o, double bin_m) {
  if (!(bin_m > 0.0)) throw PreconditionError("local_state_key: bin size must be positive");
  auto bin = [bin_m](double v) { return static_cast<std::int64_t>(std::floor(v / bin_m)); };
  return {bin(s.vtx_position.x), bin(s.vtx_position.y), bin(s.vrx_position.x),
          bin(s.vrx_position.y), s.arrivals,          s.aoi_slots,
          o.prev_band_flag,      o.prev_scheduled};
}

void validate(const EnumerableMdp& m) {
  if (m.num_states <= 0 || static_cast<int>(m.actions.size()) != m.num_states ||
      m.outcomes.size() != m.actions.size()) {
    throw KernelError("enumerable MDP: state and action tables disagree");
  }
  for (int s = 0; s < m.num_states; ++s) {
    const auto& outs = m.outcomes[static_cast<std::size_t>(s)];
    if (outs.empty() || outs.size() != m.actions[static_cast<std::size_t>(s)].size()) {
      throw KernelError("state " + std::to_string(s) + " has no actions or mismatched outcomes");
    }
    for (std::size_t a = 0; a < outs.size(); ++a) {
      double total = 0.0;
      for (const auto& [next, p] : outs[a].next) {
        if (next < 0 || next >= m.num_states || p < 0.0) {
          throw KernelError("state " + std::to_string(s) + ": invalid transition entry");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw KernelError("state " + std::to_string(s) + " action " + std::to_string(a) +
                          ": transition probabilities sum to " + std::to_string(total));
      }
    }
  }
}

namespace {

double q_value(const EnumerableMdp::Outcome& o, const Eigen::VectorXd& v, double gamma) {
  double expect = 0.0;
  for (const auto& [next, p] : o.next) expect += p * v(next);
  return (1.0 - gamma) * o.utility + gamma * expect;
}

}  // namespace

ValueIterationResult value_iteration_oracle(const EnumerableMdp& m, double gamma, double tol) {
  validate(m);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw PreconditionError("value iteration: gamma in [0,1)");
  if (!(tol > 0.0)) throw PreconditionError("value iteration: tolerance must be positive");

  const auto n = static_cast<Eigen::Index>(m.num_states);
  ValueIterationResult res{Eigen::VectorXd::Zero(n), std::vector<int>(m.num_states, 0), 0};
  Eigen::VectorXd next(n);
  for (;;) {
    ++res.iterations;
    for (int s = 0; s < m.num_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& o : m.outcomes[static_cast<std::size_t>(s)]) {
        best = std::max(best, q_value(o, res.values, gamma));
      }
      next(s) = best;
    }
    const double diff = (next - res.values).cwiseAbs().maxCoeff();
    res.values = next;
    // contraction bound on the distance to the fixed point
    if (gamma == 0.0 || gamma / (1.0 - gamma) * diff <= tol) break;
  }

  for (int s = 0; s < m.num_states; ++s) {
    const auto& outs = m.outcomes[static_cast<std::size_t>(s)];
    const auto& acts = m.actions[static_cast<std::size_t>(s)];
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& o : outs) best = std::max(best, q_value(o, res.values, gamma));
    const double slack = 1e-12 * std::max(1.0, std::abs(best));
    int arg = -1;
    for (std::size_t a = 0; a < outs.size(); ++a) {
      if (q_value(outs[a], res.values, gamma) < best - slack) continue;
      if (arg < 0 || acts[a] < acts[static_cast<std::size_t>(arg)]) arg = static_cast<int>(a);
    }
    res.policy[static_cast<std::size_t>(s)] = arg;
  }
  return res;
}

Eigen::VectorXd evaluate_policy(const EnumerableMdp& m, std::span<const int> policy, double gamma) {
  validate(m);
  const auto n = static_cast<Eigen::Index>(m.num_states);
  if (policy.size() != static_cast<std::size_t>(n)) {
    throw PreconditionError("evaluate_policy: policy size mismatch");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& outs = m.outcomes[static_cast<std::size_t>(s)];
    const int act = policy[static_cast<std::size_t>(s)];
    if (act < 0 || static_cast<std::size_t>(act) >= outs.size()) {
      throw PreconditionError("evaluate_policy: action index out of range");
    }
    const auto& o = outs[static_cast<std::size_t>(act)];
    b(s) = (1.0 - gamma) * o.utility;
    for (const auto& [next, p] : o.next) a(s, next) -= gamma * p;
  }
  return a.partialPivLu().solve(b);
}

}  // namespace aoirrm::mdp
