#include "aoirrm/toy.hpp"

#include <algorithm>
#include <cmath>

namespace aoirrm::mdp {

ToyMdp::ToyMdp(const ToySpec& spec) : spec_(spec) {
  if (spec_.a_max < 2 || spec_.r_max < 1 || !(spec_.stay_prob >= 0.0 && spec_.stay_prob <= 1.0)) {
    throw PreconditionError("toy MDP: invalid parameters");
  }
  const int n = num_states();
  actions_.resize(static_cast<std::size_t>(n));
  mdp_.num_states = n;
  mdp_.actions.resize(static_cast<std::size_t>(n));
  mdp_.outcomes.resize(static_cast<std::size_t>(n));

  const double p_zero = std::exp(-spec_.lambda);
  for (int s = 0; s < n; ++s) {
    auto& acts = actions_[static_cast<std::size_t>(s)];
    const std::array<ToyLocal, 2> cur{local(s, 0), local(s, 1)};
    auto limit = [&](int k) {
      return std::min(cur[static_cast<std::size_t>(k)].arrivals,
                      capacity(cur[static_cast<std::size_t>(k)].position));
    };
    if (spec_.work_conserving) {
      acts.push_back({Action{1, limit(0)}, Action{0, 0}});
      acts.push_back({Action{0, 0}, Action{1, limit(1)}});
    } else {
      acts.push_back({Action{0, 0}, Action{0, 0}});
      for (int k = 0; k < kPairs; ++k) {
        for (int r = 1; r <= limit(k); ++r) {
          std::array<Action, 2> a{Action{0, 0}, Action{0, 0}};
          a[static_cast<std::size_t>(k)] = Action{1, r};
          acts.push_back(a);
        }
      }
    }
    std::sort(acts.begin(), acts.end(), [](const auto& a, const auto& b) {
      return action_key(a) < action_key(b);
    });

    for (const auto& a : acts) {
      EnumerableMdp::Outcome out;
      out.utility = pair_utility(s, 0, a[0]) + pair_utility(s, 1, a[1]);
      // product of independent per-pair kernels
      std::array<std::vector<std::pair<ToyLocal, double>>, 2> per;
      for (int k = 0; k < kPairs; ++k) {
        const ToyLocal& l = cur[static_cast<std::size_t>(k)];
        const Action& ak = a[static_cast<std::size_t>(k)];
        const int next_aoi = phy::advance_aoi(l.aoi, ak.f, ak.r, spec_.a_max);
        for (int pos = 0; pos < 2; ++pos) {
          const double pp = pos == l.position ? spec_.stay_prob : 1.0 - spec_.stay_prob;
          for (int x = 0; x < 2; ++x) {
            const double px = x == 0 ? p_zero : 1.0 - p_zero;
            if (pp * px > 0.0) per[static_cast<std::size_t>(k)].push_back({{pos, x, next_aoi}, pp * px});
          }
        }
      }
      for (const auto& [l0, p0] : per[0]) {
        for (const auto& [l1, p1] : per[1]) out.next.push_back({joint_index({l0, l1}), p0 * p1});
      }
      mdp_.actions[static_cast<std::size_t>(s)].push_back(action_key(a));
      mdp_.outcomes[static_cast<std::size_t>(s)].push_back(std::move(out));
    }
  }
  validate(mdp_);
}

int ToyMdp::local_index(ToyLocal l) const {
  return (l.position * 2 + l.arrivals) * spec_.a_max + (l.aoi - 1);
}

ToyLocal ToyMdp::local(int state, int pair) const {
  const int l = pair == 0 ? state / num_local() : state % num_local();
  return {l / (2 * spec_.a_max), (l / spec_.a_max) % 2, l % spec_.a_max + 1};
}

int ToyMdp::joint_index(const std::array<ToyLocal, 2>& locals) const {
  return local_index(locals[0]) * num_local() + local_index(locals[1]);
}

int ToyMdp::capacity(int position) const {
  return phy::max_packets(spec_.gains.at(static_cast<std::size_t>(position)), 1, spec_.phy,
                          spec_.r_max);
}

double ToyMdp::pair_utility(int state, int pair, Action a) const {
  const ToyLocal l = local(state, pair);
  const double h = spec_.gains.at(static_cast<std::size_t>(l.position));
  const double p = phy::tx_power(h, a.f, a.r, spec_.phy);
  const int drops = phy::packet_drops(l.arrivals, a.f, a.r);
  return utility(p, drops, l.aoi, spec_.vartheta, spec_.xi);
}

int ToyMdp::sample_next(int state, const std::array<Action, 2>& a, Rng& rng) const {
  std::array<ToyLocal, 2> next;
  const double p_zero = std::exp(-spec_.lambda);
  for (int k = 0; k < kPairs; ++k) {
    const ToyLocal l = local(state, k);
    const Action& ak = a[static_cast<std::size_t>(k)];
    const bool stay = uniform01(rng) < spec_.stay_prob;
    const int x = uniform01(rng) < p_zero ? 0 : 1;
    next[static_cast<std::size_t>(k)] = {stay ? l.position : 1 - l.position, x,
                                         phy::advance_aoi(l.aoi, ak.f, ak.r, spec_.a_max)};
  }
  return joint_index(next);
}

int ToyMdp::find_action(int state, const std::array<Action, 2>& a) const {
  const auto& acts = actions(state);
  for (std::size_t i = 0; i < acts.size(); ++i) {
    if (acts[i] == a) return static_cast<int>(i);
  }
  return -1;
}

namespace {

int toy_greedy_action(const ToyMdp& toy, const std::array<QTable, 2>& tables, int state) {
  const StateKey key{state};
  const std::array<StateKey, 2> keys{key, key};
  std::array<Feasibility, 2> feas;
  for (int k = 0; k < ToyMdp::kPairs; ++k) {
    const ToyLocal l = toy.local(state, k);
    feas[static_cast<std::size_t>(k)] = {l.arrivals, toy.capacity(l.position)};
  }
  const auto grouping = clustering::make_assignment({0, 0}, 1);
  const Decision d = greedy_joint_decision(tables, keys, grouping, 1, feas);
  const int idx = toy.find_action(state, {d.action(0), d.action(1)});
  if (idx < 0) throw PreconditionError("toy MDP: greedy decision outside the action set");
  return idx;
}

}  // namespace

std::vector<int> toy_greedy_policy(const ToyMdp& toy, const std::array<QTable, 2>& tables) {
  std::vector<int> policy(static_cast<std::size_t>(toy.num_states()));
  for (int s = 0; s < toy.num_states(); ++s) {
    policy[static_cast<std::size_t>(s)] = toy_greedy_action(toy, tables, s);
  }
  return policy;
}

ToySarsaResult train_toy_sarsa(const ToyMdp& toy, std::uint64_t steps, const LearnCfg& cfg,
                               Rng& rng) {
  validate(cfg);
  ToySarsaResult res;
  auto choose = [&](int s, std::uint64_t step) {
    const auto& acts = toy.actions(s);
    if (uniform01(rng) < cfg.epsilon(step)) {
      return std::min(acts.size() - 1, static_cast<std::size_t>(uniform01(rng) * acts.size()));
    }
    return static_cast<std::size_t>(toy_greedy_action(toy, res.tables, s));
  };

  int s = static_cast<int>(std::min<double>(toy.num_states() - 1, uniform01(rng) * toy.num_states()));
  auto a = toy.actions(s)[choose(s, 0)];
  for (std::uint64_t j = 0; j < steps; ++j) {
    const int s2 = toy.sample_next(s, a, rng);
    const auto a2 = toy.actions(s2)[choose(s2, j + 1)];
    for (int k = 0; k < ToyMdp::kPairs; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      QTable& q = res.tables[kk];
      const double alpha = cfg.alpha(q.visits({s}, action_key(a[kk])));
      sarsa_update_per_vue(q, {s}, a[kk], toy.pair_utility(s, k, a[kk]), {s2}, a2[kk], alpha,
                           cfg.discount);
    }
    s = s2;
    a = a2;
  }
  res.greedy_policy = toy_greedy_policy(toy, res.tables);
  return res;
}

}  // namespace aoirrm::mdp
