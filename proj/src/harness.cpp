#include "aoirrm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace aoirrm::harness {

PolicyKind parse_policy(const std::string& name) {
  if (name == "proposed") return PolicyKind::proposed;
  if (name == "channel") return PolicyKind::channel_aware;
  if (name == "packet" || name == "queue") return PolicyKind::packet_aware;
  if (name == "aoi") return PolicyKind::aoi_aware;
  if (name == "random") return PolicyKind::random;
  throw ConfigError("unknown policy '" + name +
                    "' (expected proposed, channel, packet, queue, aoi or random)");
}

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::proposed: return "proposed";
    case PolicyKind::channel_aware: return "channel";
    case PolicyKind::packet_aware: return "packet";
    case PolicyKind::aoi_aware: return "aoi";
    case PolicyKind::random: return "random";
  }
  return "?";
}

mdp::Decision decide_baseline(PolicyKind kind, const std::vector<mdp::VuePairState>& states,
                              const std::vector<mdp::Feasibility>& feasibility,
                              const clustering::GroupAssignment& grouping, int bands, Rng& rng) {
  if (kind == PolicyKind::proposed) throw PreconditionError("decide_baseline: not a baseline");
  const std::size_t k = states.size();
  std::vector<double> score(k);
  std::vector<double> count_draw(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    switch (kind) {
      case PolicyKind::channel_aware: score[i] = states[i].gain; break;
      case PolicyKind::packet_aware: score[i] = states[i].arrivals; break;
      case PolicyKind::aoi_aware: score[i] = states[i].aoi_slots; break;
      default:
        score[i] = uniform01(rng);
        count_draw[i] = uniform01(rng);
        break;
    }
  }
  mdp::Decision d(k);
  for (const auto& members : grouping.groups) {
    std::vector<int> order(members);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const double sa = score[static_cast<std::size_t>(a)];
      const double sb = score[static_cast<std::size_t>(b)];
      return sa != sb ? sa > sb : a < b;
    });
    const int grants = std::min<int>(bands, static_cast<int>(order.size()));
    for (int rank = 0; rank < grants; ++rank) {
      const auto i = static_cast<std::size_t>(order[static_cast<std::size_t>(rank)]);
      const int limit = feasibility[i].limit();
      d.band_flag[i] = 1;
      d.band_index[i] = rank;
      d.scheduled[i] = kind == PolicyKind::random
                           ? std::min(limit, static_cast<int>(count_draw[i] * (limit + 1)))
                           : limit;
    }
  }
  return d;
}

mdp::Decision decide_from_q(const Eigen::MatrixXd& q, const std::vector<mdp::Feasibility>& feasibility,
                            const clustering::GroupAssignment& grouping, int bands) {
  const int r_max = static_cast<int>(q.rows()) / 2 - 1;
  std::vector<mdp::BandBid> bids(feasibility.size());
  std::vector<double> q_band;
  for (std::size_t k = 0; k < feasibility.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const int limit = std::min(feasibility[k].limit(), r_max);
    q_band.assign(static_cast<std::size_t>(limit) + 1, 0.0);
    for (int r = 0; r <= limit; ++r) {
      q_band[static_cast<std::size_t>(r)] = q(drqn::action_index({1, r}, r_max), col);
    }
    bids[k] = mdp::make_bid(q(drqn::action_index({0, 0}, r_max), col), q_band, limit);
  }
  return mdp::allocate_bands(bids, grouping, bands);
}

mdp::Decision decide_proposed(const drqn::DrqnParams& theta, const drqn::ObservationPool& pools,
                              const clustering::GroupAssignment& grouping,
                              const std::vector<mdp::Feasibility>& feasibility, int bands) {
  std::vector<Eigen::MatrixXd> windows;
  windows.reserve(static_cast<std::size_t>(pools.pairs()));
  for (int k = 0; k < pools.pairs(); ++k) windows.push_back(pools.window_of(k));
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w);
  return decide_from_q(drqn::drqn_forward_batch(theta, ptrs), feasibility, grouping, bands);
}

namespace {

drqn::FeatureNorms norms_for(const sim::Environment& env) {
  return drqn::make_feature_norms(env.map().side_length(), env.phy(), env.traffic());
}

void observe(const sim::Environment& env, const drqn::FeatureNorms& norms,
             drqn::ObservationPool& pool, std::vector<Eigen::VectorXd>& features, bool first) {
  for (int k = 0; k < env.pairs(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    features[i] = drqn::encode_features(env.states()[i], env.observations()[i], norms);
    if (first) {
      pool.reset(k, features[i]);
    } else {
      pool.push(k, features[i]);
    }
  }
}

void check_shape(const drqn::DrqnParams& theta, const ExperimentConfig& cfg) {
  if (theta.shape.window != cfg.window || theta.shape.actions != 2 * (1 + cfg.r_max_global) ||
      theta.shape.features != drqn::kFeatureDim) {
    throw drqn::ShapeError("checkpoint network does not match the configuration "
                           "(window or r_max_global differ)");
  }
}

}  // namespace

EpisodeResult run_episode(const ExperimentConfig& cfg, PolicyKind policy,
                          const drqn::DrqnParams* theta, int slots, std::uint64_t seed) {
  if (policy == PolicyKind::proposed) {
    if (theta == nullptr) throw PreconditionError("proposed policy requires a trained checkpoint");
    check_shape(*theta, cfg);
  }
  sim::Environment env(cfg, seed);
  const auto norms = norms_for(env);
  drqn::ObservationPool pool(env.pairs(), cfg.window, drqn::kFeatureDim);
  std::vector<Eigen::VectorXd> features(static_cast<std::size_t>(env.pairs()));

  EpisodeResult out;
  out.slots.reserve(static_cast<std::size_t>(std::max(slots, 0)));
  double weight = 1.0;
  for (int j = 0; j < slots; ++j) {
    const auto feas = env.feasibility();
    mdp::Decision d;
    if (policy == PolicyKind::proposed) {
      observe(env, norms, pool, features, j == 0);
      d = decide_proposed(*theta, pool, env.grouping(), feas, env.bands());
    } else {
      d = decide_baseline(policy, env.states(), feas, env.grouping(), env.bands(), env.policy_rng());
    }
    const sim::StepResult r = env.step(d);
    out.slots.push_back({r.mean_power_w, r.mean_drops, r.mean_aoi_slots, r.mean_utility});
    out.summary.discounted_return += weight * r.mean_utility;
    weight *= cfg.gamma;
  }
  out.summary.discounted_return *= 1.0 - cfg.gamma;
  if (!out.slots.empty()) {
    const double n = static_cast<double>(out.slots.size());
    for (const auto& m : out.slots) {
      out.summary.power_w += m.power_w;
      out.summary.drops += m.drops;
      out.summary.aoi_slots += m.aoi_slots;
      out.summary.utility += m.utility;
    }
    out.summary.power_w /= n;
    out.summary.drops /= n;
    out.summary.aoi_slots /= n;
    out.summary.utility /= n;
    out.summary.aoi_s = out.summary.aoi_slots * cfg.slot_s;
  }
  return out;
}

double epsilon_at(const ExperimentConfig& cfg, int slot) {
  const double horizon = cfg.epsilon_decay_fraction * cfg.total_slots;
  if (horizon <= 0.0 || slot >= horizon) return cfg.epsilon_end;
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * (slot / horizon);
}

TrainResult train_offline(const ExperimentConfig& cfg, std::uint64_t seed, const TrainOptions& opts) {
  validate(cfg);
  sim::Environment env(cfg, seed);
  Rng train_rng = make_stream(seed, sim::training_stream);
  Rng init_rng = make_stream(seed, sim::init_stream);

  drqn::NetShape shape = drqn::shape_for(cfg.r_max_global, cfg.window);
  shape.hidden = cfg.hidden_units;
  shape.dense = cfg.hidden_units;
  TrainResult res;
  res.params = drqn::init_params(shape, init_rng);
  drqn::TargetParams target = drqn::sync_target(res.params);
  drqn::AdamState adam;
  adam.lr = cfg.learning_rate;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.eps = cfg.adam_eps;
  drqn::ReplayMemory memory(static_cast<std::size_t>(cfg.replay_capacity));

  const auto norms = norms_for(env);
  const int k = env.pairs();
  drqn::ObservationPool pool(k, cfg.window, drqn::kFeatureDim);
  std::vector<Eigen::VectorXd> features(static_cast<std::size_t>(k));

  struct Pending {
    std::vector<Eigen::MatrixXd> windows;
    std::vector<mdp::Action> actions;
    std::vector<double> utilities;
  };
  std::optional<Pending> pending;

  const auto warmup = static_cast<std::size_t>(cfg.effective_warmup());
  double window_sum = 0.0;
  std::deque<double> recent;
  std::optional<double> last_plateau_mean;
  int since_plateau_check = 0;

  for (int j = 0; j < cfg.total_slots; ++j) {
    observe(env, norms, pool, features, j == 0);
    const auto feas = env.feasibility();
    const double eps = opts.fixed_epsilon ? *opts.fixed_epsilon : epsilon_at(cfg, j);
    mdp::Decision d;
    if (uniform01(train_rng) < eps) {
      d = decide_baseline(PolicyKind::random, env.states(), feas, env.grouping(), env.bands(),
                          env.policy_rng());
    } else {
      d = decide_proposed(res.params, pool, env.grouping(), feas, env.bands());
    }
    if (opts.on_decision) opts.on_decision(env, d);

    std::vector<mdp::Action> actions(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) actions[static_cast<std::size_t>(i)] = d.action(static_cast<std::size_t>(i));

    if (pending) {
      drqn::Experience e;
      e.frames.reserve(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) {
        const auto& w = pending->windows[static_cast<std::size_t>(i)];
        Eigen::MatrixXd f(w.rows(), w.cols() + 1);
        f.leftCols(w.cols()) = w;
        f.col(w.cols()) = features[static_cast<std::size_t>(i)];
        e.frames.push_back(std::move(f));
      }
      e.actions = std::move(pending->actions);
      e.next_actions = actions;
      e.utilities = std::move(pending->utilities);
      memory.push(std::move(e));
    }

    Pending next;
    next.windows.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) next.windows.push_back(pool.window_of(i));
    next.actions = actions;
    const sim::StepResult r = env.step(d);
    next.utilities = r.utility;
    pending = std::move(next);
    res.utility.push_back(r.mean_utility);

    if (memory.size() >= warmup && memory.size() >= static_cast<std::size_t>(cfg.batch_size)) {
      const auto batch = memory.sample_minibatch(static_cast<std::size_t>(cfg.batch_size), train_rng);
      const auto lg = drqn::loss_and_grad(res.params, target, batch, cfg.gamma);
      drqn::adam_step(res.params, lg.grad, adam);
      res.loss.emplace_back(j, lg.loss);

      recent.push_back(lg.loss);
      window_sum += lg.loss;
      if (static_cast<int>(recent.size()) > cfg.plateau_window) {
        window_sum -= recent.front();
        recent.pop_front();
      }
      if (cfg.plateau_stop && ++since_plateau_check >= cfg.plateau_window &&
          static_cast<int>(recent.size()) == cfg.plateau_window) {
        since_plateau_check = 0;
        const double mean = window_sum / cfg.plateau_window;
        if (last_plateau_mean &&
            std::abs(mean - *last_plateau_mean) < cfg.plateau_tolerance * std::abs(*last_plateau_mean)) {
          res.slots_run = j + 1;
          res.stopped_on_plateau = true;
          break;
        }
        last_plateau_mean = mean;
      }
    }
    if ((j + 1) % cfg.target_sync_period == 0) target = drqn::sync_target(res.params);
    res.slots_run = j + 1;
  }
  std::ostringstream os;
  os << train_rng;
  res.rng_state = os.str();
  return res;
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double value) {
  auto as_int = [&](const char* name) {
    if (value != std::floor(value)) throw ConfigError(std::string(name) + " sweep values must be integers");
    return static_cast<int>(value);
  };
  if (param == "B") {
    cfg.bands = as_int("B");
  } else if (param == "K") {
    cfg.pairs = as_int("K");
  } else if (param == "ell") {
    cfg.pair_distance_m = value;
  } else if (param == "lambda") {
    cfg.arrival_rate = value;
  } else {
    throw ConfigError("unknown sweep parameter '" + param + "' (expected B, ell, K or lambda)");
  }
  validate(cfg);
}

std::vector<SweepCell> run_experiment(const ExperimentConfig& cfg, const std::string& param,
                                      const std::vector<double>& values,
                                      const std::vector<PolicyKind>& policies,
                                      const std::vector<std::uint64_t>& seeds,
                                      const drqn::DrqnParams* theta, int slots) {
  std::vector<SweepCell> cells;
  for (double v : values) {
    ExperimentConfig c = cfg;
    apply_sweep_value(c, param, v);
    for (PolicyKind p : policies) {
      for (std::uint64_t s : seeds) {
        cells.push_back({param, v, p, s, run_episode(c, p, theta, slots, s)});
      }
    }
  }
  return cells;
}

}  // namespace aoirrm::harness
