// Command-line front end: training, evaluation, sweeps, a clustering dump
// and a value-iteration check of fixture MDPs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aoirrm/config.hpp"
#include "aoirrm/environment.hpp"
#include "aoirrm/harness.hpp"
#include "aoirrm/mdp.hpp"
#include "aoirrm/report.hpp"

namespace fs = std::filesystem;
using namespace aoirrm;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

drqn::DrqnParams load_for(const std::string& path, const ExperimentConfig& cfg) {
  auto c = drqn::load_checkpoint(path);
  if (c.params.shape.window != cfg.window || c.params.shape.actions != 2 * (1 + cfg.r_max_global)) {
    throw ConfigError("checkpoint " + path + " does not match the configuration's window/r_max_global");
  }
  return std::move(c.params);
}

int cmd_train(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
              std::optional<int> slots) {
  ExperimentConfig cfg = load_config(config);
  if (seed) cfg.seed = *seed;
  if (slots) cfg.total_slots = *slots;
  validate(cfg);
  const auto res = harness::train_offline(cfg, cfg.seed);
  fs::create_directories(out);
  drqn::save_checkpoint((fs::path(out) / "checkpoint.bin").string(),
                        {res.params, config_hash(cfg), res.rng_state});
  auto loss = open_out(fs::path(out) / "loss.csv");
  report::write_loss_csv(loss, res.loss);
  auto util = open_out(fs::path(out) / "train_utility.csv");
  util << "slot,avg_utility\n";
  for (std::size_t j = 0; j < res.utility.size(); ++j) {
    util << j << ',' << report::format_double(res.utility[j]) << '\n';
  }
  std::cerr << "trained " << res.slots_run << " slots"
            << (res.stopped_on_plateau ? " (loss plateau)" : "") << ", " << res.loss.size()
            << " gradient steps\n";
  return 0;
}

int cmd_eval(const std::string& config, const std::string& checkpoint, const std::string& policy,
             std::optional<int> slots, std::optional<std::uint64_t> seed, const std::string& out) {
  ExperimentConfig cfg = load_config(config);
  const auto kind = harness::parse_policy(policy);
  std::optional<drqn::DrqnParams> theta;
  if (kind == harness::PolicyKind::proposed) {
    if (checkpoint.empty()) throw ConfigError("--checkpoint is required for the proposed policy");
    theta = load_for(checkpoint, cfg);
  }
  const int n = slots.value_or(cfg.eval_slots);
  const std::uint64_t s = seed.value_or(cfg.seed);
  std::vector<harness::SweepCell> cells{
      {"none", 0.0, kind, s, harness::run_episode(cfg, kind, theta ? &*theta : nullptr, n, s)}};
  if (out.empty()) {
    report::write_metrics_csv(std::cout, cells, cfg.slot_s);
  } else {
    auto os = open_out(out);
    report::write_metrics_csv(os, cells, cfg.slot_s);
  }
  report::write_summary_csv(std::cerr, cells);
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& param, const std::vector<double>& values,
              const std::vector<std::string>& policies, const std::vector<std::uint64_t>& seeds,
              const std::string& out, const std::string& checkpoint, std::optional<int> slots) {
  ExperimentConfig cfg = load_config(config);
  std::vector<harness::PolicyKind> kinds;
  bool need_net = false;
  for (const auto& p : policies) {
    kinds.push_back(harness::parse_policy(p));
    need_net |= kinds.back() == harness::PolicyKind::proposed;
  }
  if (!values.empty()) {
    ExperimentConfig probe = cfg;
    harness::apply_sweep_value(probe, param, values.front());
  } else if (param != "B" && param != "ell" && param != "K" && param != "lambda") {
    throw ConfigError("unknown sweep parameter '" + param + "'");
  }
  std::optional<drqn::DrqnParams> theta;
  if (need_net) {
    if (checkpoint.empty()) throw ConfigError("--checkpoint is required for the proposed policy");
    theta = load_for(checkpoint, cfg);
  }
  const auto cells = harness::run_experiment(cfg, param, values, kinds, seeds,
                                             theta ? &*theta : nullptr,
                                             slots.value_or(cfg.eval_slots));
  fs::create_directories(out);
  auto metrics = open_out(fs::path(out) / "metrics.csv");
  report::write_metrics_csv(metrics, cells, cfg.slot_s);
  auto summary = open_out(fs::path(out) / "summary.csv");
  report::write_summary_csv(summary, cells);
  return 0;
}

int cmd_cluster_demo(const std::string& config, const std::string& out,
                     std::optional<std::uint64_t> seed) {
  const ExperimentConfig cfg = load_config(config);
  sim::Environment env(cfg, seed.value_or(cfg.seed));
  auto os = open_out(out);
  os << "pair,vtx_x,vtx_y,vrx_x,vrx_y,mid_x,mid_y,link,gain,group\n";
  for (int k = 0; k < env.pairs(); ++k) {
    const auto& s = env.states()[static_cast<std::size_t>(k)];
    const Vec2 m = midpoint(s.vtx_position, s.vrx_position);
    os << k << ',' << report::format_double(s.vtx_position.x) << ','
       << report::format_double(s.vtx_position.y) << ',' << report::format_double(s.vrx_position.x)
       << ',' << report::format_double(s.vrx_position.y) << ',' << report::format_double(m.x) << ','
       << report::format_double(m.y) << ','
       << mobility::to_string(env.link_classes()[static_cast<std::size_t>(k)]) << ','
       << report::format_double(s.gain) << ','
       << env.grouping().group_of[static_cast<std::size_t>(k)] << '\n';
  }
  return 0;
}

mdp::EnumerableMdp mdp_from_json(const nlohmann::json& j) {
  mdp::EnumerableMdp m;
  m.num_states = j.at("states").get<int>();
  const auto& acts = j.at("actions");
  if (!acts.is_array() || static_cast<int>(acts.size()) != m.num_states) {
    throw ConfigError("fixture: 'actions' must list one entry per state");
  }
  for (const auto& per_state : acts) {
    std::vector<mdp::ActionKey> keys;
    std::vector<mdp::EnumerableMdp::Outcome> outs;
    for (const auto& a : per_state) {
      keys.push_back(a.at("key").get<mdp::ActionKey>());
      mdp::EnumerableMdp::Outcome o;
      o.utility = a.at("utility").get<double>();
      for (const auto& t : a.at("next")) o.next.emplace_back(t.at(0).get<int>(), t.at(1).get<double>());
      outs.push_back(std::move(o));
    }
    m.actions.push_back(std::move(keys));
    m.outcomes.push_back(std::move(outs));
  }
  return m;
}

int cmd_oracle_check(const std::string& fixture) {
  std::ifstream is(fixture);
  if (!is) throw ConfigError("cannot open fixture " + fixture);
  nlohmann::json j;
  is >> j;
  const auto m = mdp_from_json(j);
  const double gamma = j.at("gamma").get<double>();
  const double tol = j.value("tol", 1e-10);
  const auto vi = mdp::value_iteration_oracle(m, gamma, tol);
  std::cout << "state,value,action\n";
  for (int s = 0; s < m.num_states; ++s) {
    const auto& key = m.actions[static_cast<std::size_t>(s)][static_cast<std::size_t>(vi.policy[static_cast<std::size_t>(s)])];
    std::string k;
    for (std::size_t i = 0; i < key.size(); ++i) k += (i ? ";" : "") + std::to_string(key[i]);
    std::cout << s << ',' << report::format_double(vi.values(s)) << ',' << k << '\n';
  }
  int status = 0;
  if (j.contains("expected_values")) {
    const auto expected = j.at("expected_values").get<std::vector<double>>();
    const double check_tol = j.value("check_tolerance", 1e-8);
    if (static_cast<int>(expected.size()) != m.num_states) throw ConfigError("fixture: expected_values size");
    for (int s = 0; s < m.num_states; ++s) {
      const double diff = std::abs(vi.values(s) - expected[static_cast<std::size_t>(s)]);
      if (diff > check_tol) {
        std::cerr << "state " << s << ": value " << vi.values(s) << " differs from expected "
                  << expected[static_cast<std::size_t>(s)] << '\n';
        status = 1;
      }
    }
    std::cerr << (status == 0 ? "oracle check passed\n" : "oracle check FAILED\n");
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AoI-aware radio resource management simulator"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, policy = "random", param, fixture;
  std::optional<std::uint64_t> seed;
  std::optional<int> slots;
  std::vector<double> values;
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;

  auto* train = app.add_subcommand("train", "train the recurrent Q-network offline");
  train->add_option("--config", config, "experiment config (JSON)")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--slots", slots, "override total_slots");

  auto* eval = app.add_subcommand("eval", "evaluate one policy");
  eval->add_option("--config", config)->required();
  eval->add_option("--checkpoint", checkpoint);
  eval->add_option("--policy", policy, "proposed|channel|packet|queue|aoi|random")->required();
  eval->add_option("--slots", slots);
  eval->add_option("--seed", seed);
  eval->add_option("--out", out, "metrics CSV (stdout if omitted)");

  auto* sweep = app.add_subcommand("sweep", "sweep one parameter across policies and seeds");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--param", param, "B|ell|K|lambda")->required();
  sweep->add_option("--values", values)->delimiter(',');
  sweep->add_option("--policies", policies)->delimiter(',')->required();
  sweep->add_option("--seeds", seeds)->delimiter(',')->required();
  sweep->add_option("--out", out)->required();
  sweep->add_option("--checkpoint", checkpoint);
  sweep->add_option("--slots", slots);

  auto* demo = app.add_subcommand("cluster-demo", "dump pair positions and group labels");
  demo->add_option("--config", config)->required();
  demo->add_option("--out", out)->required();
  demo->add_option("--seed", seed);

  auto* oracle = app.add_subcommand("oracle-check", "value iteration on a fixture MDP");
  oracle->add_option("--fixture", fixture)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, out, seed, slots);
    if (*eval) return cmd_eval(config, checkpoint, policy, slots, seed, out);
    if (*sweep) return cmd_sweep(config, param, values, policies, seeds, out, checkpoint, slots);
    if (*demo) return cmd_cluster_demo(config, out, seed);
    if (*oracle) return cmd_oracle_check(fixture);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
