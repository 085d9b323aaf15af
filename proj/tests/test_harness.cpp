#include <doctest.h>

#include <sstream>

#include "aoirrm/harness.hpp"
#include "aoirrm/report.hpp"

using namespace aoirrm;
using namespace aoirrm::harness;

namespace {

ExperimentConfig small_config() {
  return config_from_json({{"pairs", 8},
                           {"bands", 2},
                           {"groups", 2},
                           {"pair_distance_m", 30.0},
                           {"arrival_rate", 2.0},
                           {"batch_size", 32},
                           {"hidden_units", 16},
                           {"seed", 1},
                           {"eval_slots", 500}});
}

mdp::VuePairState with_gain(double g, int x, int a) {
  mdp::VuePairState s;
  s.gain = g;
  s.arrivals = x;
  s.aoi_slots = a;
  return s;
}

clustering::GroupAssignment one_group(int k) {
  return clustering::make_assignment(std::vector<int>(static_cast<std::size_t>(k), 0), 1);
}

}  // namespace

TEST_CASE("policy names") {
  CHECK(parse_policy("proposed") == PolicyKind::proposed);
  CHECK(parse_policy("queue") == PolicyKind::packet_aware);
  CHECK(std::string(to_string(parse_policy("aoi"))) == "aoi");
  CHECK_THROWS_AS(parse_policy("greedy"), ConfigError);
}

TEST_CASE("decision from Q-values") {
  // two pairs, r_max = 1: rows are (0,0), (0,1), (1,0), (1,1)
  Eigen::MatrixXd q(4, 2);
  q << 1.0, 1.2,
       9.0, 9.0,
       0.0, 0.0,
       2.0, 1.5;
  const std::vector<mdp::Feasibility> feas{{1, 1}, {1, 1}};
  const auto d = decide_from_q(q, feas, one_group(2), 1);
  CHECK(d.action(0) == mdp::Action{1, 1});
  CHECK(d.action(1) == mdp::Action{0, 0});
  SUBCASE("infeasible counts are masked") {
    const std::vector<mdp::Feasibility> none{{0, 1}, {0, 1}};
    const auto e = decide_from_q(q, none, one_group(2), 1);
    CHECK(e.action(0) == mdp::Action{0, 0});
    CHECK(e.action(1) == mdp::Action{0, 0});
  }
}

TEST_CASE("channel-aware baseline grants the strongest links") {
  const std::vector<mdp::VuePairState> st{with_gain(3e-10, 2, 1), with_gain(2e-10, 3, 1),
                                          with_gain(1e-10, 4, 1)};
  const std::vector<mdp::Feasibility> feas{{2, 5}, {3, 2}, {4, 5}};
  Rng rng(1);
  const auto d = decide_baseline(PolicyKind::channel_aware, st, feas, one_group(3), 2, rng);
  CHECK(d.band_flag == std::vector<int>{1, 1, 0});
  CHECK(d.band_index == std::vector<int>{0, 1, -1});
  CHECK(d.scheduled == std::vector<int>{2, 2, 0});
}

TEST_CASE("AoI-aware baseline breaks ties towards the lower index") {
  const std::vector<mdp::VuePairState> st{with_gain(1e-10, 1, 4), with_gain(1e-10, 1, 7),
                                          with_gain(1e-10, 1, 7)};
  const std::vector<mdp::Feasibility> feas{{1, 5}, {1, 5}, {1, 5}};
  Rng rng(1);
  const auto d = decide_baseline(PolicyKind::aoi_aware, st, feas, one_group(3), 1, rng);
  CHECK(d.band_flag == std::vector<int>{0, 1, 0});
}

TEST_CASE("packet-aware baseline ranks by arrivals per group") {
  const std::vector<mdp::VuePairState> st{with_gain(1e-10, 1, 1), with_gain(1e-10, 5, 1),
                                          with_gain(1e-10, 3, 1), with_gain(1e-10, 0, 1)};
  const std::vector<mdp::Feasibility> feas{{1, 9}, {5, 9}, {3, 9}, {0, 9}};
  const auto g = clustering::make_assignment({0, 0, 1, 1}, 2);
  Rng rng(1);
  const auto d = decide_baseline(PolicyKind::packet_aware, st, feas, g, 1, rng);
  CHECK(d.band_flag == std::vector<int>{0, 1, 1, 0});
  CHECK(d.band_index == std::vector<int>{-1, 0, 0, -1});
}

TEST_CASE("random baseline is seeded and feasible") {
  const std::vector<mdp::VuePairState> st(6, with_gain(1e-10, 3, 1));
  const std::vector<mdp::Feasibility> feas(6, mdp::Feasibility{3, 2});
  const auto g = clustering::make_assignment({0, 1, 0, 1, 0, 1}, 2);
  Rng a(5), b(5);
  for (int i = 0; i < 200; ++i) {
    const auto da = decide_baseline(PolicyKind::random, st, feas, g, 2, a);
    const auto db = decide_baseline(PolicyKind::random, st, feas, g, 2, b);
    CHECK(da.band_flag == db.band_flag);
    CHECK(da.scheduled == db.scheduled);
    CHECK_NOTHROW(mdp::check_decision(da, g, 2, feas));
  }
  // two draws per pair per slot
  Rng c(5), d(5);
  decide_baseline(PolicyKind::random, st, feas, g, 2, c);
  for (int i = 0; i < 12; ++i) uniform01(d);
  CHECK(c() == d());
}

TEST_CASE("no bands means no transmissions") {
  ExperimentConfig cfg = small_config();
  cfg.bands = 0;
  for (PolicyKind p : {PolicyKind::channel_aware, PolicyKind::random}) {
    const auto r = run_episode(cfg, p, nullptr, 300, 2);
    CHECK(r.summary.power_w == 0.0);
    CHECK(r.summary.drops == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("episodes are deterministic and summaries are slot means") {
  const ExperimentConfig cfg = small_config();
  const auto a = run_episode(cfg, PolicyKind::random, nullptr, 400, 3);
  const auto b = run_episode(cfg, PolicyKind::random, nullptr, 400, 3);
  REQUIRE(a.slots.size() == 400);
  double u = 0.0, p = 0.0;
  for (std::size_t i = 0; i < a.slots.size(); ++i) {
    CHECK(a.slots[i].utility == b.slots[i].utility);
    CHECK(a.slots[i].power_w == b.slots[i].power_w);
    u += a.slots[i].utility;
    p += a.slots[i].power_w;
  }
  CHECK(std::abs(a.summary.utility - u / 400.0) <= 1e-12);
  CHECK(std::abs(a.summary.power_w - p / 400.0) <= 1e-12);
  CHECK(a.summary.aoi_s == doctest::Approx(a.summary.aoi_slots * cfg.slot_s));
  const auto c = run_episode(cfg, PolicyKind::random, nullptr, 400, 4);
  CHECK(c.summary.utility != a.summary.utility);
  CHECK_THROWS_AS(run_episode(cfg, PolicyKind::proposed, nullptr, 10, 1), PreconditionError);
}

TEST_CASE("metrics CSV round-trips") {
  const ExperimentConfig cfg = small_config();
  const auto cells = run_experiment(cfg, "B", {1.0, 2.0}, {PolicyKind::random, PolicyKind::aoi_aware},
                                    {1, 2}, nullptr, 50);
  REQUIRE(cells.size() == 8);
  std::stringstream ss;
  report::write_metrics_csv(ss, cells, cfg.slot_s);
  const auto rows = report::parse_metrics_csv(ss);
  REQUIRE(rows.size() == 8 * 50);
  std::size_t i = 0;
  for (const auto& cell : cells) {
    for (const auto& m : cell.result.slots) {
      const auto& r = rows[i++];
      CHECK(r.sweep_param == "B");
      CHECK(r.sweep_value == cell.value);
      CHECK(r.policy == to_string(cell.policy));
      CHECK(r.seed == cell.seed);
      CHECK(r.avg_utility == m.utility);
      CHECK(r.avg_power_w == m.power_w);
      CHECK(r.avg_aoi_slots == m.aoi_slots);
    }
  }
}

TEST_CASE("summary CSV reports across-seed statistics") {
  const ExperimentConfig cfg = small_config();
  const auto cells = run_experiment(cfg, "ell", {30.0}, {PolicyKind::random}, {1, 2, 3}, nullptr, 60);
  std::vector<double> utils;
  for (const auto& c : cells) utils.push_back(c.result.summary.utility);
  const auto ms = report::mean_std(utils);
  std::stringstream ss;
  report::write_summary_csv(ss, cells);
  std::string line;
  std::getline(ss, line);
  CHECK(line == report::kSummaryHeader);
  bool found = false;
  while (std::getline(ss, line)) {
    if (line.find(",avg_utility,") != std::string::npos) {
      found = true;
      CHECK(line == "ell,30,random,avg_utility," + report::format_double(ms.mean) + "," +
                        report::format_double(ms.stddev) + ",3");
    }
  }
  CHECK(found);
}

TEST_CASE("empty sweep writes only the header") {
  std::stringstream ss;
  report::write_metrics_csv(ss, {}, 3e-3);
  CHECK(ss.str() == std::string(report::kMetricsHeader) + "\n");
  CHECK(report::parse_metrics_csv(ss).empty());
}

TEST_CASE("sweep parameters") {
  ExperimentConfig cfg = small_config();
  apply_sweep_value(cfg, "B", 3.0);
  CHECK(cfg.bands == 3);
  apply_sweep_value(cfg, "ell", 45.0);
  CHECK(cfg.pair_distance_m == 45.0);
  apply_sweep_value(cfg, "K", 10.0);
  CHECK(cfg.pairs == 10);
  apply_sweep_value(cfg, "lambda", 1.5);
  CHECK(cfg.arrival_rate == 1.5);
  CHECK_THROWS_AS(apply_sweep_value(cfg, "gamma", 0.5), ConfigError);
}

TEST_CASE("random baseline drops fewer packets with more bands") {
  ExperimentConfig cfg = small_config();
  double prev = 1e9;
  for (int b = 1; b <= 3; ++b) {
    cfg.bands = b;
    double drops = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      drops += run_episode(cfg, PolicyKind::random, nullptr, 1000, seed).summary.drops;
    }
    CHECK(drops <= prev);
    prev = drops;
  }
}

TEST_CASE("longer pair distance costs the channel-aware baseline more power") {
  ExperimentConfig cfg = small_config();
  auto power = [&](double ell) {
    cfg.pair_distance_m = ell;
    double p = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      p += run_episode(cfg, PolicyKind::channel_aware, nullptr, 1000, seed).summary.power_w;
    }
    return p;
  };
  CHECK(power(60.0) > power(20.0));
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(config_from_json({{"pairz", 3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"rho_db", -5.3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"pairs", 2.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"groups", 9}, {"pairs", 8}}), ConfigError);
  const ExperimentConfig cfg = small_config();
  CHECK(config_from_json(config_to_json(cfg)).pairs == cfg.pairs);
  CHECK(config_hash(config_from_json(config_to_json(cfg))) == config_hash(cfg));
  ExperimentConfig other = cfg;
  other.bands = 3;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("exploration schedule") {
  ExperimentConfig cfg = small_config();
  cfg.total_slots = 1000;
  CHECK(epsilon_at(cfg, 0) == cfg.epsilon_start);
  CHECK(epsilon_at(cfg, 300) == doctest::Approx(0.5 * (cfg.epsilon_start + cfg.epsilon_end)));
  CHECK(epsilon_at(cfg, 600) == cfg.epsilon_end);
  CHECK(epsilon_at(cfg, 999) == cfg.epsilon_end);
}

TEST_CASE("fully exploring training acts exactly like the random baseline") {
  ExperimentConfig cfg = small_config();
  cfg.total_slots = 3000;
  cfg.warmup_experiences = 3000;
  std::vector<mdp::Decision> trained;
  TrainOptions opts;
  opts.fixed_epsilon = 1.0;
  opts.on_decision = [&](const sim::Environment&, const mdp::Decision& d) { trained.push_back(d); };
  const auto res = train_offline(cfg, 7, opts);
  CHECK(res.loss.empty());
  REQUIRE(trained.size() == 3000);

  sim::Environment env(cfg, 7);
  for (std::size_t j = 0; j < trained.size(); ++j) {
    const auto d = decide_baseline(PolicyKind::random, env.states(), env.feasibility(), env.grouping(),
                                   env.bands(), env.policy_rng());
    REQUIRE(d.band_flag == trained[j].band_flag);
    REQUIRE(d.scheduled == trained[j].scheduled);
    REQUIRE(d.band_index == trained[j].band_index);
    env.step(d);
  }
}

TEST_CASE("short training runs are reproducible") {
  ExperimentConfig cfg = small_config();
  cfg.total_slots = 120;
  cfg.warmup_experiences = 40;
  cfg.target_sync_period = 20;
  const auto a = train_offline(cfg, 3);
  const auto b = train_offline(cfg, 3);
  REQUIRE(a.loss.size() == b.loss.size());
  CHECK(!a.loss.empty());
  for (std::size_t i = 0; i < a.loss.size(); ++i) CHECK(a.loss[i] == b.loss[i]);
  CHECK(a.params.w3 == b.params.w3);
  CHECK(a.rng_state == b.rng_state);
}
