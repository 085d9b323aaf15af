// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "aoirrm/clustering.hpp"
#include "aoirrm/config.hpp"
#include "aoirrm/harness.hpp"
#include "aoirrm/mdp.hpp"
#include "aoirrm/phy.hpp"
#include "aoirrm/report.hpp"
#include "aoirrm/toy.hpp"
#include "gradcheck.hpp"

namespace fs = std::filesystem;
using namespace aoirrm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::string cli;
  fs::path workdir;
  fs::path config_path;
  ExperimentConfig scaled;
  std::optional<drqn::DrqnParams> trained;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

// 1. closed forms against independent evaluations
Outcome closed_forms(Context&) {
  const phy::PhyParams p;
  const double phi = std::pow(10.0, -6.85);
  const double rho = std::pow(10.0, -5.45);
  const double eta = 1.61;
  const double noise = 2.0 * 800e3 * std::pow(10.0, -17.4) * 1e-3;  // C + W sigma^2, C = W sigma^2
  double worst = 0.0;
  int mismatches = 0;
  auto real = [&](double got, double want) { worst = std::max(worst, rel_err(got, want)); };
  auto exact = [&](long got, long want) { mismatches += got != want; };

  const double h_los = phy::channel_gain(mobility::LinkClass::los, {0.0, 4.0}, {50.0, 4.0}, p);
  real(h_los, phi * std::pow(50.0, -eta));
  real(phy::channel_gain(mobility::LinkClass::wlos, {0.0, 0.0}, {30.0, 20.0}, p), phi * std::pow(50.0, -eta));
  real(phy::channel_gain(mobility::LinkClass::nlos, {100.0, 4.0}, {4.0, 150.0}, p),
       rho * std::pow(96.0 * 146.0, -eta));

  const double h = 2.60e-10;
  const double raw = 3e-3 * 800e3 * std::log2(1.0 + h * 2.0 / noise) / 2000.0;
  exact(phy::capacity_packets(h, 1, p), static_cast<long>(std::floor(raw)));
  exact(phy::capacity_packets(h, 1, p), 19);
  exact(phy::max_packets(h, 1, p, 15), 15);
  const double power = noise / h * (std::pow(2.0, 5.0 * 2000.0 / (3e-3 * 800e3)) - 1.0);
  real(phy::tx_power(h, 1, 5, p), power);
  exact(phy::tx_power(h, 1, 0, p) == 0.0, 1);
  exact(phy::tx_power(h, 0, 0, p) == 0.0, 1);

  exact(phy::packet_drops(0, 0, 0), 0);
  exact(phy::packet_drops(4, 0, 0), 4);
  exact(phy::packet_drops(5, 1, 3), 2);
  exact(phy::advance_aoi(5, 1, 2, 100), 1);
  exact(phy::advance_aoi(5, 1, 0, 100), 6);
  exact(phy::advance_aoi(100, 0, 0, 100), 100);

  real(mdp::utility(0.0, 0.0, 1.0, 2.0, 0.9), 1.0 + 2.0 + 0.9 * std::exp(-1.0));
  real(mdp::utility(power, 0.0, 1.0, 2.0, 0.9), std::exp(-power) + 2.0 + 0.9 * std::exp(-1.0));
  real(mdp::utility(0.0, 700.0, 700.0, 2.0, 0.9), 1.0);

  return {worst <= 1e-6 && mismatches == 0,
          "max relative error " + fmt(worst) + ", integer mismatches " + std::to_string(mismatches)};
}

template <class Pick>
double decomposition_gap(const mdp::ToyMdp& toy, int steps, Rng& rng, Pick pick) {
  mdp::QTable joint(mdp::QTable::Scope::joint);
  std::array<mdp::QTable, 2> per;
  int s = 0;
  auto a = pick(s);
  double worst = 0.0;
  for (int j = 0; j < steps; ++j) {
    const int s2 = toy.sample_next(s, a, rng);
    const auto a2 = pick(s2);
    const double alpha = 1.0 / (1.0 + static_cast<double>(joint.visits({s}, mdp::action_key(a))));
    const double u = toy.pair_utility(s, 0, a[0]) + toy.pair_utility(s, 1, a[1]);
    const double qj = mdp::sarsa_update_joint(joint, {s}, a, u, {s2}, a2, alpha, 0.9);
    double sum = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      sum += mdp::sarsa_update_per_vue(per[k], {s}, a[k], toy.pair_utility(s, static_cast<int>(k), a[k]),
                                       {s2}, a2[k], alpha, 0.9);
    }
    worst = std::max(worst, std::abs(sum - qj));
    s = s2;
    a = a2;
  }
  return worst;
}

// 2. joint vs summed per-pair SARSA on the two-pair, one-band toy
Outcome decomposition(Context&) {
  mdp::ToySpec spec;
  spec.work_conserving = true;
  const mdp::ToyMdp toy(spec);
  Rng rng(2);
  auto pick = [&](int s) {
    const auto& acts = toy.actions(s);
    return acts[std::min(acts.size() - 1, static_cast<std::size_t>(uniform01(rng) * acts.size()))];
  };
  const double worst = decomposition_gap(toy, 100000, rng, pick);
  return {worst <= 1e-9, "max |sum_k Q_k - Q| over 1e5 steps = " + fmt(worst)};
}

// 3. greedy policy from per-pair SARSA vs value iteration
Outcome convergence(Context&) {
  const mdp::ToyMdp toy(mdp::ToySpec{});
  const auto vi = mdp::value_iteration_oracle(toy.mdp(), 0.9, 1e-12);
  mdp::LearnCfg cfg;
  cfg.discount = 0.9;
  cfg.epsilon_start = 1.0;
  cfg.epsilon_end = 0.01;
  const std::uint64_t steps = 1000000;
  cfg.epsilon_decay_steps = steps / 2;
  Rng rng(3);
  const auto res = mdp::train_toy_sarsa(toy, steps, cfg, rng);
  const Eigen::VectorXd v = mdp::evaluate_policy(toy.mdp(), res.greedy_policy, 0.9);
  const double gap = (vi.values.mean() - v.mean()) / vi.values.mean();
  double worst_state = 0.0;
  for (int s = 0; s < toy.num_states(); ++s) {
    worst_state = std::max(worst_state, (vi.values(s) - v(s)) / vi.values(s));
  }
  return {gap <= 0.01, std::to_string(toy.num_states()) + " states; value gap from a uniform start " +
                           fmt(100.0 * gap, 3) + "% (worst single state " + fmt(100.0 * worst_state, 3) + "%)"};
}

// 4. BPTT gradient vs central differences
Outcome gradient(Context&) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    drqn::NetShape s;
    s.features = 3;
    s.hidden = 4;
    s.dense = 4;
    s.actions = 4;
    s.window = 5;
    const auto theta = testing::random_params(s, rng);
    const auto target = drqn::sync_target(testing::random_params(s, rng));
    std::vector<drqn::Experience> exps;
    for (int i = 0; i < 4; ++i) exps.push_back(testing::random_experience(s, 2, rng));
    std::vector<const drqn::Experience*> batch;
    for (const auto& e : exps) batch.push_back(&e);
    worst = std::max(worst, testing::max_gradient_error(theta, target, batch, 0.9, 1e-5));
  }
  return {worst <= 1e-4, "max relative error over 10 seeds " + fmt(worst)};
}

// 5. eigen residuals and blob separation
Outcome spectral(Context&) {
  double worst_res = 0.0;
  int split = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<Vec2> pts;
    for (int i = 0; i < 32; ++i) pts.push_back({250.0 * uniform01(rng), 250.0 * uniform01(rng)});
    const auto sim = clustering::similarity_matrix(pts, 150.0, 30.0);
    for (const Eigen::MatrixXd& a : {Eigen::MatrixXd(sim.entries), clustering::normalized_laplacian(sim)}) {
      const auto e = clustering::jacobi_eigen(a);
      for (int i = 0; i < a.rows(); ++i) {
        worst_res = std::max(worst_res, (a * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).cwiseAbs().maxCoeff());
      }
    }

    std::vector<Vec2> blob;
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < 8; ++i) blob.push_back({15.0 + 200.0 * b + 20.0 * uniform01(rng), 110.0 + 20.0 * uniform01(rng)});
    }
    const auto g = clustering::cluster_groups(blob, 2, {}, rng);
    bool ok = true;
    for (int i = 0; i < 16; ++i) ok &= (g.group_of[static_cast<std::size_t>(i)] == g.group_of[0]) == (i < 8);
    split += ok;
  }
  return {worst_res <= 1e-8 && split == 20,
          "max residual " + fmt(worst_res) + ", blobs split " + std::to_string(split) + "/20"};
}

double window_mean(const std::vector<std::pair<int, double>>& loss, int end_slot, int width) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [slot, v] : loss) {
    if (slot > end_slot - width && slot <= end_slot) {
      sum += v;
      ++n;
    }
  }
  return n ? sum / n : std::nan("");
}

// 6. scaled training
Outcome training(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = harness::train_offline(ctx.scaled, ctx.scaled.seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.trained = res.params;
  const fs::path out = ctx.workdir / "scaled_train";
  fs::create_directories(out);
  std::ofstream os(out / "loss.csv");
  report::write_loss_csv(os, res.loss);

  const double at_2000 = window_mean(res.loss, 2000, 500);
  const double terminal = window_mean(res.loss, res.slots_run - 1, 500);
  const double ratio = terminal / at_2000;
  return {ratio <= 0.5 && secs <= 600.0,
          std::to_string(res.slots_run) + " slots in " + fmt(secs, 3) + " s; 500-slot loss average " +
              fmt(at_2000) + " at slot 2000, " + fmt(terminal) + " at the end, ratio " + fmt(ratio, 3)};
}

const std::vector<std::uint64_t> kEvalSeeds{101, 102, 103, 104, 105};
const std::vector<harness::PolicyKind> kAllPolicies{
    harness::PolicyKind::proposed, harness::PolicyKind::channel_aware, harness::PolicyKind::packet_aware,
    harness::PolicyKind::aoi_aware, harness::PolicyKind::random};

std::map<std::pair<double, harness::PolicyKind>, std::vector<harness::EpisodeSummary>> by_cell(
    const std::vector<harness::SweepCell>& cells) {
  std::map<std::pair<double, harness::PolicyKind>, std::vector<harness::EpisodeSummary>> out;
  for (const auto& c : cells) out[{c.value, c.policy}].push_back(c.result.summary);
  return out;
}

report::MeanStd stat(const std::vector<harness::EpisodeSummary>& v, double harness::EpisodeSummary::*m) {
  std::vector<double> xs;
  for (const auto& s : v) xs.push_back(s.*m);
  return report::mean_std(xs);
}

// 7. trained policy vs baselines
Outcome policy_quality(Context& ctx) {
  if (!ctx.trained) return {false, "no trained network"};
  const auto cells = harness::run_experiment(ctx.scaled, "B", {static_cast<double>(ctx.scaled.bands)},
                                             kAllPolicies, kEvalSeeds, &*ctx.trained, 5000);
  const auto groups = by_cell(cells);
  const double b = ctx.scaled.bands;
  const auto prop = stat(groups.at({b, harness::PolicyKind::proposed}), &harness::EpisodeSummary::utility);
  bool pass = true;
  std::string detail = "proposed " + fmt(prop.mean) + " (sd " + fmt(prop.stddev, 2) + ")";
  for (auto k : kAllPolicies) {
    if (k == harness::PolicyKind::proposed) continue;
    const auto o = stat(groups.at({b, k}), &harness::EpisodeSummary::utility);
    const double pooled = std::sqrt(0.5 * (prop.stddev * prop.stddev + o.stddev * o.stddev));
    detail += std::string("; ") + harness::to_string(k) + " " + fmt(o.mean) + " (sd " + fmt(o.stddev, 2) + ")";
    if (k == harness::PolicyKind::random) pass &= prop.mean >= 1.05 * o.mean;
    pass &= prop.mean >= o.mean - pooled;
  }
  return {pass, detail};
}

bool monotone(const std::vector<double>& v, bool increasing) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (increasing ? v[i] < v[i - 1] : v[i] > v[i - 1]) return false;
  }
  return true;
}

std::string series(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + fmt(v[i], 5);
  return s;
}

// 8. trends in B and ell
Outcome trends(Context& ctx) {
  if (!ctx.trained) return {false, "no trained network"};
  const std::vector<double> bs{1.0, 2.0, 3.0};
  const std::vector<double> ells{20.0, 40.0, 60.0};
  const auto b_cells = by_cell(harness::run_experiment(ctx.scaled, "B", bs, kAllPolicies, kEvalSeeds, &*ctx.trained, 5000));
  const auto l_cells = by_cell(harness::run_experiment(ctx.scaled, "ell", ells, kAllPolicies, kEvalSeeds, &*ctx.trained, 5000));
  bool pass = true;
  std::string detail;
  for (auto k : kAllPolicies) {
    std::vector<double> power, drops, aoi, util;
    for (double b : bs) {
      power.push_back(stat(b_cells.at({b, k}), &harness::EpisodeSummary::power_w).mean);
      drops.push_back(stat(b_cells.at({b, k}), &harness::EpisodeSummary::drops).mean);
      aoi.push_back(stat(b_cells.at({b, k}), &harness::EpisodeSummary::aoi_slots).mean);
    }
    for (double l : ells) util.push_back(stat(l_cells.at({l, k}), &harness::EpisodeSummary::utility).mean);
    const bool bp = monotone(power, true), bd = monotone(drops, false), ba = monotone(aoi, false);
    const bool lu = monotone(util, false);
    pass &= bp && bd && ba && lu;
    detail += std::string("\n    ") + harness::to_string(k) + ": B power " + series(power) + (bp ? " ok" : " FAIL") +
              ", drops " + series(drops) + (bd ? " ok" : " FAIL") + ", aoi " + series(aoi) + (ba ? " ok" : " FAIL") +
              "; ell utility " + series(util) + (lu ? " ok" : " FAIL");
  }
  return {pass, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

// 9. byte-identical CLI output on repeated runs
Outcome determinism(Context& ctx) {
  if (ctx.cli.empty()) return {false, "no --cli binary given"};
  const std::string cli = "'" + ctx.cli + "'";
  const std::string cfg = "'" + ctx.config_path.string() + "'";
  int failures = 0;
  int compared = 0;
  std::string bad;
  auto same = [&](const fs::path& a, const fs::path& b) {
    ++compared;
    const std::string x = slurp(a), y = slurp(b);
    if (x.empty() || x != y) {
      ++failures;
      bad += " " + a.filename().string();
    }
  };
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = ctx.workdir / ("cli_" + std::to_string(rep));
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string q = "'" + d.string() + "'";
    failures += run(cli + " train --config " + cfg + " --out " + q + "/train --slots 700") != 0;
    failures += run(cli + " eval --config " + cfg + " --policy proposed --checkpoint " + q +
                    "/train/checkpoint.bin --slots 500 --seed 9 --out " + q + "/eval_proposed.csv") != 0;
    failures += run(cli + " eval --config " + cfg + " --policy random --slots 500 --seed 9 --out " + q +
                    "/eval_random.csv") != 0;
    failures += run(cli + " sweep --config " + cfg + " --param B --values 1,2 --policies proposed,channel,random"
                    " --seeds 1,2 --slots 300 --checkpoint " + q + "/train/checkpoint.bin --out " + q + "/sweep") != 0;
    failures += run(cli + " cluster-demo --config " + cfg + " --out " + q + "/clusters.csv") != 0;
  }
  const fs::path a = ctx.workdir / "cli_0", b = ctx.workdir / "cli_1";
  for (const char* f : {"train/loss.csv", "train/train_utility.csv", "train/checkpoint.bin", "eval_proposed.csv",
                        "eval_random.csv", "sweep/metrics.csv", "sweep/summary.csv", "clusters.csv"}) {
    same(a / f, b / f);
  }
  return {failures == 0, std::to_string(compared) + " outputs compared" +
                             (bad.empty() ? std::string(", all identical") : ", differing or missing:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  Context ctx;
  std::string workdir = "acceptance_work";
  std::string config = AOIRRM_CONFIG_DIR "/scaled.json";
  std::vector<int> only;
  app.add_option("--cli", ctx.cli, "path to the aoirrm binary");
  app.add_option("--workdir", workdir);
  app.add_option("--config", config, "scaled experiment config");
  app.add_option("--only", only, "run a subset of criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  ctx.workdir = fs::absolute(workdir);
  ctx.config_path = fs::absolute(config);
  fs::create_directories(ctx.workdir);
  ctx.scaled = load_config(ctx.config_path.string());

  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome(Context&)> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "closed-form equations", 1.0, closed_forms},
      {2, "decomposition identity", 10.0, decomposition},
      {3, "convergence to the optimum", 120.0, convergence},
      {4, "gradient check", 30.0, gradient},
      {5, "spectral clustering", 10.0, spectral},
      {6, "scaled training loss", 600.0, training},
      {7, "policy quality", 0.0, policy_quality},
      {8, "trend reproduction", 0.0, trends},
      {9, "determinism", 0.0, determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    std::string timing = fmt(secs, 3) + " s";
    if (c.limit_s > 0.0) {
      timing += " of " + fmt(c.limit_s, 4) + " s allowed";
      pass &= secs <= c.limit_s;
    }
    failed += !pass;
    std::cout << "CRITERION " << c.id << ' ' << (pass ? "PASS" : "FAIL") << ": " << c.name << " [" << timing
              << "] " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "ALL CRITERIA PASS" : std::to_string(failed) + " CRITERIA FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
