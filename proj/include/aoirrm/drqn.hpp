#pragma once

// Recurrent Q-network: an LSTM over a fixed window of per-pair observations,
// two ReLU dense layers and a linear head with one output per (F, R) action.

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aoirrm/common.hpp"
#include "aoirrm/mdp.hpp"
#include "aoirrm/phy.hpp"

namespace aoirrm::drqn {

inline constexpr int kFeatureDim = 9;

struct NetShape {
  int features = kFeatureDim;
  int hidden = 32;
  int dense = 32;
  int actions = 32;  // 2 * (1 + r_max)
  int window = 10;

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

NetShape shape_for(int r_max_global, int window);

/// Output index of action (f, r).
inline int action_index(mdp::Action a, int r_max) { return a.f * (1 + r_max) + a.r; }

struct DrqnParams {
  NetShape shape;
  // LSTM gates stacked as [input; forget; candidate; output]
  Eigen::MatrixXd w_x;  // 4H x F
  Eigen::MatrixXd w_h;  // 4H x H
  Eigen::MatrixXd b;    // 4H x 1
  Eigen::MatrixXd w1, b1;  // D x H, D x 1
  Eigen::MatrixXd w2, b2;  // D x D, D x 1
  Eigen::MatrixXd w3, b3;  // A x D, A x 1

  static DrqnParams zeros(const NetShape& shape);

  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors() const;
  std::size_t num_values() const;
};

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases, forget bias +1.
DrqnParams init_params(const NetShape& shape, Rng& rng);

/// Frozen copy used for bootstrap targets.
class TargetParams {
 public:
  TargetParams() = default;
  const DrqnParams& params() const { return params_; }

 private:
  explicit TargetParams(DrqnParams p) : params_(std::move(p)) {}
  friend TargetParams sync_target(const DrqnParams& theta);
  DrqnParams params_;
};

TargetParams sync_target(const DrqnParams& theta);

class ShapeError : public Error {
 public:
  using Error::Error;
};

struct FeatureNorms {
  double side_m = 250.0;
  double log_gain_lo = 0.0;
  double log_gain_hi = 1.0;
  int x_max = 15;
  int a_max = 100;
  int r_max = 15;
};

/// Log-gain range spans the weakest NLOS gain on the map up to the LOS gain at 1 m.
FeatureNorms make_feature_norms(double side_m, const phy::PhyParams& p,
                                const phy::TrafficParams& t);

Eigen::VectorXd encode_features(const mdp::VuePairState& s, const mdp::Observation& o,
                                const FeatureNorms& n);

/// Q-values for one window (features x N, oldest column first).
Eigen::VectorXd drqn_forward(const DrqnParams& theta, const Eigen::MatrixXd& window);

/// Q-values for many windows at once; column i belongs to windows[i].
Eigen::MatrixXd drqn_forward_batch(const DrqnParams& theta,
                                   const std::vector<const Eigen::MatrixXd*>& windows);

/// One slot transition for all pairs. `frames[k]` holds N+1 columns: the first
/// N are the window at the slot, the last N the window at the next slot.
struct Experience {
  std::vector<Eigen::MatrixXd> frames;
  std::vector<mdp::Action> actions;
  std::vector<mdp::Action> next_actions;
  std::vector<double> utilities;
};

struct LossAndGrad {
  double loss = 0.0;
  DrqnParams grad;
};

/// Mean over the batch of the squared per-experience residual
/// sum_k [(1-gamma) U_k + gamma Q_target(n'_k, a'_k) - Q(n_k, a_k)].
LossAndGrad loss_and_grad(const DrqnParams& theta, const TargetParams& target,
                          const std::vector<const Experience*>& batch, double gamma);

/// Loss only; used by finite-difference checks.
double loss_value(const DrqnParams& theta, const TargetParams& target,
                  const std::vector<const Experience*>& batch, double gamma);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
};

class NonFiniteGradientError : public Error {
 public:
  using Error::Error;
};

void adam_step(DrqnParams& theta, const DrqnParams& grad, AdamState& state);

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& at(std::size_t i) const { return items_.at(i); }

  /// Uniform sample without replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  std::vector<const Experience*> sample_minibatch(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Experience> items_;
};

class UnderfilledMemoryError : public Error {
 public:
  using Error::Error;
};

/// Sliding window of the N most recent encoded observations per pair.
class ObservationPool {
 public:
  ObservationPool(int pairs, int window, int features);

  /// Fills pair k's window with copies of `initial`.
  void reset(int k, const Eigen::VectorXd& initial);
  void push(int k, const Eigen::VectorXd& features);
  int pairs() const { return static_cast<int>(frames_.size()); }
  int window() const { return window_; }

  /// features x N, oldest column first.
  Eigen::MatrixXd window_of(int k) const;
  /// The window plus one extra column, used to build experiences.
  Eigen::MatrixXd frames_with(int k, const Eigen::VectorXd& next) const;

 private:
  int window_;
  int features_;
  std::vector<std::deque<Eigen::VectorXd>> frames_;
};

struct Checkpoint {
  DrqnParams params;
  std::uint64_t config_hash = 0;
  std::string rng_state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aoirrm::drqn
