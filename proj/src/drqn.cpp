#include "aoirrm/drqn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

namespace aoirrm::drqn {

NetShape shape_for(int r_max_global, int window) {
  NetShape s;
  s.actions = 2 * (1 + r_max_global);
  s.window = window;
  return s;
}

DrqnParams DrqnParams::zeros(const NetShape& s) {
  if (s.features < 1 || s.hidden < 1 || s.dense < 1 || s.actions < 2 || s.window < 1) {
    throw ShapeError("network shape dimensions must be positive");
  }
  DrqnParams p;
  p.shape = s;
  p.w_x = Eigen::MatrixXd::Zero(4 * s.hidden, s.features);
  p.w_h = Eigen::MatrixXd::Zero(4 * s.hidden, s.hidden);
  p.b = Eigen::MatrixXd::Zero(4 * s.hidden, 1);
  p.w1 = Eigen::MatrixXd::Zero(s.dense, s.hidden);
  p.b1 = Eigen::MatrixXd::Zero(s.dense, 1);
  p.w2 = Eigen::MatrixXd::Zero(s.dense, s.dense);
  p.b2 = Eigen::MatrixXd::Zero(s.dense, 1);
  p.w3 = Eigen::MatrixXd::Zero(s.actions, s.dense);
  p.b3 = Eigen::MatrixXd::Zero(s.actions, 1);
  return p;
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> DrqnParams::tensors() {
  return {{"lstm.w_x", &w_x}, {"lstm.w_h", &w_h}, {"lstm.b", &b},   {"dense1.w", &w1},
          {"dense1.b", &b1},  {"dense2.w", &w2},  {"dense2.b", &b2}, {"head.w", &w3},
          {"head.b", &b3}};
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> DrqnParams::tensors() const {
  return {{"lstm.w_x", &w_x}, {"lstm.w_h", &w_h}, {"lstm.b", &b},   {"dense1.w", &w1},
          {"dense1.b", &b1},  {"dense2.w", &w2},  {"dense2.b", &b2}, {"head.w", &w3},
          {"head.b", &b3}};
}

std::size_t DrqnParams::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

namespace {

void fill_uniform(Eigen::MatrixXd& m, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = bound * (2.0 * uniform01(rng) - 1.0);
  }
}

}  // namespace

DrqnParams init_params(const NetShape& s, Rng& rng) {
  DrqnParams p = DrqnParams::zeros(s);
  fill_uniform(p.w_x, s.features, s.hidden, rng);
  fill_uniform(p.w_h, s.hidden, s.hidden, rng);
  p.b.block(s.hidden, 0, s.hidden, 1).setOnes();
  fill_uniform(p.w1, s.hidden, s.dense, rng);
  fill_uniform(p.w2, s.dense, s.dense, rng);
  fill_uniform(p.w3, s.dense, s.actions, rng);
  return p;
}

TargetParams sync_target(const DrqnParams& theta) { return TargetParams(theta); }

FeatureNorms make_feature_norms(double side_m, const phy::PhyParams& p,
                                const phy::TrafficParams& t) {
  FeatureNorms n;
  n.side_m = side_m;
  n.log_gain_lo = std::log(p.psi * p.rho * std::pow(side_m * side_m, -p.eta));
  n.log_gain_hi = std::log(p.psi * p.phi);
  n.x_max = t.x_max;
  n.a_max = t.a_max_slots;
  n.r_max = t.r_max_global;
  return n;
}

Eigen::VectorXd encode_features(const mdp::VuePairState& s, const mdp::Observation& o,
                                const FeatureNorms& n) {
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
  Eigen::VectorXd f(kFeatureDim);
  f(0) = unit(s.vtx_position.x / n.side_m);
  f(1) = unit(s.vtx_position.y / n.side_m);
  f(2) = unit(s.vrx_position.x / n.side_m);
  f(3) = unit(s.vrx_position.y / n.side_m);
  f(4) = s.gain > 0.0
             ? unit((std::log(s.gain) - n.log_gain_lo) / (n.log_gain_hi - n.log_gain_lo))
             : 0.0;
  f(5) = unit(static_cast<double>(s.arrivals) / n.x_max);
  f(6) = unit(static_cast<double>(s.aoi_slots) / n.a_max);
  f(7) = o.prev_band_flag;
  f(8) = unit(static_cast<double>(o.prev_scheduled) / n.r_max);
  return f;
}

namespace {

struct SeqRef {
  const Eigen::MatrixXd* frames;
  int offset;
};

struct Cache {
  std::vector<Eigen::MatrixXd> x;                // per step, F x S
  std::vector<Eigen::MatrixXd> i, f, g, o;       // per step, H x S
  std::vector<Eigen::MatrixXd> c, tanh_c, h;     // index 0 is the zero state
  Eigen::MatrixXd a1, z1, a2, z2, y;
  Eigen::MatrixXd z;  // gate pre-activations
};

void forward(const DrqnParams& p, const std::vector<SeqRef>& seqs, Cache& cache, bool keep) {
  const NetShape& s = p.shape;
  const auto n = static_cast<Eigen::Index>(seqs.size());
  const int hd = s.hidden;
  const auto steps = static_cast<std::size_t>(s.window);
  for (const auto& q : seqs) {
    if (q.frames->rows() != s.features || q.frames->cols() < q.offset + s.window) {
      throw ShapeError("window shape does not match the network");
    }
  }
  // without `keep` every step reuses slot 0 (state) and slot 0/1 (cell, hidden)
  const std::size_t gates = keep ? steps : 1;
  cache.x.resize(gates);
  cache.i.resize(gates);
  cache.f.resize(gates);
  cache.g.resize(gates);
  cache.o.resize(gates);
  cache.c.resize(gates + 1);
  cache.tanh_c.resize(gates + 1);
  cache.h.resize(gates + 1);
  cache.c[0].setZero(hd, n);
  cache.h[0].setZero(hd, n);
  cache.tanh_c[0].setZero(hd, n);

  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t cur = keep ? t : 0;
    const std::size_t prev = keep ? t : 0;
    const std::size_t next = keep ? t + 1 : 1;
    Eigen::MatrixXd& x = cache.x[cur];
    x.resize(s.features, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& q = seqs[static_cast<std::size_t>(k)];
      x.col(k) = q.frames->col(q.offset + static_cast<Eigen::Index>(t));
    }
    Eigen::MatrixXd& z = cache.z;
    z.noalias() = p.w_x * x;
    z.noalias() += p.w_h * cache.h[prev];
    z.colwise() += p.b.col(0);
    cache.i[cur] = (1.0 + (-z.topRows(hd).array()).exp()).inverse().matrix();
    cache.f[cur] = (1.0 + (-z.middleRows(hd, hd).array()).exp()).inverse().matrix();
    cache.g[cur] = z.middleRows(2 * hd, hd).array().tanh().matrix();
    cache.o[cur] = (1.0 + (-z.bottomRows(hd).array()).exp()).inverse().matrix();
    cache.c[next] = (cache.f[cur].array() * cache.c[prev].array() +
                     cache.i[cur].array() * cache.g[cur].array()).matrix();
    cache.tanh_c[next] = cache.c[next].array().tanh().matrix();
    cache.h[next] = (cache.o[cur].array() * cache.tanh_c[next].array()).matrix();
    if (!keep) {
      cache.c[0].swap(cache.c[1]);
      cache.h[0].swap(cache.h[1]);
    }
  }
  const Eigen::MatrixXd& h = cache.h[keep ? steps : 0];
  cache.a1.noalias() = p.w1 * h;
  cache.a1.colwise() += p.b1.col(0);
  cache.z1 = cache.a1.cwiseMax(0.0);
  cache.a2.noalias() = p.w2 * cache.z1;
  cache.a2.colwise() += p.b2.col(0);
  cache.z2 = cache.a2.cwiseMax(0.0);
  cache.y.noalias() = p.w3 * cache.z2;
  cache.y.colwise() += p.b3.col(0);
}

void backward(const DrqnParams& p, const Cache& cache, const Eigen::MatrixXd& dy, DrqnParams& g) {
  const int hd = p.shape.hidden;
  g.w3.noalias() = dy * cache.z2.transpose();
  g.b3 = dy.rowwise().sum();
  Eigen::MatrixXd da2 = p.w3.transpose() * dy;
  da2 = (cache.a2.array() > 0.0).select(da2, 0.0);
  g.w2.noalias() = da2 * cache.z1.transpose();
  g.b2 = da2.rowwise().sum();
  Eigen::MatrixXd da1 = p.w2.transpose() * da2;
  da1 = (cache.a1.array() > 0.0).select(da1, 0.0);
  const int steps = p.shape.window;
  g.w1.noalias() = da1 * cache.h[static_cast<std::size_t>(steps)].transpose();
  g.b1 = da1.rowwise().sum();

  Eigen::MatrixXd dh = p.w1.transpose() * da1;
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(dh.rows(), dh.cols());
  Eigen::MatrixXd dz(4 * hd, dh.cols());
  g.w_x.setZero();
  g.w_h.setZero();
  g.b.setZero();
  for (int t = steps; t >= 1; --t) {
    const auto ti = static_cast<std::size_t>(t);
    const auto& gi = cache.i[ti - 1];
    const auto& gf = cache.f[ti - 1];
    const auto& gg = cache.g[ti - 1];
    const auto& go = cache.o[ti - 1];
    const auto& tc = cache.tanh_c[ti];
    dc.array() += dh.array() * go.array() * (1.0 - tc.array().square());
    dz.bottomRows(hd) = (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
    dz.topRows(hd) = (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
    dz.middleRows(hd, hd) =
        (dc.array() * cache.c[ti - 1].array() * gf.array() * (1.0 - gf.array())).matrix();
    dz.middleRows(2 * hd, hd) = (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();
    g.w_x.noalias() += dz * cache.x[ti - 1].transpose();
    g.w_h.noalias() += dz * cache.h[ti - 1].transpose();
    g.b += dz.rowwise().sum();
    dh.noalias() = p.w_h.transpose() * dz;
    dc = (dc.array() * gf.array()).matrix();
  }
}

std::vector<SeqRef> refs(const std::vector<const Experience*>& batch, int offset) {
  std::vector<SeqRef> out;
  for (const Experience* e : batch) {
    for (const auto& f : e->frames) out.push_back({&f, offset});
  }
  return out;
}

struct Residuals {
  std::vector<double> delta;  // per experience
  std::vector<int> chosen;    // action output index per sequence
  double loss = 0.0;
};

Residuals residuals(const DrqnParams& theta, const TargetParams& target,
                    const std::vector<const Experience*>& batch, double gamma, Cache& cache,
                    bool keep) {
  if (batch.empty()) throw PreconditionError("loss_and_grad: empty batch");
  if (!(target.params().shape == theta.shape)) throw ShapeError("target network shape differs");
  const int r_max = theta.shape.actions / 2 - 1;
  thread_local Cache tcache;
  forward(target.params(), refs(batch, 1), tcache, false);
  forward(theta, refs(batch, 0), cache, keep);

  Residuals res;
  std::size_t col = 0;
  for (const Experience* e : batch) {
    const std::size_t k = e->frames.size();
    if (e->actions.size() != k || e->next_actions.size() != k || e->utilities.size() != k) {
      throw ShapeError("experience fields disagree on the number of pairs");
    }
    double d = 0.0;
    for (std::size_t j = 0; j < k; ++j, ++col) {
      const int a = action_index(e->actions[j], r_max);
      const int a2 = action_index(e->next_actions[j], r_max);
      if (a < 0 || a >= theta.shape.actions || a2 < 0 || a2 >= theta.shape.actions) {
        throw ShapeError("action outside the network head");
      }
      d += (1.0 - gamma) * e->utilities[j] +
           gamma * tcache.y(a2, static_cast<Eigen::Index>(col)) -
           cache.y(a, static_cast<Eigen::Index>(col));
      res.chosen.push_back(a);
    }
    res.delta.push_back(d);
    res.loss += d * d;
  }
  res.loss /= static_cast<double>(batch.size());
  return res;
}

}  // namespace

Eigen::MatrixXd drqn_forward_batch(const DrqnParams& theta,
                                   const std::vector<const Eigen::MatrixXd*>& windows) {
  std::vector<SeqRef> seqs;
  seqs.reserve(windows.size());
  for (const auto* w : windows) {
    if (w->cols() != theta.shape.window) throw ShapeError("window length does not match N");
    seqs.push_back({w, 0});
  }
  Cache cache;
  forward(theta, seqs, cache, false);
  return cache.y;
}

Eigen::VectorXd drqn_forward(const DrqnParams& theta, const Eigen::MatrixXd& window) {
  return drqn_forward_batch(theta, {&window}).col(0);
}

LossAndGrad loss_and_grad(const DrqnParams& theta, const TargetParams& target,
                          const std::vector<const Experience*>& batch, double gamma) {
  thread_local Cache cache;
  const Residuals r = residuals(theta, target, batch, gamma, cache, true);
  Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(theta.shape.actions, cache.y.cols());
  const double scale = -2.0 / static_cast<double>(batch.size());
  std::size_t col = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    for (std::size_t j = 0; j < batch[e]->frames.size(); ++j, ++col) {
      dy(r.chosen[col], static_cast<Eigen::Index>(col)) += scale * r.delta[e];
    }
  }
  LossAndGrad out{r.loss, DrqnParams::zeros(theta.shape)};
  backward(theta, cache, dy, out.grad);
  return out;
}

double loss_value(const DrqnParams& theta, const TargetParams& target,
                  const std::vector<const Experience*>& batch, double gamma) {
  Cache cache;
  return residuals(theta, target, batch, gamma, cache, false).loss;
}

void adam_step(DrqnParams& theta, const DrqnParams& grad, AdamState& st) {
  auto params = theta.tensors();
  const auto grads = grad.tensors();
  if (params.size() != grads.size()) throw ShapeError("adam: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].second->rows() != grads[i].second->rows() ||
        params[i].second->cols() != grads[i].second->cols()) {
      throw ShapeError("adam: gradient shape mismatch for " + params[i].first);
    }
    if (!grads[i].second->allFinite()) {
      throw NonFiniteGradientError("adam: non-finite gradient in " + params[i].first);
    }
  }
  if (st.m.empty()) {
    for (const auto& [name, t] : params) {
      st.m.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
      st.v.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i].second->array();
    st.m[i] = st.beta1 * st.m[i].array() + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i].array() + (1.0 - st.beta2) * g.square();
    params[i].second->array() -=
        st.lr * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + st.eps);
  }
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw PreconditionError("replay memory capacity must be positive");
}

void ReplayMemory::push(Experience e) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(e));
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t count, Rng& rng) const {
  if (count > items_.size()) {
    throw UnderfilledMemoryError("replay memory holds " + std::to_string(items_.size()) +
                                 " experiences, " + std::to_string(count) + " requested");
  }
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t span = idx.size() - i;
    const std::size_t j = i + std::min(span - 1, static_cast<std::size_t>(uniform01(rng) * span));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

std::vector<const Experience*> ReplayMemory::sample_minibatch(std::size_t count, Rng& rng) const {
  std::vector<const Experience*> out;
  for (std::size_t i : sample_indices(count, rng)) out.push_back(&items_[i]);
  return out;
}

ObservationPool::ObservationPool(int pairs, int window, int features)
    : window_(window), features_(features), frames_(static_cast<std::size_t>(pairs)) {
  if (pairs < 1 || window < 1 || features < 1) {
    throw PreconditionError("observation pool dimensions must be positive");
  }
}

void ObservationPool::reset(int k, const Eigen::VectorXd& initial) {
  auto& q = frames_.at(static_cast<std::size_t>(k));
  q.assign(static_cast<std::size_t>(window_), initial);
}

void ObservationPool::push(int k, const Eigen::VectorXd& features) {
  if (features.size() != features_) throw ShapeError("observation has the wrong feature count");
  auto& q = frames_.at(static_cast<std::size_t>(k));
  if (q.empty()) {
    q.assign(static_cast<std::size_t>(window_), features);
    return;
  }
  q.pop_front();
  q.push_back(features);
}

Eigen::MatrixXd ObservationPool::window_of(int k) const {
  const auto& q = frames_.at(static_cast<std::size_t>(k));
  if (q.empty()) throw PreconditionError("observation pool used before reset");
  Eigen::MatrixXd w(features_, window_);
  for (int t = 0; t < window_; ++t) w.col(t) = q[static_cast<std::size_t>(t)];
  return w;
}

Eigen::MatrixXd ObservationPool::frames_with(int k, const Eigen::VectorXd& next) const {
  Eigen::MatrixXd w(features_, window_ + 1);
  w.leftCols(window_) = window_of(k);
  w.col(window_) = next;
  return w;
}

namespace {

constexpr char kMagic[8] = {'A', 'O', 'I', 'D', 'R', 'Q', 'N', '\0'};

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_bytes(std::istream& is, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    const int c = is.get();
    if (c == EOF) throw CheckpointError("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}
std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_bytes(is, 4)); }
std::uint64_t get_u64(std::istream& is) { return get_bytes(is, 8); }
std::string get_str(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 24)) throw CheckpointError("checkpoint string too long");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kCheckpointVersion);
  const NetShape& s = c.params.shape;
  for (int d : {s.features, s.hidden, s.dense, s.actions, s.window}) {
    put_u32(os, static_cast<std::uint32_t>(d));
  }
  put_u64(os, c.config_hash);
  put_str(os, c.rng_state);
  const auto tensors = c.params.tensors();
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_str(os, name);
    put_u32(os, static_cast<std::uint32_t>(t->rows()));
    put_u32(os, static_cast<std::uint32_t>(t->cols()));
    for (Eigen::Index i = 0; i < t->rows(); ++i) {
      for (Eigen::Index j = 0; j < t->cols(); ++j) put_u64(os, std::bit_cast<std::uint64_t>((*t)(i, j)));
    }
  }
  if (!os) throw CheckpointError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, kMagic)) throw CheckpointError("not a checkpoint: " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  NetShape s;
  s.features = static_cast<int>(get_u32(is));
  s.hidden = static_cast<int>(get_u32(is));
  s.dense = static_cast<int>(get_u32(is));
  s.actions = static_cast<int>(get_u32(is));
  s.window = static_cast<int>(get_u32(is));
  Checkpoint c;
  c.params = DrqnParams::zeros(s);
  c.config_hash = get_u64(is);
  c.rng_state = get_str(is);
  const std::uint32_t count = get_u32(is);
  auto tensors = c.params.tensors();
  if (count != tensors.size()) throw CheckpointError("checkpoint tensor count mismatch");
  for (auto& [name, t] : tensors) {
    if (get_str(is) != name) throw CheckpointError("checkpoint tensor order mismatch at " + name);
    const auto rows = static_cast<Eigen::Index>(get_u32(is));
    const auto cols = static_cast<Eigen::Index>(get_u32(is));
    if (rows != t->rows() || cols != t->cols()) {
      throw CheckpointError("checkpoint tensor " + name + " has the wrong shape");
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) (*t)(i, j) = std::bit_cast<double>(get_u64(is));
    }
  }
  return c;
}

}  // namespace aoirrm::drqn
