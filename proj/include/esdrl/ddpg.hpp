#pragma once

// Deterministic actor-critic (DDPG) building blocks: replay, the agent
// bundle, the critic and actor updates, and the frozen runtime policy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdrl/checkpoint.hpp"
#include "esdrl/nnet.hpp"
#include "esdrl/optim.hpp"

namespace esdrl::ddpg {

using nn::Matrix;
using nn::Vector;

/// Maps a raw observation to the network input: input_i = obs[pick_i] / scale_i.
struct InputTransform {
  std::vector<std::size_t> pick;
  std::vector<double> scale;

  static InputTransform identity(std::size_t n, double s = 1.0) {
    InputTransform t;
    t.pick.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.pick[i] = i;
    t.scale.assign(n, s);
    return t;
  }

  /// Envelope observations ([X, Y, X', Y'] with `grid` samples each): keeps
  /// every `stride`-th sample and scales positions and slopes separately.
  static InputTransform envelope(std::size_t grid, std::size_t stride, double position_scale, double slope_scale) {
    if (stride == 0) throw std::invalid_argument("InputTransform: stride must be >= 1");
    InputTransform t;
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t k = 0; k < grid; k += stride) {
        t.pick.push_back(c * grid + k);
        t.scale.push_back(c < 2 ? position_scale : slope_scale);
      }
    return t;
  }

  std::size_t size() const { return pick.size(); }

  Vector apply(const std::vector<double>& obs) const {
    Vector v(static_cast<Eigen::Index>(pick.size()));
    for (std::size_t i = 0; i < pick.size(); ++i) {
      if (pick[i] >= obs.size()) throw std::invalid_argument("InputTransform: observation too short");
      v[static_cast<Eigen::Index>(i)] = obs[pick[i]] * scale[i];
    }
    return v;
  }
};

/// Stored in network-input space: `s` and `s_next` are transformed
/// observations, `a` is the normalized action in [-1, 1].
struct Transition {
  Vector s;
  Vector a;
  double r = 0;
  Vector s_next;
  int done = 0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  /// Uniform indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const {
    if (items_.size() < batch) throw std::logic_error("ReplayBuffer: fewer transitions than the batch size");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

struct Minibatch {
  Matrix S, A, S_next;  // columns are samples
  Vector r, done;

  std::size_t size() const { return static_cast<std::size_t>(r.size()); }
};

inline Minibatch gather(const ReplayBuffer& buf, const std::vector<std::size_t>& idx) {
  const auto& first = buf.at(idx.front());
  Minibatch mb;
  const auto B = static_cast<Eigen::Index>(idx.size());
  mb.S.resize(first.s.size(), B);
  mb.S_next.resize(first.s.size(), B);
  mb.A.resize(first.a.size(), B);
  mb.r.resize(B);
  mb.done.resize(B);
  for (Eigen::Index c = 0; c < B; ++c) {
    const auto& t = buf.at(idx[static_cast<std::size_t>(c)]);
    mb.S.col(c) = t.s;
    mb.S_next.col(c) = t.s_next;
    mb.A.col(c) = t.a;
    mb.r[c] = t.r;
    mb.done[c] = t.done;
  }
  return mb;
}

struct Hyperparameters {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-5;
  double critic_lr = 1e-4;
  double noise_sigma = 0.1;
  std::size_t batch = 128;
  std::size_t replay_capacity = 1'000'000;
  std::size_t warmup_batches = 10;  // learning starts once replay holds this many batches
  std::vector<int> actor_hidden{512, 512, 512};
  std::vector<int> critic_hidden{512, 512, 512};
  double actor_final_init = 1e-3;
  double critic_final_init = 3e-3;
};

/// Actor, critic, their targets and optimizers, plus the action mapping.
struct AgentBundle {
  Hyperparameters hp;
  InputTransform transform;
  std::vector<double> action_low, action_high;  // physical units
  std::vector<bool> action_mask;                // false: coordinate held at zero offset
  nn::Mlp actor, critic, actor_target, critic_target;
  nn::AdamState actor_opt, critic_opt;

  std::size_t obs_dim() const { return transform.size(); }
  std::size_t act_dim() const { return action_low.size(); }

  static AgentBundle create(const Hyperparameters& hp, InputTransform transform, std::vector<double> low,
                            std::vector<double> high, std::mt19937_64& rng) {
    if (low.size() != high.size() || low.empty()) throw std::invalid_argument("AgentBundle: bad action bounds");
    for (std::size_t i = 0; i < low.size(); ++i)
      if (!(low[i] < high[i])) throw std::invalid_argument("AgentBundle: action_low must be < action_high");
    if (!(hp.gamma >= 0 && hp.gamma < 1)) throw std::invalid_argument("AgentBundle: gamma must lie in [0, 1)");
    AgentBundle b;
    b.hp = hp;
    b.transform = std::move(transform);
    b.action_low = std::move(low);
    b.action_high = std::move(high);
    b.action_mask.assign(b.action_low.size(), true);
    const int obs = static_cast<int>(b.obs_dim());
    const int act = static_cast<int>(b.act_dim());

    nn::MlpSpec actor_spec;
    actor_spec.layer_sizes.push_back(obs);
    for (int h : hp.actor_hidden) actor_spec.layer_sizes.push_back(h);
    actor_spec.layer_sizes.push_back(act);
    actor_spec.output_activation = nn::OutputActivation::tanh_scaled;
    actor_spec.output_scale.assign(static_cast<std::size_t>(act), 1.0);

    nn::MlpSpec critic_spec;
    critic_spec.layer_sizes.push_back(obs + act);
    for (int h : hp.critic_hidden) critic_spec.layer_sizes.push_back(h);
    critic_spec.layer_sizes.push_back(1);

    b.actor = nn::Mlp(actor_spec);
    b.actor.initialize(rng, hp.actor_final_init);
    b.critic = nn::Mlp(critic_spec);
    b.critic.initialize(rng, hp.critic_final_init);
    b.actor_target = b.actor;
    b.critic_target = b.critic;
    b.actor_opt = nn::AdamState(b.actor.params(), hp.actor_lr);
    b.critic_opt = nn::AdamState(b.critic.params(), hp.critic_lr);
    return b;
  }

  /// Normalized action that maps to a zero physical offset.
  double neutral(std::size_t i) const {
    const double mid = 0.5 * (action_low[i] + action_high[i]);
    const double half = 0.5 * (action_high[i] - action_low[i]);
    return std::clamp(-mid / half, -1.0, 1.0);
  }

  /// Replaces masked rows of a normalized action batch with the neutral value.
  void apply_mask(Matrix& A) const {
    for (std::size_t i = 0; i < act_dim(); ++i)
      if (!action_mask[i]) A.row(static_cast<Eigen::Index>(i)).setConstant(neutral(i));
  }

  /// Normalized [-1, 1] to physical offsets, saturated at the limits.
  std::vector<double> to_physical(const Vector& a) const {
    std::vector<double> out(act_dim());
    for (std::size_t i = 0; i < act_dim(); ++i) {
      const double v = action_low[i] + 0.5 * (a[static_cast<Eigen::Index>(i)] + 1.0) * (action_high[i] - action_low[i]);
      out[i] = std::clamp(v, action_low[i], action_high[i]);
    }
    return out;
  }

  Vector act(const Vector& input) const {
    Matrix A = actor.forward(Matrix(input));
    apply_mask(A);
    return A.col(0);
  }

  /// Deterministic action plus N(0, sigma) per coordinate, clipped to [-1, 1].
  Vector explore(const Vector& input, std::mt19937_64& rng) const {
    Vector a = act(input);
    std::normal_distribution<double> noise(0.0, hp.noise_sigma);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double n = noise(rng);
      if (action_mask[static_cast<std::size_t>(i)]) a[i] = std::clamp(a[i] + n, -1.0, 1.0);
    }
    return a;
  }
};

inline Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

/// y_i = r_i + gamma (1 - d_i) Q'(s'_i, mu'(s'_i)); terminal rows never read the targets.
inline Vector td_targets(const AgentBundle& b, const Minibatch& mb) {
  Matrix A_next = b.actor_target.forward(mb.S_next);
  b.apply_mask(A_next);
  const Matrix q_next = b.critic_target.forward(stack(mb.S_next, A_next));
  Vector y(mb.r.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y[i] = mb.done[i] != 0.0 ? mb.r[i] : mb.r[i] + b.hp.gamma * q_next(0, i);
  return y;
}

/// One Adam step on the critic against the TD targets; returns the pre-step loss.
inline double critic_update(AgentBundle& b, const Minibatch& mb) {
  if (mb.size() != b.hp.batch) throw std::invalid_argument("critic_update: minibatch size != batch");
  const Vector y = td_targets(b, mb);
  nn::MlpTape tape;
  b.critic.forward(stack(mb.S, mb.A), tape);
  const Eigen::RowVectorXd err = tape.output.row(0) - y.transpose();
  const double n = static_cast<double>(mb.size());
  const double loss = err.squaredNorm() / n;
  const Matrix upstream = (2.0 / n) * err;
  const nn::MlpParams g = b.critic.backward(tape, upstream);
  nn::adam_step(b.critic.params(), g, b.critic_opt);
  return loss;
}

/// Gradient of mean_i Q(s_i, mu(s_i)) with respect to the actor parameters,
/// taken through the (frozen) critic. Also returns the objective value.
inline nn::MlpParams actor_gradient(const AgentBundle& b, const Matrix& S, double* objective = nullptr) {
  nn::MlpTape actor_tape;
  b.actor.forward(S, actor_tape);
  Matrix A = actor_tape.output;
  b.apply_mask(A);
  nn::MlpTape critic_tape;
  b.critic.forward(stack(S, A), critic_tape);
  const double n = static_cast<double>(S.cols());
  if (objective) *objective = critic_tape.output.sum() / n;
  Matrix d_input;
  b.critic.backward(critic_tape, Matrix::Constant(1, S.cols(), 1.0 / n), &d_input);
  Matrix dA = d_input.bottomRows(static_cast<Eigen::Index>(b.act_dim()));
  for (std::size_t i = 0; i < b.act_dim(); ++i)
    if (!b.action_mask[i]) dA.row(static_cast<Eigen::Index>(i)).setZero();
  return b.actor.backward(actor_tape, dA);
}

/// One Adam ascent step on the actor; returns the pre-step objective estimate.
inline double actor_update(AgentBundle& b, const Minibatch& mb) {
  if (mb.size() != b.hp.batch) throw std::invalid_argument("actor_update: minibatch size != batch");
  double objective = 0;
  nn::MlpParams g = actor_gradient(b, mb.S, &objective);
  g.for_each([](const std::string&, Eigen::Map<Vector> v) { v = -v; });
  nn::adam_step(b.actor.params(), g, b.actor_opt);
  return objective;
}

inline void update_targets(AgentBundle& b) {
  nn::polyak(b.actor_target.params(), b.actor.params(), b.hp.tau);
  nn::polyak(b.critic_target.params(), b.critic.params(), b.hp.tau);
}

// ---------------------------------------------------------------------------
// Persistence

inline void put_adam(nn::Checkpoint& ck, const std::string& prefix, const nn::AdamState& st) {
  st.m.for_each([&](const std::string& name, Eigen::Map<const Vector> v) {
    ck.arrays[prefix + ".m." + name] = std::vector<double>(v.data(), v.data() + v.size());
  });
  st.v.for_each([&](const std::string& name, Eigen::Map<const Vector> v) {
    ck.arrays[prefix + ".v." + name] = std::vector<double>(v.data(), v.data() + v.size());
  });
  ck.header["optimizers"][prefix] = {{"step", st.step}, {"learning_rate", st.learning_rate}, {"beta1", st.beta1},
                                     {"beta2", st.beta2}, {"epsilon", st.epsilon}};
}

inline nn::AdamState get_adam(const nn::Checkpoint& ck, const std::string& prefix, const nn::MlpParams& like) {
  nn::AdamState st(like, 0.0);
  const auto& h = ck.header.at("optimizers").at(prefix);
  st.step = h.at("step").get<long>();
  st.learning_rate = h.at("learning_rate").get<double>();
  st.beta1 = h.at("beta1").get<double>();
  st.beta2 = h.at("beta2").get<double>();
  st.epsilon = h.at("epsilon").get<double>();
  auto fill = [&](nn::MlpParams& p, const std::string& tag) {
    p.for_each([&](const std::string& name, Eigen::Map<Vector> v) {
      const auto& src = ck.arrays.at(prefix + "." + tag + "." + name);
      if (src.size() != static_cast<std::size_t>(v.size())) throw nn::CheckpointError("checkpoint: optimizer shape mismatch");
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = src[static_cast<std::size_t>(i)];
    });
  };
  fill(st.m, "m");
  fill(st.v, "v");
  return st;
}

inline void put_policy_header(nn::Checkpoint& ck, const AgentBundle& b) {
  ck.header["action_low"] = b.action_low;
  ck.header["action_high"] = b.action_high;
  std::vector<int> mask(b.action_mask.begin(), b.action_mask.end());
  ck.header["action_mask"] = mask;
  std::vector<double> pick(b.transform.pick.begin(), b.transform.pick.end());
  ck.arrays["transform.pick"] = pick;
  ck.arrays["transform.scale"] = b.transform.scale;
}

inline nn::Checkpoint bundle_checkpoint(const AgentBundle& b) {
  nn::Checkpoint ck;
  ck.header["kind"] = "ddpg_bundle";
  ck.header["hyperparameters"] = {{"gamma", b.hp.gamma},
                                  {"tau", b.hp.tau},
                                  {"actor_lr", b.hp.actor_lr},
                                  {"critic_lr", b.hp.critic_lr},
                                  {"noise_sigma", b.hp.noise_sigma},
                                  {"batch", b.hp.batch},
                                  {"replay_capacity", b.hp.replay_capacity},
                                  {"warmup_batches", b.hp.warmup_batches},
                                  {"actor_hidden", b.hp.actor_hidden},
                                  {"critic_hidden", b.hp.critic_hidden},
                                  {"actor_final_init", b.hp.actor_final_init},
                                  {"critic_final_init", b.hp.critic_final_init}};
  put_policy_header(ck, b);
  nn::put_network(ck, "actor", b.actor);
  nn::put_network(ck, "critic", b.critic);
  nn::put_network(ck, "actor_target", b.actor_target);
  nn::put_network(ck, "critic_target", b.critic_target);
  put_adam(ck, "actor_opt", b.actor_opt);
  put_adam(ck, "critic_opt", b.critic_opt);
  return ck;
}

inline InputTransform transform_from(const nn::Checkpoint& ck) {
  InputTransform t;
  for (double p : ck.arrays.at("transform.pick")) t.pick.push_back(static_cast<std::size_t>(p));
  t.scale = ck.arrays.at("transform.scale");
  if (t.pick.size() != t.scale.size()) throw nn::CheckpointError("checkpoint: transform arrays differ in length");
  return t;
}

inline AgentBundle bundle_from(const nn::Checkpoint& ck) {
  if (ck.header.value("kind", "") != "ddpg_bundle") throw nn::CheckpointError("checkpoint: not a ddpg bundle");
  AgentBundle b;
  const auto& h = ck.header.at("hyperparameters");
  b.hp.gamma = h.at("gamma");
  b.hp.tau = h.at("tau");
  b.hp.actor_lr = h.at("actor_lr");
  b.hp.critic_lr = h.at("critic_lr");
  b.hp.noise_sigma = h.at("noise_sigma");
  b.hp.batch = h.at("batch");
  b.hp.replay_capacity = h.at("replay_capacity");
  b.hp.warmup_batches = h.at("warmup_batches");
  b.hp.actor_hidden = h.at("actor_hidden").get<std::vector<int>>();
  b.hp.critic_hidden = h.at("critic_hidden").get<std::vector<int>>();
  b.hp.actor_final_init = h.at("actor_final_init");
  b.hp.critic_final_init = h.at("critic_final_init");
  b.action_low = ck.header.at("action_low").get<std::vector<double>>();
  b.action_high = ck.header.at("action_high").get<std::vector<double>>();
  for (int m : ck.header.at("action_mask").get<std::vector<int>>()) b.action_mask.push_back(m != 0);
  b.transform = transform_from(ck);
  b.actor = nn::get_network(ck, "actor");
  b.critic = nn::get_network(ck, "critic");
  const std::vector<int> actor_sizes = b.actor.spec().layer_sizes;
  const std::vector<int> critic_sizes = b.critic.spec().layer_sizes;
  b.actor_target = nn::get_network(ck, "actor_target", &actor_sizes);
  b.critic_target = nn::get_network(ck, "critic_target", &critic_sizes);
  if (actor_sizes.front() != static_cast<int>(b.transform.size()) || actor_sizes.back() != static_cast<int>(b.act_dim()))
    throw nn::CheckpointError("checkpoint: actor shape does not match transform or action bounds");
  b.actor_opt = get_adam(ck, "actor_opt", b.actor.params());
  b.critic_opt = get_adam(ck, "critic_opt", b.critic.params());
  return b;
}

// ---------------------------------------------------------------------------
// Runtime policy: o -> sat(mu(o)), actor only.

class RuntimePolicy {
 public:
  RuntimePolicy() = default;

  RuntimePolicy(nn::Mlp actor, InputTransform transform, std::vector<double> low, std::vector<double> high)
      : actor_(std::move(actor)), transform_(std::move(transform)), low_(std::move(low)), high_(std::move(high)) {
    if (low_.size() != high_.size() || static_cast<int>(low_.size()) != actor_.output_dim())
      throw std::invalid_argument("RuntimePolicy: action bounds do not match actor");
  }

  static RuntimePolicy from_bundle(const AgentBundle& b) {
    return RuntimePolicy(b.actor, b.transform, b.action_low, b.action_high);
  }

  /// Loads only the actor; critic and target arrays are ignored.
  static RuntimePolicy from_checkpoint(const nn::Checkpoint& ck) {
    auto low = ck.header.at("action_low").get<std::vector<double>>();
    auto high = ck.header.at("action_high").get<std::vector<double>>();
    auto transform = transform_from(ck);
    nn::Mlp actor = nn::get_network(ck, "actor");
    if (actor.input_dim() != static_cast<int>(transform.size()))
      throw nn::CheckpointError("checkpoint: actor input does not match the stored transform");
    return RuntimePolicy(std::move(actor), std::move(transform), std::move(low), std::move(high));
  }

  static RuntimePolicy load(const std::string& path) { return from_checkpoint(nn::load_checkpoint(path)); }

  std::size_t act_dim() const { return low_.size(); }
  const std::vector<double>& low() const { return low_; }
  const std::vector<double>& high() const { return high_; }

  std::vector<double> operator()(const std::vector<double>& observation) const {
    const Vector a = actor_.forward(transform_.apply(observation));
    std::vector<double> out(low_.size());
    for (std::size_t i = 0; i < low_.size(); ++i) {
      const double v = low_[i] + 0.5 * (a[static_cast<Eigen::Index>(i)] + 1.0) * (high_[i] - low_[i]);
      out[i] = std::clamp(v, low_[i], high_[i]);
    }
    return out;
  }

 private:
  nn::Mlp actor_;
  InputTransform transform_;
  std::vector<double> low_, high_;
};

}  // namespace esdrl::ddpg
