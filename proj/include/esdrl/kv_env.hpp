#pragma once

// Episodic environments for the trainer: the envelope-tuning task and the
// interface every environment implements.

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdrl/kv_sim.hpp"
#include "esdrl/reward.hpp"

namespace esdrl {

struct EnvStep {
  std::vector<double> obs;  // empty when the step failed
  double reward = 0;
  bool done = false;
  bool failed = false;
};

/// Curriculum stage settings an environment may honour.
struct StageSettings {
  std::vector<bool> action_mask;  // empty: every coordinate active
  bool randomize_init = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<double> reset(std::mt19937_64& rng) = 0;
  /// `action` is in physical units, already saturated.
  virtual EnvStep step(const std::vector<double>& action) = 0;
  virtual void configure(const StageSettings&) {}
};

struct InitRanges {
  double radius_lo = 1.5e-3, radius_hi = 4.5e-3;  // m
  double slope_lo = -1e-2, slope_hi = 1e-2;        // rad
};

struct KvStepOutcome {
  std::vector<double> q_next;
  EnvelopeTrajectory traj;
  RewardBreakdown breakdown;
  double reward = 0;
  bool feasible = false;
};

/// Q_next = Q(0) + offset; integrates the envelope and scores it. On failure
/// the setting falls back to `q_current` (the last feasible one).
inline KvStepOutcome env_step(const Lattice& lattice, const RewardConfig& reward, const std::vector<double>& q_nominal,
                              const std::vector<double>& q_current, const std::vector<double>& offset,
                              const BeamInit& init) {
  if (offset.size() != q_nominal.size() || q_current.size() != q_nominal.size())
    throw std::invalid_argument("env_step: vector sizes do not match the lattice");
  KvStepOutcome out;
  std::vector<double> q(q_nominal.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = q_nominal[i] + offset[i];
  out.traj = integrate(lattice, q, init);
  out.feasible = out.traj.feasible;
  if (out.feasible) {
    out.breakdown = penalty(out.traj, reward);
    out.reward = out.breakdown.R;
    out.q_next = std::move(q);
  } else {
    out.reward = failure_reward(reward);
    out.q_next = q_current;
  }
  return out;
}

inline BeamInit sample_init(const InitRanges& r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> radius(r.radius_lo, r.radius_hi);
  std::uniform_real_distribution<double> slope(r.slope_lo, r.slope_hi);
  BeamInit b;
  b.X0 = radius(rng);
  b.Y0 = radius(rng);
  b.Xp0 = slope(rng);
  b.Yp0 = slope(rng);
  return b;
}

struct KvEnvConfig {
  Lattice lattice;
  RewardConfig reward;
  BeamInit init;
  std::vector<double> q_nominal;  // Q(0); defaults to the lattice nominal strengths
  InitRanges init_ranges;
};

class KvEnvironment : public Environment {
 public:
  explicit KvEnvironment(KvEnvConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.q_nominal.empty()) cfg_.q_nominal = cfg_.lattice.nominal_strengths();
    if (cfg_.q_nominal.size() != cfg_.lattice.size()) throw std::invalid_argument("KvEnvironment: q_nominal size mismatch");
    q_ = cfg_.q_nominal;
    init_ = cfg_.init;
  }

  std::size_t action_dim() const override { return cfg_.lattice.size(); }

  void configure(const StageSettings& s) override { stage_ = s; }

  std::vector<double> reset(std::mt19937_64& rng) override {
    init_ = stage_.randomize_init ? sample_init(cfg_.init_ranges, rng) : cfg_.init;
    q_ = cfg_.q_nominal;
    auto traj = integrate(cfg_.lattice, q_, init_);
    if (!traj.feasible) throw std::runtime_error("KvEnvironment: nominal setting is infeasible for this initial beam");
    return observe(traj);
  }

  EnvStep step(const std::vector<double>& offset) override {
    auto out = env_step(cfg_.lattice, cfg_.reward, cfg_.q_nominal, q_, offset, init_);
    q_ = out.q_next;
    EnvStep s;
    s.reward = out.reward;
    s.failed = !out.feasible;
    s.done = s.failed;
    if (out.feasible) s.obs = observe(out.traj);
    last_ = std::move(out);
    return s;
  }

  const std::vector<double>& settings() const { return q_; }
  const KvStepOutcome& last_outcome() const { return last_; }
  const KvEnvConfig& config() const { return cfg_; }
  const BeamInit& current_init() const { return init_; }

 private:
  KvEnvConfig cfg_;
  StageSettings stage_;
  std::vector<double> q_;
  BeamInit init_;
  KvStepOutcome last_;
};

}  // namespace esdrl
