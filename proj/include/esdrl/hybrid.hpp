#pragma once

// Supervised ES/DRL controller. A binary supervisor picks the DRL channel
// while the candidate DRL setting keeps both path-averaged envelopes inside
// the safety band, and falls back to bounded ES otherwise.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdrl/es_control.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/reward.hpp"

namespace esdrl {

enum class CombineRule { both_inside, either_inside };

struct SupervisorConfig {
  double safety_fraction = 0.7;
  double r_max = 0.0254;
  // both_inside: beta = 1 iff X_bar < thr AND Y_bar < thr.
  // either_inside: the literal reading, beta = 1 iff X_bar < thr OR Y_bar < thr.
  CombineRule rule = CombineRule::both_inside;
  long dwell_steps = 0;  // 0: beta may change every step

  double threshold() const { return safety_fraction * r_max; }

  void validate() const {
    if (!(safety_fraction > 0 && safety_fraction < 1)) throw std::invalid_argument("supervisor: safety_fraction must be in (0, 1)");
    if (!(r_max > 0)) throw std::invalid_argument("supervisor: r_max must be positive");
    if (dwell_steps < 0) throw std::invalid_argument("supervisor: dwell_steps must be >= 0");
  }
};

inline int supervise(double X_bar, double Y_bar, const SupervisorConfig& cfg) {
  const double thr = cfg.threshold();
  const bool x_in = X_bar < thr, y_in = Y_bar < thr;
  return (cfg.rule == CombineRule::both_inside ? (x_in && y_in) : (x_in || y_in)) ? 1 : 0;
}

/// Infeasible trajectories select the ES channel.
inline int supervise(const EnvelopeTrajectory& traj, const SupervisorConfig& cfg) {
  if (!traj.feasible) return 0;
  const auto avg = path_averages(traj);
  return supervise(avg.X, avg.Y, cfg);
}

enum class Channel { drl, es };

inline const char* channel_name(Channel c) { return c == Channel::drl ? "drl" : "es"; }

struct HybridConfig {
  SupervisorConfig supervisor;
  EsConfig es;
  RewardConfig reward;
  bool warm_start = true;
  int force_beta = -1;  // -1: supervisor decides; 0 or 1 pins the channel
  std::vector<bool> active;  // controlled coordinates; empty means all
};

struct HybridState {
  int beta = 0;
  bool es_engaged = false;  // ES has been seeded since the last 1 -> 0 switch
  EsState es;
  std::vector<double> last_feasible_Q;
  long step = 0;
  long engaged_since = 0;  // step of the last beta transition
};

/// Initial state: ES parked at `q0`, which is also the last feasible setting.
inline HybridState hybrid_init(const std::vector<double>& q0) {
  HybridState s;
  s.es.params = q0;
  s.last_feasible_Q = q0;
  return s;
}

struct HybridDecision {
  std::vector<double> Q;     // setting to apply
  std::vector<double> q_rl;  // candidate from the DRL channel
  int beta = 0;
  Channel channel = Channel::es;
  bool warm_started = false;
  bool candidate_feasible = false;
  double candidate_reward = 0;
  PathAverages candidate_averages;
};

/// One control step.
///   q_current: setting applied at the previous step (uncontrolled coordinates
///              are copied from it into every candidate)
///   q_nominal: Q(0); the DRL channel emits q_nominal + offset
///   drl_offset: sat(mu(o(t))) for every coordinate
///   V: objective measured at q_current
///   simulate: integrates a candidate setting under the present conditions
inline HybridDecision hybrid_step(HybridState& state, const std::vector<double>& q_current,
                                  const std::vector<double>& q_nominal, const std::vector<double>& drl_offset, double V,
                                  const std::function<EnvelopeTrajectory(const std::vector<double>&)>& simulate,
                                  const HybridConfig& cfg) {
  const std::size_t n = q_current.size();
  if (q_nominal.size() != n || drl_offset.size() != n) throw std::invalid_argument("hybrid_step: size mismatch");
  if (!cfg.active.empty() && cfg.active.size() != n) throw std::invalid_argument("hybrid_step: mask size mismatch");
  auto is_active = [&](std::size_t i) { return cfg.active.empty() || cfg.active[i]; };

  HybridDecision d;
  d.q_rl = q_current;
  for (std::size_t i = 0; i < n; ++i)
    if (is_active(i)) d.q_rl[i] = q_nominal[i] + drl_offset[i];

  // Pre-check: integrate the candidate before committing to a channel.
  const EnvelopeTrajectory pre = simulate(d.q_rl);
  d.candidate_feasible = pre.feasible;
  if (pre.feasible) {
    d.candidate_averages = path_averages(pre);
    d.candidate_reward = penalty(pre, cfg.reward).R;
  } else {
    d.candidate_reward = failure_reward(cfg.reward);
  }

  int beta = cfg.force_beta >= 0 ? cfg.force_beta : supervise(pre, cfg.supervisor);
  if (cfg.force_beta < 0 && cfg.supervisor.dwell_steps > 0 && state.step > 0 &&
      state.step - state.engaged_since < cfg.supervisor.dwell_steps && beta != state.beta && pre.feasible)
    beta = state.beta;
  if (beta == 1 && !pre.feasible) beta = 0;  // pinned beta = 1 cannot apply an infeasible candidate

  const int previous = state.step == 0 ? -1 : state.beta;
  if (previous != -1 && beta != previous) state.engaged_since = state.step;
  d.beta = beta;

  if (beta == 1) {
    d.channel = Channel::drl;
    d.Q = d.q_rl;
    state.last_feasible_Q = d.q_rl;
    state.es_engaged = false;
  } else {
    d.channel = Channel::es;
    double v = V;
    if (!state.es_engaged && cfg.warm_start) {
      state.es.step_index = 0;
      if (pre.feasible) {
        state.es.params = d.q_rl;
        v = d.candidate_reward;
      } else {
        state.es.params = state.last_feasible_Q;
      }
      d.warm_started = true;
    }
    // Uncontrolled coordinates follow the exogenous values.
    for (std::size_t i = 0; i < n; ++i)
      if (!is_active(i)) state.es.params[i] = q_current[i];
    state.es_engaged = true;
    std::vector<bool> mask = cfg.active.empty() ? std::vector<bool>(n, true) : cfg.active;
    state.es = es_step(state.es, v, cfg.es, &mask);
    d.Q = state.es.params;
  }
  state.beta = beta;
  ++state.step;
  return d;
}

/// Records the outcome of applying a decision; keeps last_feasible_Q honest.
inline void hybrid_observe(HybridState& state, const HybridDecision& d, bool applied_feasible) {
  if (applied_feasible) state.last_feasible_Q = d.Q;
}

// ---------------------------------------------------------------------------
// ES-phase drift versus the finite-difference gradient of V on a static lattice.

struct AveragedHybridReport {
  std::vector<double> drift;     // mean ES displacement per step, controlled coordinates
  std::vector<double> gradient;  // path-averaged central-difference dV/dQ
  double cosine = 0;
  double drift_norm = 0;
  double dither_amplitude = 0;   // max_i sqrt(alpha / w_i)
  double max_frozen_drift = 0;   // |displacement| of uncontrolled coordinates
  long steps = 0;
};

inline AveragedHybridReport averaged_hybrid_check(const Lattice& lattice, const RewardConfig& reward,
                                                  const BeamInit& init, const EsConfig& es_cfg,
                                                  const std::vector<double>& q0, const std::vector<bool>& active,
                                                  int dither_periods = 100, double fd_step = 1e-3,
                                                  int gradient_samples = 20) {
  const std::size_t n = q0.size();
  if (active.size() != n) throw std::invalid_argument("averaged_hybrid_check: mask size mismatch");
  auto V = [&](const std::vector<double>& q) {
    const auto tr = integrate(lattice, q, init);
    return tr.feasible ? penalty(tr, reward).R : failure_reward(reward);
  };
  const auto ratios = es_cfg.ratios_for(n);
  const double period = 2.0 * std::numbers::pi / es_cfg.omega_base;
  const long steps = static_cast<long>(std::ceil(dither_periods * period / es_cfg.dt));

  AveragedHybridReport rep;
  rep.steps = steps;
  EsState s{0, q0};
  std::vector<std::vector<double>> samples;
  const long sample_every = std::max<long>(1, steps / std::max(1, gradient_samples));
  for (long t = 0; t < steps; ++t) {
    if (t % sample_every == sample_every / 2) samples.push_back(s.params);
    s = es_step(s, V(s.params), es_cfg, &active);
  }

  rep.drift.assign(n, 0.0);
  rep.gradient.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = s.params[i] - q0[i];
    if (active[i]) {
      rep.drift[i] = d / static_cast<double>(steps);
    } else {
      rep.max_frozen_drift = std::max(rep.max_frozen_drift, std::abs(d));
    }
    if (active[i]) rep.dither_amplitude = std::max(rep.dither_amplitude, std::sqrt(es_cfg.alpha / (ratios[i] * es_cfg.omega_base)));
  }
  for (const auto& q : samples) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      auto qp = q, qm = q;
      qp[i] += fd_step;
      qm[i] -= fd_step;
      rep.gradient[i] += (V(qp) - V(qm)) / (2 * fd_step) / static_cast<double>(samples.size());
    }
  }
  const double dot = std::inner_product(rep.drift.begin(), rep.drift.end(), rep.gradient.begin(), 0.0);
  rep.drift_norm = std::sqrt(std::inner_product(rep.drift.begin(), rep.drift.end(), rep.drift.begin(), 0.0));
  const double gn = std::sqrt(std::inner_product(rep.gradient.begin(), rep.gradient.end(), rep.gradient.begin(), 0.0));
  rep.cosine = (rep.drift_norm > 0 && gn > 0) ? dot / (rep.drift_norm * gn) : 0.0;
  if (!es_cfg.maximize) rep.cosine = -rep.cosine;
  return rep;
}

}  // namespace esdrl
