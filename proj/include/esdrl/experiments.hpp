#pragma once

// Scripted studies: the 1D plant with a sign-changing input gain, and the
// 500-step perturbation run comparing DRL, ES, warm-started ES and the hybrid.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "esdrl/ddpg.hpp"
#include "esdrl/es_control.hpp"
#include "esdrl/hybrid.hpp"
#include "esdrl/kv_env.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/reward.hpp"
#include "esdrl/train.hpp"

namespace esdrl {

// ---------------------------------------------------------------------------
// Perturbation schedule

/// Piecewise-linear profile through (t, value) knots. Repeating a t gives a
/// jump; at that t the later knot wins. Constant outside the knot range.
struct Profile {
  std::vector<std::pair<double, double>> knots;

  double operator()(double t) const {
    if (knots.empty()) return 0.0;
    if (t < knots.front().first) return knots.front().second;
    for (std::size_t k = knots.size(); k-- > 0;) {
      if (knots[k].first == t) return knots[k].second;
      if (knots[k].first < t) {
        if (k + 1 == knots.size()) return knots[k].second;
        const auto [t0, v0] = knots[k];
        const auto [t1, v1] = knots[k + 1];
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
      }
    }
    return knots.front().second;
  }

  void validate(const std::string& what) const {
    for (std::size_t k = 1; k < knots.size(); ++k)
      if (knots[k].first < knots[k - 1].first) throw std::invalid_argument(what + ": knots must be sorted by t");
  }
};

struct PerturbationSchedule {
  std::size_t driven_a = 0;  // 0-based magnet indices (magnets 1 and 10)
  std::size_t driven_b = 9;
  double q_a_star = 1.21;    // T/m
  double q_b_star = 3.5;     // T/m
  double nu = std::numbers::pi / 50.0;  // rad/step
  Profile amplitude{{{0, 0.25}, {100, 0.25}, {500, 0.75}, {500, 0.0}}};
  Profile drift{{{0, 0.0}, {100, 0.0}, {200, 0.15}, {300, 0.15}, {400, 0.0}}};  // m
  std::size_t shifted_magnet = 9;  // magnet whose z_start moves by the drift
  long horizon = 500;             // steps 0..horizon inclusive

  void validate() const {
    amplitude.validate("schedule.amplitude");
    drift.validate("schedule.drift");
    for (const auto& [t, a] : amplitude.knots)
      if (a < 0) throw std::invalid_argument("schedule: amplitude must be >= 0");
    if (horizon < 0) throw std::invalid_argument("schedule: horizon must be >= 0");
  }

  /// Zero amplitude and zero drift, same setpoints.
  PerturbationSchedule quiet() const {
    PerturbationSchedule s = *this;
    s.amplitude.knots = {{0, 0.0}};
    s.drift.knots = {{0, 0.0}};
    return s;
  }
};

struct ScheduleValue {
  double q_a = 0, q_b = 0, delta_L = 0;
};

inline ScheduleValue schedule_eval(const PerturbationSchedule& s, long t) {
  if (t < 0 || t > s.horizon) throw std::out_of_range("schedule_eval: t outside [0, horizon]");
  const double td = static_cast<double>(t);
  const double wave = s.amplitude(td) * std::sin(s.nu * td);
  return {s.q_a_star + wave, s.q_b_star + wave, s.drift(td)};
}

/// Copy of `base` with one magnet moved downstream by `delta` metres.
inline Lattice shifted_lattice(const Lattice& base, std::size_t magnet, double delta) {
  if (magnet >= base.size()) throw std::out_of_range("shifted_lattice: no such magnet");
  Lattice lat = base;
  lat.magnets[magnet].z_start += delta;
  lat.check_geometry();
  return lat;
}

// ---------------------------------------------------------------------------
// Four-controller comparison

enum class VariantKind { drl, es, es_warm, hybrid };

inline const char* variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::drl: return "drl";
    case VariantKind::es: return "es";
    case VariantKind::es_warm: return "es_warm";
    case VariantKind::hybrid: return "hybrid";
  }
  return "?";
}

inline VariantKind parse_variant(const std::string& s) {
  if (s == "drl") return VariantKind::drl;
  if (s == "es") return VariantKind::es;
  if (s == "es_warm" || s == "es-warm") return VariantKind::es_warm;
  if (s == "hybrid") return VariantKind::hybrid;
  throw std::invalid_argument("unknown variant '" + s + "' (expected drl, es, es_warm, hybrid)");
}

inline bool needs_policy(VariantKind k) { return k != VariantKind::es; }

struct ComparisonConfig {
  Lattice lattice;
  RewardConfig reward;
  BeamInit init;
  std::vector<double> q_nominal;  // empty: lattice nominal strengths
  PerturbationSchedule schedule;
  HybridConfig hybrid;  // es, supervisor, warm_start, force_beta; reward is taken from `reward`
};

struct StepRecord {
  long t = 0;
  double reward = 0;
  int beta = 0;  // 1 when the DRL channel produced the setting
  double q_a = 0, q_b = 0, delta_L = 0;
  double X_bar = 0, Y_bar = 0;
  bool feasible = false;
  double dq_inf = 0;  // max |Q(t) - Q(t-1)| over controlled magnets
};

struct VariantTrace {
  VariantKind kind = VariantKind::es;
  std::vector<StepRecord> steps;
  std::vector<std::vector<double>> settings;  // applied Q per step
};

using OffsetPolicy = std::function<std::vector<double>(const std::vector<double>&)>;

/// Controlled magnets: everything except the two driven ones.
inline std::vector<bool> comparison_mask(std::size_t n, const PerturbationSchedule& s) {
  std::vector<bool> m(n, true);
  if (s.driven_a >= n || s.driven_b >= n) throw std::invalid_argument("comparison: driven magnet index out of range");
  m[s.driven_a] = false;
  m[s.driven_b] = false;
  return m;
}

inline VariantTrace run_variant(VariantKind kind, const ComparisonConfig& cfg, const OffsetPolicy& policy) {
  if (needs_policy(kind) && !policy)
    throw std::invalid_argument(std::string("variant '") + variant_name(kind) +
                                "' needs a trained DRL actor checkpoint (pass one with --checkpoint)");
  cfg.schedule.validate();
  const std::size_t n = cfg.lattice.size();
  const std::vector<double> q_nom = cfg.q_nominal.empty() ? cfg.lattice.nominal_strengths() : cfg.q_nominal;
  if (q_nom.size() != n) throw std::invalid_argument("comparison: q_nominal size mismatch");
  const auto mask = comparison_mask(n, cfg.schedule);
  const auto& sch = cfg.schedule;

  HybridConfig hcfg = cfg.hybrid;
  hcfg.reward = cfg.reward;
  hcfg.active = mask;

  auto conditions = [&](long t) {
    const auto v = schedule_eval(sch, t);
    return std::make_pair(v, shifted_lattice(cfg.lattice, sch.shifted_magnet, v.delta_L));
  };
  auto with_drives = [&](std::vector<double> q, const ScheduleValue& v) {
    q[sch.driven_a] = v.q_a;
    q[sch.driven_b] = v.q_b;
    return q;
  };
  auto score = [&](const EnvelopeTrajectory& tr) { return tr.feasible ? penalty(tr, cfg.reward).R : failure_reward(cfg.reward); };

  // Start: nominal setting under the t = 0 conditions.
  auto [v0, lat0] = conditions(0);
  std::vector<double> q_prev = with_drives(q_nom, v0);
  auto tr0 = integrate(lat0, q_prev, cfg.init);
  if (!tr0.feasible) throw std::runtime_error("comparison: nominal setting is infeasible at t = 0");
  std::vector<double> o_prev = observe(tr0);
  double V_prev = score(tr0);

  VariantTrace trace;
  trace.kind = kind;
  EsState es{0, q_prev};
  bool es_seeded = false;
  HybridState hs = hybrid_init(q_prev);

  for (long t = 0; t <= sch.horizon; ++t) {
    const auto [v, lat] = conditions(t);
    auto simulate = [&, &lat = lat](const std::vector<double>& q) { return integrate(lat, q, cfg.init); };
    std::vector<double> q;
    int beta = 0;

    switch (kind) {
      case VariantKind::drl: {
        const auto off = policy(o_prev);
        q = with_drives(q_nom, v);
        for (std::size_t i = 0; i < n; ++i)
          if (mask[i]) q[i] = q_nom[i] + off[i];
        beta = 1;
        break;
      }
      case VariantKind::es:
      case VariantKind::es_warm: {
        double V = V_prev;
        if (kind == VariantKind::es_warm && !es_seeded) {
          const auto off = policy(o_prev);
          std::vector<double> seed = with_drives(q_nom, v);
          for (std::size_t i = 0; i < n; ++i)
            if (mask[i]) seed[i] = q_nom[i] + off[i];
          const auto pre = simulate(seed);
          if (pre.feasible) {
            es.params = seed;
            V = score(pre);
          }
          es.step_index = 0;
        }
        es_seeded = true;
        es.params = with_drives(es.params, v);
        es = es_step(es, V, hcfg.es, &mask);
        q = es.params;
        break;
      }
      case VariantKind::hybrid: {
        const auto d = hybrid_step(hs, with_drives(q_prev, v), q_nom, policy(o_prev), V_prev, simulate, hcfg);
        q = d.Q;
        beta = d.beta;
        break;
      }
    }

    const auto tr = simulate(q);
    StepRecord rec;
    rec.t = t;
    rec.beta = beta;
    rec.q_a = q[sch.driven_a];
    rec.q_b = q[sch.driven_b];
    rec.delta_L = v.delta_L;
    rec.feasible = tr.feasible;
    rec.reward = score(tr);
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) rec.dq_inf = std::max(rec.dq_inf, std::abs(q[i] - q_prev[i]));
    if (tr.feasible) {
      const auto avg = path_averages(tr);
      rec.X_bar = avg.X;
      rec.Y_bar = avg.Y;
      o_prev = observe(tr);
    }
    if (kind == VariantKind::hybrid) {
      HybridDecision applied;
      applied.Q = q;
      hybrid_observe(hs, applied, tr.feasible);
    }
    V_prev = rec.reward;
    q_prev = q;
    trace.steps.push_back(rec);
    trace.settings.push_back(q);
  }
  return trace;
}

inline std::vector<VariantTrace> run_comparison(const std::vector<VariantKind>& variants, const ComparisonConfig& cfg,
                                                const OffsetPolicy& policy) {
  for (auto k : variants)
    if (needs_policy(k) && !policy)
      throw std::invalid_argument(std::string("variant '") + variant_name(k) +
                                  "' needs a trained DRL actor checkpoint (pass one with --checkpoint)");
  std::vector<VariantTrace> out;
  for (auto k : variants) out.push_back(run_variant(k, cfg, policy));
  return out;
}

/// Mean reward over t in [t0, t1] (inclusive).
inline double window_mean(const VariantTrace& tr, long t0, long t1) {
  double s = 0;
  long n = 0;
  for (const auto& r : tr.steps)
    if (r.t >= t0 && r.t <= t1) {
      s += r.reward;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("window_mean: empty window");
  return s / static_cast<double>(n);
}

/// Number of complete 1 -> 0 -> 1 excursions in the beta trace.
inline int beta_cycles(const VariantTrace& tr) {
  int cycles = 0;
  bool seen_one = false, dropped = false;
  for (const auto& r : tr.steps) {
    if (r.beta == 1) {
      if (dropped) ++cycles;
      seen_one = true;
      dropped = false;
    } else if (seen_one) {
      dropped = true;
    }
  }
  return cycles;
}

// ---------------------------------------------------------------------------
// 1D plant x' = a x + b(t) u with b(t) = b0 cos(2 pi f t) and V(x) = exp(-x^2).

struct Plant1D {
  double a = 0.1;
  double b0 = 1.0;
  double f = 0.0;  // Hz

  double b(double t) const { return b0 * std::cos(2.0 * std::numbers::pi * f * t); }
};

inline double objective_1d(double x) { return std::exp(-x * x); }

struct Trace1D {
  std::vector<double> t, x, V;
  bool diverged = false;
  std::string diagnostic;
};

inline Trace1D run_es_1d(const Plant1D& plant, const EsConfig& cfg, double x0, double horizon, double h,
                         std::size_t record_every, double ceiling) {
  EsFlowSystem sys;
  sys.dim = 1;
  sys.objective = [](const std::vector<double>& x, double) { return objective_1d(x[0]); };
  sys.drift = [&](const std::vector<double>& x, double) { return std::vector<double>{plant.a * x[0]}; };
  sys.gain = [&](const std::vector<double>&, double t) { return std::vector<double>{plant.b(t)}; };
  const auto r = es_continuous(sys, cfg, {x0}, horizon, h, record_every, ceiling);
  Trace1D out;
  out.t = r.t;
  for (const auto& x : r.x) out.x.push_back(x[0]);
  out.V = r.V;
  out.diverged = r.diverged;
  out.diagnostic = r.diagnostic;
  return out;
}

/// Closed loop under a sampled-data policy: u is held for `control_dt` and the
/// plant is integrated with RK4 substeps of size h.
inline Trace1D run_policy_1d(const Plant1D& plant, const std::function<double(double)>& u_of_x, double x0, double horizon,
                             double control_dt, double h, double ceiling) {
  const auto sub = static_cast<long>(std::llround(control_dt / h));
  const auto steps = static_cast<long>(std::llround(horizon / control_dt));
  if (sub < 1 || steps < 1) throw std::invalid_argument("run_policy_1d: bad step sizes");
  Trace1D out;
  double x = x0, t = 0;
  auto rec = [&] {
    out.t.push_back(t);
    out.x.push_back(x);
    out.V.push_back(objective_1d(x));
  };
  rec();
  for (long k = 0; k < steps; ++k) {
    const double u = u_of_x(x);
    for (long s = 0; s < sub; ++s) {
      auto F = [&](double tt, double xx) { return plant.a * xx + plant.b(tt) * u; };
      const double k1 = F(t, x), k2 = F(t + h / 2, x + h / 2 * k1), k3 = F(t + h / 2, x + h / 2 * k2), k4 = F(t + h, x + h * k3);
      x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      t = static_cast<double>(k) * control_dt + static_cast<double>(s + 1) * h;
    }
    rec();
    if (!std::isfinite(x) || std::abs(x) > ceiling) {
      out.diverged = true;
      out.diagnostic = "state exceeded |x| ceiling at t = " + std::to_string(t);
      break;
    }
  }
  return out;
}

struct Plant1DEnvConfig {
  Plant1D plant;  // trained with f = 0 (b frozen at b0)
  double control_dt = 0.05;
  double h = 1e-3;
  double x0_range = 2.0;  // x(0) ~ U[-x0_range, x0_range]
  double ceiling = 10.0;  // |x| beyond this ends the episode as a failure
  double failure_reward = 0.0;
};

/// state = [x], action = [u], reward = V(x) after the hold interval.
class Plant1DEnvironment : public Environment {
 public:
  explicit Plant1DEnvironment(Plant1DEnvConfig cfg) : cfg_(cfg) {}
  std::size_t action_dim() const override { return 1; }

  std::vector<double> reset(std::mt19937_64& rng) override {
    x_ = std::uniform_real_distribution<double>(-cfg_.x0_range, cfg_.x0_range)(rng);
    t_ = 0;
    return {x_};
  }

  EnvStep step(const std::vector<double>& action) override {
    const double u = action.at(0);
    const auto sub = static_cast<long>(std::llround(cfg_.control_dt / cfg_.h));
    const double h = cfg_.h;
    for (long s = 0; s < sub; ++s) {
      auto F = [&](double tt, double xx) { return cfg_.plant.a * xx + cfg_.plant.b(tt) * u; };
      const double k1 = F(t_, x_), k2 = F(t_ + h / 2, x_ + h / 2 * k1), k3 = F(t_ + h / 2, x_ + h / 2 * k2),
                   k4 = F(t_ + h, x_ + h * k3);
      x_ += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      t_ += h;
    }
    EnvStep out;
    if (!std::isfinite(x_) || std::abs(x_) > cfg_.ceiling) {
      out.failed = out.done = true;
      out.reward = cfg_.failure_reward;
      return out;
    }
    out.obs = {x_};
    out.reward = objective_1d(x_);
    return out;
  }

 private:
  Plant1DEnvConfig cfg_;
  double x_ = 0, t_ = 0;
};

struct Study1DConfig {
  Plant1D plant;  // f is overridden per run
  double f_low = 0.02;
  double f_high = 1.0;
  double x0 = 1.5;
  double horizon = 100.0;
  double h = 1e-3;
  std::size_t record_every = 50;
  double ceiling = 1e3;
  EsConfig es{.alpha = 1.0, .omega_base = 100.0, .ratios = {1.0}, .gain_k = 3.0, .dt = 1e-3, .maximize = true};
  // Toy agent
  Plant1DEnvConfig env;
  ddpg::Hyperparameters hp;
  std::size_t episodes = 60;
  std::size_t horizon_steps = 200;
  double u_max = 3.0;
  std::uint64_t seed = 1;
};

inline Study1DConfig default_study_1d() {
  Study1DConfig c;
  c.hp.actor_hidden = {64, 64};
  c.hp.critic_hidden = {64, 64};
  c.hp.actor_lr = 1e-3;
  c.hp.critic_lr = 1e-3;
  c.hp.batch = 64;
  c.hp.replay_capacity = 100000;
  c.hp.noise_sigma = 0.2;
  return c;
}

inline ddpg::RuntimePolicy train_toy_agent(const Study1DConfig& cfg, std::vector<ddpg::LearningRecord>* curve = nullptr) {
  std::mt19937_64 rng(cfg.seed);
  auto bundle = ddpg::AgentBundle::create(cfg.hp, ddpg::InputTransform::identity(1), {-cfg.u_max}, {cfg.u_max}, rng);
  Plant1DEnvConfig ec = cfg.env;
  ec.plant = cfg.plant;
  ec.plant.f = 0.0;
  Plant1DEnvironment env(ec);
  ddpg::CurriculumPlan plan;
  plan.stages.push_back({"toy", "toy", {}, cfg.episodes, cfg.episodes});
  ddpg::TrainOptions opts;
  opts.horizon = cfg.horizon_steps;
  opts.seed = cfg.seed;
  opts.failure_abort_fraction = 1.0;  // divergence is part of what the toy agent must learn to avoid
  auto res = ddpg::train(plan, bundle, env, opts);
  if (curve) *curve = res.curve;
  return ddpg::RuntimePolicy::from_bundle(bundle);
}

struct Study1DResult {
  std::map<std::string, Trace1D> traces;  // keys: es_low, drl_low, es_high, drl_high, es_frozen, drl_frozen
};

inline Study1DResult run_1d_study(const Study1DConfig& cfg, const ddpg::RuntimePolicy& agent) {
  Study1DResult res;
  auto u_of = [&](double x) { return agent({x})[0]; };
  const std::vector<std::pair<std::string, double>> freqs{{"frozen", 0.0}, {"low", cfg.f_low}, {"high", cfg.f_high}};
  for (const auto& [tag, f] : freqs) {
    Plant1D p = cfg.plant;
    p.f = f;
    res.traces["es_" + tag] = run_es_1d(p, cfg.es, cfg.x0, cfg.horizon, cfg.h, cfg.record_every, cfg.ceiling);
    res.traces["drl_" + tag] = run_policy_1d(p, u_of, cfg.x0, cfg.horizon, cfg.env.control_dt, cfg.h, cfg.ceiling);
  }
  return res;
}

}  // namespace esdrl
