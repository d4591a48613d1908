// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Tolerances are fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "esdrl/ddpg.hpp"
#include "esdrl/es_control.hpp"
#include "esdrl/experiments.hpp"
#include "esdrl/hybrid.hpp"
#include "esdrl/io/config.hpp"
#include "esdrl/io/run_log.hpp"
#include "esdrl/kv_env.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/nnet.hpp"
#include "esdrl/optim.hpp"
#include "esdrl/reward.hpp"
#include "esdrl/train.hpp"

using namespace esdrl;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kDriftRelTol = 1e-6;
constexpr double kHarmonicRelTol = 1e-8;
constexpr double kOracleSeconds = 1.0;
constexpr double kRk4MinRatio = 7.2;
constexpr long kEsFuzzSteps = 100000;
constexpr double kAveragingRelTol = 0.05;
constexpr double kStudyV = 0.9;
constexpr double kStudyDrop = 0.5;
constexpr double kStudySeconds = 120.0;
constexpr int kGradProbes = 64;
constexpr double kGradRelTol = 1e-5;
constexpr double kChi2Crit49 = 85.35;  // chi-square, 49 dof, p = 0.001
constexpr double kSmokeFactor = 1.5;
constexpr double kSmokeSeconds = 600.0;
constexpr double kSupervisorThreshold = 0.01778;
constexpr double kHybridFloorFraction = 0.6;
constexpr double kCompareSeconds = 1800.0;
constexpr int kRewardFuzz = 10000;
constexpr int kMonotoneProbes = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path source(const std::string& rel) { return fs::path(ESDRL_SOURCE_DIR) / rel; }

Lattice drift_lattice(double z_max, int n, double eps) {
  Lattice lat;
  lat.z_max = z_max;
  lat.grid_points = n;
  lat.emittance_x = lat.emittance_y = eps;
  lat.rigidity = 0.125;
  return lat;
}

// ---------------------------------------------------------------------------

Outcome c1_oracles() {
  const double dz = 2.92e-3;
  const int n = static_cast<int>(std::ceil(1.0 / dz));
  const double z_max = n * dz;

  auto t0 = std::chrono::steady_clock::now();
  const double eps = 1e-5, X0 = 2e-3, Y0 = 1.5e-3;
  const auto d = integrate(drift_lattice(z_max, n, eps), std::vector<double>{}, {X0, Y0, 0, 0});
  double drift_err = d.feasible ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; d.feasible && k < d.nodes(); ++k) {
    const double z = d.z[k];
    const double xe = std::sqrt(X0 * X0 + (eps * z / X0) * (eps * z / X0));
    const double ye = std::sqrt(Y0 * Y0 + (eps * z / Y0) * (eps * z / Y0));
    drift_err = std::max({drift_err, std::abs(d.X[k] - xe) / xe, std::abs(d.Y[k] - ye) / ye});
  }
  const double t_drift = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  Lattice h = drift_lattice(z_max, n, 0.0);
  MagnetSpec m;
  m.index = 1;
  m.length = z_max;
  h.magnets.push_back(m);
  const auto tr = integrate(h, std::vector<double>{h.rigidity}, {X0, X0, 0, 0});  // kappa = 1 / m^2
  double harm_err = tr.feasible ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; tr.feasible && k < tr.nodes(); ++k) {
    const double xe = X0 * std::cos(tr.z[k]), ye = X0 * std::cosh(tr.z[k]);
    harm_err = std::max({harm_err, std::abs(tr.X[k] - xe) / std::abs(xe), std::abs(tr.Y[k] - ye) / ye});
  }
  const double t_harm = seconds_since(t0);

  return {drift_err < kDriftRelTol && harm_err < kHarmonicRelTol && t_drift < kOracleSeconds && t_harm < kOracleSeconds,
          fmt("drift rel err %.2e (< %.0e), harmonic rel err %.2e (< %.0e), %.3f s / %.3f s", drift_err, kDriftRelTol,
              harm_err, kHarmonicRelTol, t_drift, t_harm)};
}

Outcome c2_rk4_order() {
  const double eps = 1e-5, X0 = 1e-3;
  auto err = [&](int n) {
    const auto tr = integrate(drift_lattice(1.0, n, eps), std::vector<double>{}, {X0, X0, 0, 0});
    double e = 0;
    for (std::size_t k = 0; k < tr.nodes(); ++k)
      e = std::max(e, std::abs(tr.X[k] - std::sqrt(X0 * X0 + (eps * tr.z[k] / X0) * (eps * tr.z[k] / X0))));
    return e;
  };
  std::vector<double> ratios;
  double prev = err(25);
  for (int n : {50, 100, 200}) {
    const double e = err(n);
    ratios.push_back(prev / e);
    prev = e;
  }
  const bool ok = std::all_of(ratios.begin(), ratios.end(), [](double r) { return r >= kRk4MinRatio; });
  return {ok, fmt("error ratios %.2f, %.2f, %.2f (>= %.1f)", ratios[0], ratios[1], ratios[2], kRk4MinRatio)};
}

Outcome c3_bounded_updates() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> q(-100, 100), v(-1e4, 1e4), la(-8, 1), w(1e-3, 0.25);
  long steps = 0, violations = 0;
  while (steps < kEsFuzzSteps) {
    EsConfig cfg;
    cfg.alpha = std::pow(10.0, la(rng));
    cfg.omega_base = w(rng);
    cfg.gain_k = v(rng) / 100;
    cfg.dt = 0.25 / (2 * cfg.omega_base);
    cfg.maximize = rng() % 2 == 0;
    const std::size_t n = 1 + rng() % 22;
    EsState s{static_cast<long>(rng() % 100000), std::vector<double>(n)};
    for (double& p : s.params) p = q(rng);
    const auto r = cfg.ratios_for(n);
    for (int k = 0; k < 100 && steps < kEsFuzzSteps; ++k, ++steps) {
      const EsState next = es_step(s, v(rng), cfg);
      for (std::size_t i = 0; i < n; ++i)
        if (!(std::abs(next.params[i] - s.params[i]) <= cfg.dt * std::sqrt(cfg.alpha * (r[i] * cfg.omega_base)))) ++violations;
      s = next;
    }
  }
  return {violations == 0, fmt("%ld steps, %ld violations", steps, violations)};
}

Outcome c4_averaging() {
  EsConfig cfg;
  cfg.alpha = 0.05;
  cfg.omega_base = 200.0;
  cfg.ratios = {1.0, 1.3};
  cfg.gain_k = 2.0;
  cfg.maximize = false;
  auto J = [](const std::vector<double>& q) { return q[0] * q[0] + 2 * q[1] * q[1]; };
  auto grad = [](const std::vector<double>& q) { return std::vector<double>{2 * q[0], 4 * q[1]}; };
  const auto rep = averaged_descent_check(J, grad, cfg, {1.0, -0.8}, 20.0, 1e-4);

  // 1D plant with frozen gain: x_bar' = a x_bar + (k alpha / 2) dV/dx.
  const double a = 0.1, alpha = 1.0, k = 3.0, x0 = 1.5, T = 10.0, h = 1e-4;
  auto oracle = [&](const std::vector<double>& x, double) {
    return std::vector<double>{a * x[0] + k * alpha / 2 * (-2 * x[0] * std::exp(-x[0] * x[0]))};
  };
  const auto bar = integrate_flow(oracle, {x0}, T, h, 10);
  std::vector<double> sups;
  const double w0 = 25.0;
  for (double m : {1.0, 2.0, 4.0, 8.0}) {
    EsConfig c{.alpha = alpha, .omega_base = w0 * m, .ratios = {1.0}, .gain_k = k, .dt = 1e-3, .maximize = true};
    const auto tr = run_es_1d(Plant1D{a, 1.0, 0.0}, c, x0, T, h, 10, 1e3);
    double sup = 0;
    for (std::size_t i = 0; i < std::min(tr.x.size(), bar.size()); ++i) sup = std::max(sup, std::abs(tr.x[i] - bar[i][0]));
    sups.push_back(sup);
  }
  const bool mono = sups[1] < sups[0] && sups[2] < sups[1] && sups[3] < sups[2];
  return {rep.relative_deviation < kAveragingRelTol && mono,
          fmt("quadratic deviation %.2f%% of diameter (< %.0f%%); 1D sup|x - x_bar| %.4f > %.4f > %.4f > %.4f",
              100 * rep.relative_deviation, 100 * kAveragingRelTol, sups[0], sups[1], sups[2], sups[3])};
}

double hold_from(const Trace1D& tr, double level) {
  for (std::size_t i = 0; i < tr.V.size(); ++i)
    if (std::all_of(tr.V.begin() + static_cast<std::ptrdiff_t>(i), tr.V.end(), [&](double v) { return v >= level; }))
      return tr.t[i];
  return std::numeric_limits<double>::infinity();
}

Outcome c5_study_1d() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = io::load_run_config(source("configs/desk.yaml").string()).config.study1d;
  const auto agent = train_toy_agent(cfg);
  const auto res = run_1d_study(cfg, agent);
  const double secs = seconds_since(t0);
  const auto& es_hi = res.traces.at("es_high");
  const auto& es_lo = res.traces.at("es_low");
  const auto& drl_hi = res.traces.at("drl_high");
  const auto& drl_lo = res.traces.at("drl_low");
  const double half = cfg.horizon / 2;
  const double hold_hi = hold_from(es_hi, kStudyV), hold_lo = hold_from(es_lo, kStudyV);
  const double drl_hi_min = *std::min_element(drl_hi.V.begin(), drl_hi.V.end());
  const double drl_lo_max = *std::max_element(drl_lo.V.begin(), drl_lo.V.end());
  const bool ok = hold_hi <= half && hold_lo <= half && drl_hi_min < kStudyDrop && drl_lo_max >= kStudyV && secs < kStudySeconds;
  return {ok, fmt("ES holds V >= %.1f from t = %.2f (high f) and t = %.2f (low f); DRL min V %.3f (high f), max V %.3f "
                  "(low f); %.1f s",
                  kStudyV, hold_hi, hold_lo, drl_hi_min, drl_lo_max, secs)};
}

double gradient_check(nn::Mlp& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  nn::Matrix X(net.input_dim(), 4), C(net.output_dim(), 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = g(rng);
  nn::MlpTape tape;
  net.forward(X, tape);
  const auto analytic = net.backward(tape, C).flatten();
  const auto theta = net.params().flatten();
  auto loss = [&](const std::vector<double>& p) {
    net.params().assign_flat(p);
    return (net.forward(X).array() * C.array()).sum();
  };
  std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
  double worst = 0;
  for (int k = 0; k < kGradProbes; ++k) {
    const std::size_t i = pick(rng);
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    auto p = theta;
    p[i] = theta[i] + h;
    const double up = loss(p);
    p[i] = theta[i] - h;
    const double fd = (up - loss(p)) / (2 * h);
    // Floor keeps coordinates with a vanishing gradient from dividing by zero.
    const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
  }
  net.params().assign_flat(theta);
  return worst;
}

Outcome c6_gradients() {
  std::mt19937_64 rng(6);
  ddpg::Hyperparameters hp;  // 512 x 3 hidden layers
  hp.actor_final_init = 0.1;
  hp.critic_final_init = 0.1;
  const auto b = ddpg::AgentBundle::create(hp, ddpg::InputTransform::identity(160), std::vector<double>(22, -1.0),
                                           std::vector<double>(22, 1.0), rng);
  nn::Mlp actor = b.actor, critic = b.critic;
  const double ea = gradient_check(actor, 1), ec = gradient_check(critic, 2);
  return {ea < kGradRelTol && ec < kGradRelTol,
          fmt("actor %s worst rel err %.2e, critic worst %.2e (%d probes each, < %.0e)", "160-512-512-512-22", ea, ec,
              kGradProbes, kGradRelTol)};
}

Outcome c7_ddpg() {
  std::mt19937_64 rng(7);
  ddpg::Hyperparameters hp;
  hp.actor_hidden = hp.critic_hidden = {32, 32};
  hp.batch = 16;
  auto b = ddpg::AgentBundle::create(hp, ddpg::InputTransform::identity(4), std::vector<double>(3, -1.0),
                                     std::vector<double>(3, 1.0), rng);

  // Terminal masking: terminal targets equal r even with poisoned target networks.
  ddpg::Minibatch mb;
  std::normal_distribution<double> g(0, 1);
  mb.S = mb.S_next = nn::Matrix(4, 16);
  mb.A = nn::Matrix(3, 16);
  mb.r = nn::Vector(16);
  mb.done = nn::Vector(16);
  for (Eigen::Index i = 0; i < mb.S.size(); ++i) mb.S_next.data()[i] = g(rng);
  for (Eigen::Index j = 0; j < 16; ++j) {
    mb.r[j] = g(rng);
    mb.done[j] = j % 2;
  }
  auto poisoned = b;
  auto flat = poisoned.critic_target.params().flatten();
  for (double& v : flat) v = std::numeric_limits<double>::quiet_NaN();
  poisoned.critic_target.params().assign_flat(flat);
  const auto y_poison = ddpg::td_targets(poisoned, mb);
  const auto y = ddpg::td_targets(b, mb);
  bool masking = true;
  for (Eigen::Index j = 0; j < 16; ++j) {
    if (mb.done[j] != 0) masking &= y_poison[j] == mb.r[j];
    else masking &= std::isnan(y_poison[j]) && y[j] != mb.r[j];
  }

  // Polyak closed form.
  auto t = b;
  auto tf = t.critic_target.params().flatten();
  for (double& v : tf) v += 1.0;
  t.critic_target.params().assign_flat(tf);
  const int n = 50;
  for (int k = 0; k < n; ++k) ddpg::update_targets(t);
  const auto online = t.critic.params().flatten();
  const auto after = t.critic_target.params().flatten();
  double polyak_err = 0;
  for (std::size_t i = 0; i < after.size(); ++i)
    polyak_err = std::max(polyak_err, std::abs((after[i] - online[i]) - std::pow(1 - hp.tau, n)));

  // Replay uniformity.
  ddpg::ReplayBuffer buf(50);
  for (int i = 0; i < 50; ++i) buf.push({nn::Vector::Zero(1), nn::Vector::Zero(1), 0.0, nn::Vector::Zero(1), 0});
  std::vector<double> counts(50, 0);
  for (int k = 0; k < 2000; ++k)
    for (std::size_t i : buf.sample_indices(50, rng)) counts[i] += 1;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;

  // Smoke training on the reduced lattice.
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = io::load_run_config(source("configs/smoke6.yaml").string()).config;
  KvEnvironment env(cfg.env_config());
  const auto lim = cfg.action_limits();
  std::vector<double> low(lim.size());
  for (std::size_t i = 0; i < lim.size(); ++i) low[i] = -lim[i];
  env.configure({{}, false});
  std::mt19937_64 base_rng(cfg.seed), act_rng(cfg.seed + 1);
  const double random = ddpg::evaluate_policy(env, ddpg::random_policy(low, lim, act_rng), 10, cfg.training.horizon, base_rng);

  std::mt19937_64 init_rng(cfg.seed);
  auto bundle = ddpg::AgentBundle::create(cfg.training.hp, cfg.input_transform(), low, lim, init_rng);
  ddpg::TrainOptions opts;
  opts.horizon = cfg.training.horizon;
  opts.seed = cfg.seed;
  const auto res = ddpg::train(cfg.curriculum(), bundle, env, opts);
  env.configure({{}, false});
  std::mt19937_64 eval_rng(cfg.seed);
  const double trained = ddpg::evaluate_policy(env, ddpg::RuntimePolicy::from_bundle(bundle), 10, cfg.training.horizon, eval_rng);
  const double secs = seconds_since(t0);

  const bool smoke = trained >= kSmokeFactor * random && secs < kSmokeSeconds && res.curve.size() == 200;
  return {masking && polyak_err < 1e-12 && chi2 < kChi2Crit49 && smoke,
          fmt("masking %s, polyak err %.1e, chi2 %.1f (< %.2f); smoke %zu episodes, trained %.4f vs random %.4f "
              "(ratio %.1f, need %.1f), %.0f s",
              masking ? "ok" : "BROKEN", polyak_err, chi2, kChi2Crit49, res.curve.size(), trained, random,
              trained / random, kSmokeFactor, secs)};
}

Outcome c8_supervisor() {
  const SupervisorConfig cfg;
  int mismatches = 0, cells = 0;
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j, ++cells) {
      const double X = 0.0004 * i, Y = 0.0004 * j;
      if (supervise(X, Y, cfg) != ((X < kSupervisorThreshold && Y < kSupervisorThreshold) ? 1 : 0)) ++mismatches;
    }
  const double thr = cfg.threshold();  // 0.7 * r_max in floating point
  for (auto [X, Y, beta] : std::vector<std::tuple<double, double, int>>{{std::nextafter(thr, 0.0), 0.01, 1},
                                                                       {thr, 0.01, 0},
                                                                       {0.01, thr, 0},
                                                                       {0.03, 0.001, 0},
                                                                       {0.001, 0.03, 0}}) {
    ++cells;
    if (supervise(X, Y, cfg) != beta) ++mismatches;
  }

  // Channel exclusivity on the default lattice.
  const auto lat = io::load_lattice(source("configs/lattice_default.yaml").string());
  const BeamInit init{3e-3, 3e-3, 0, 0};
  const auto q0 = lat.nominal_strengths();
  auto sim = [&](const std::vector<double>& q) { return integrate(lat, q, init); };
  std::vector<double> off(q0.size());
  for (std::size_t i = 0; i < off.size(); ++i) off[i] = 0.01 * static_cast<double>(i % 5) - 0.02;
  HybridConfig hc;
  hc.es.omega_base = 0.125;
  bool exclusive = true;
  hc.force_beta = 1;
  auto s1 = hybrid_init(q0);
  const auto d1 = hybrid_step(s1, q0, q0, off, 0.4, sim, hc);
  for (std::size_t i = 0; i < q0.size(); ++i) exclusive &= d1.Q[i] == q0[i] + off[i];
  hc.force_beta = 0;
  hc.warm_start = false;
  auto s0 = hybrid_init(q0);
  const auto d0 = hybrid_step(s0, q0, q0, off, 0.4, sim, hc);
  const std::vector<bool> all(q0.size(), true);
  exclusive &= d0.Q == es_step(EsState{0, q0}, 0.4, hc.es, &all).params;
  return {mismatches == 0 && exclusive && std::abs(cfg.threshold() - kSupervisorThreshold) < 1e-15,
          fmt("%d/%d supervisor cells match the AND rule at %.5f m; channel exclusivity %s", cells - mismatches, cells,
              cfg.threshold(), exclusive ? "bit-identical" : "BROKEN")};
}

Outcome c9_comparison() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = io::load_run_config(source("configs/desk.yaml").string()).config;
  const auto ckpt = source("artifacts/desk/final.ckpt");
  if (!fs::exists(ckpt)) return {false, "missing " + ckpt.string()};
  const auto policy = ddpg::RuntimePolicy::load(ckpt.string());
  const OffsetPolicy pol = [&](const std::vector<double>& o) { return policy(o); };
  auto cc = cfg.comparison_config();
  const auto traces = run_comparison({VariantKind::drl, VariantKind::es, VariantKind::es_warm, VariantKind::hybrid}, cc, pol);
  auto quiet = cc;
  quiet.schedule = cc.schedule.quiet();
  const auto calm = run_variant(VariantKind::hybrid, quiet, pol);
  const double secs = seconds_since(t0);

  const double m_drl = window_mean(traces[0], 100, 400), m_es = window_mean(traces[1], 100, 400);
  const double m_warm = window_mean(traces[2], 100, 400), m_hyb = window_mean(traces[3], 100, 400);
  const double steady = window_mean(calm, 400, 500);
  double plateau_min = 1;
  for (const auto& r : traces[3].steps)
    if (r.t >= 200 && r.t <= 300) plateau_min = std::min(plateau_min, r.reward);
  const int cycles = beta_cycles(traces[3]);
  const bool a = m_hyb > m_drl && m_hyb > m_es && m_hyb > m_warm;
  const bool b = plateau_min > kHybridFloorFraction * steady;
  const bool c = cycles >= 1;
  return {a && b && c && secs < kCompareSeconds,
          fmt("(a) %s mean R over t=100..400: hybrid %.3f, drl %.3f, es %.3f, es_warm %.3f; (b) %s plateau min %.3f vs "
              "0.6 x steady %.3f; (c) %s %d beta cycles; drl mean t<100 %.3f; %.0f s",
              a ? "ok" : "NO", m_hyb, m_drl, m_es, m_warm, b ? "ok" : "NO", plateau_min, kHybridFloorFraction * steady,
              c ? "ok" : "NO", cycles, window_mean(traces[0], 0, 99), secs)};
}

Outcome c10_reward() {
  const auto lat = io::load_lattice(source("configs/lattice_default.yaml").string());
  const RewardConfig rc;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  const InitRanges ranges;
  int feasible = 0, attempts = 0, out_of_range = 0;
  while (feasible < kRewardFuzz && attempts < 10 * kRewardFuzz) {
    ++attempts;
    auto q = lat.nominal_strengths();
    for (double& v : q) v *= scale(rng);
    const auto tr = integrate(lat, q, sample_init(ranges, rng));
    if (!tr.feasible) continue;
    ++feasible;
    const double R = penalty(tr, rc).R;
    if (!(R > 0 && R <= 1)) ++out_of_range;
  }

  std::uniform_real_distribution<double> pos(0.0, 0.03), slope(-0.02, 0.02), d(1e-6, 5e-3);
  int violations = 0;
  for (int i = 0; i < kMonotoneProbes; ++i) {
    const PathAverages avg{pos(rng), pos(rng), slope(rng) * slope(rng), slope(rng) * slope(rng)};
    const double Xe = pos(rng), Ye = pos(rng), Xpe = slope(rng), Ype = slope(rng), step = d(rng);
    const auto base = penalty(avg, Xe, Ye, Xpe, Ype, rc);
    // Envelope term: widen X_bar (strict when already outside the band).
    PathAverages wide = avg;
    wide.X += step;
    const double r_env = penalty(wide, Xe, Ye, Xpe, Ype, rc).R;
    if (r_env > base.R || (avg.X > rc.r_band() && !(r_env < base.R))) ++violations;
    // Smoothness term.
    PathAverages rough = avg;
    rough.Xp_sq += step * step;
    if (!(penalty(rough, Xe, Ye, Xpe, Ype, rc).R < base.R)) ++violations;
    // Terminal term: steeper exit slope.
    if (!(penalty(avg, Xe, Ye, Xpe + std::copysign(step, Xpe), Ype, rc).R < base.R)) ++violations;
  }
  return {feasible == kRewardFuzz && out_of_range == 0 && violations == 0,
          fmt("%d feasible trajectories (%d attempts), %d rewards outside (0, 1]; %d directed perturbations x 3 terms, "
              "%d violations",
              feasible, attempts, out_of_range, kMonotoneProbes, violations)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ESDRL_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string first_difference(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t nb = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++nb;
  if (names.size() != nb) return "file count differs";
  for (const auto& n : names) {
    if (!fs::exists(b / n)) return n + " missing";
    if (io::read_text(a / n) != io::read_text(b / n)) return n + " differs";
  }
  return "";
}

Outcome c11_reproducibility() {
  const auto root = fs::temp_directory_path() / "esdrl_acceptance_c11";
  fs::remove_all(root);
  const std::string desk = source("configs/desk.yaml").string(), smoke = source("configs/smoke6.yaml").string();
  const std::string ckpt = source("artifacts/desk/final.ckpt").string();
  const std::vector<std::pair<std::string, std::string>> runs{
      {"simulate", "simulate --config " + desk + " --set Q5=2.7"},
      {"train", "train --config " + smoke + " --max-episodes 4 --set training.horizon=10"},
      {"evaluate", "evaluate --config " + smoke + " --checkpoint " + (root / "train" / "final.ckpt").string()},
      {"experiment", "experiment --config " + desk + " --variants es,hybrid --checkpoint " + ckpt},
      {"experiment_1d", "experiment --config " + desk + " --study 1d"},
  };
  std::string report;
  bool ok = true;
  for (const auto& [name, args] : runs) {
    const auto first = root / name, again = root / (name + "_rerun");
    const std::string command = args.substr(0, args.find(' '));
    if (run_cli(args + " --out " + first.string()) != 0 ||
        run_cli(command + " --manifest " + (first / "manifest.json").string() + " --out " + again.string()) != 0) {
      ok = false;
      report += name + ": command failed; ";
      continue;
    }
    const std::string diff = first_difference(first, again);
    ok &= diff.empty();
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(first)) ++files;
    report += name + (diff.empty() ? fmt(" %zu files identical; ", files) : ": " + diff + "; ");
  }
  return {ok, report};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"KV drift and harmonic oracles", c1_oracles},
      {"RK4 fourth-order convergence", c2_rk4_order},
      {"bounded ES update", c3_bounded_updates},
      {"ES averaging", c4_averaging},
      {"1D unknown-direction study", c5_study_1d},
      {"gradient fidelity", c6_gradients},
      {"DDPG mechanics and smoke training", c7_ddpg},
      {"supervisor law", c8_supervisor},
      {"perturbation comparison", c9_comparison},
      {"reward bounds and monotonicity", c10_reward},
      {"manifest reproducibility", c11_reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu (%s): %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
