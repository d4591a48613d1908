#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "esdrl/experiments.hpp"
#include "helpers.hpp"

using namespace esdrl;

TEST(Schedule, KnownValues) {
  const PerturbationSchedule s;
  const auto v0 = schedule_eval(s, 0);
  EXPECT_EQ(v0.q_a, 1.21);
  EXPECT_EQ(v0.q_b, 3.5);
  EXPECT_EQ(v0.delta_L, 0.0);

  const auto v25 = schedule_eval(s, 25);  // quarter period, amplitude 0.25
  EXPECT_NEAR(v25.q_a, 1.46, 1e-12);
  EXPECT_NEAR(v25.q_b, 3.75, 1e-12);

  const auto v50 = schedule_eval(s, 50);  // half period
  EXPECT_NEAR(v50.q_a, 1.21, 1e-12);
  EXPECT_EQ(v50.delta_L, 0.0);

  const auto v150 = schedule_eval(s, 150);
  EXPECT_NEAR(v150.delta_L, 0.075, 1e-15);

  const auto v250 = schedule_eval(s, 250);
  EXPECT_NEAR(v250.delta_L, 0.15, 1e-15);
  EXPECT_NEAR(v250.q_b, 3.5, 1e-12);

  const auto v275 = schedule_eval(s, 275);  // amplitude 0.25 + 0.5 * 175 / 400
  EXPECT_NEAR(v275.q_a, 1.21 - 0.46875, 1e-12);

  EXPECT_NEAR(schedule_eval(s, 350).delta_L, 0.075, 1e-15);
  EXPECT_EQ(schedule_eval(s, 400).delta_L, 0.0);
  EXPECT_THROW(schedule_eval(s, 501), std::out_of_range);
}

TEST(Schedule, ProfileJumpTakesLaterKnot) {
  const Profile p{{{0, 1.0}, {10, 2.0}, {10, 5.0}, {20, 5.0}}};
  EXPECT_EQ(p(-1), 1.0);
  EXPECT_EQ(p(5), 1.5);
  EXPECT_EQ(p(10), 5.0);
  EXPECT_EQ(p(30), 5.0);
}

TEST(Schedule, QuietHoldsSetpoints) {
  const auto q = PerturbationSchedule{}.quiet();
  for (long t : {0L, 37L, 250L, 500L}) {
    const auto v = schedule_eval(q, t);
    EXPECT_EQ(v.q_a, 1.21);
    EXPECT_EQ(v.q_b, 3.5);
    EXPECT_EQ(v.delta_L, 0.0);
  }
}

TEST(Schedule, ShiftedLatticeMovesOneMagnet) {
  const Lattice lat = esdrl::testing::small_fodo();
  const Lattice s = shifted_lattice(lat, 3, 0.1);
  EXPECT_DOUBLE_EQ(s.magnets[3].z_start, lat.magnets[3].z_start + 0.1);
  EXPECT_EQ(s.magnets[2].z_start, lat.magnets[2].z_start);
  EXPECT_THROW(shifted_lattice(lat, 3, 0.45), std::invalid_argument);  // overlaps magnet 5
}

namespace {

ComparisonConfig small_comparison() {
  ComparisonConfig c;
  c.lattice = esdrl::testing::small_fodo(6, 300);
  c.init = {3e-3, 3e-3, 0, 0};
  c.schedule.driven_a = 0;
  c.schedule.driven_b = 3;
  c.schedule.shifted_magnet = 3;
  c.schedule.q_a_star = 3.0;
  c.schedule.q_b_star = 3.0;
  c.schedule.drift.knots = {{0, 0.0}, {10, 0.05}};
  c.schedule.horizon = 30;
  c.hybrid.es.omega_base = 0.125;
  return c;
}

std::vector<double> fixed_offset(const std::vector<double>&) { return {0.0, 0.2, -0.1, 0.0, 0.1, -0.2}; }

}  // namespace

TEST(Comparison, ForcedEsHybridEqualsWarmStartedEs) {
  auto cfg = small_comparison();
  cfg.hybrid.force_beta = 0;
  const auto warm = run_variant(VariantKind::es_warm, cfg, fixed_offset);
  const auto hyb = run_variant(VariantKind::hybrid, cfg, fixed_offset);
  ASSERT_EQ(warm.settings.size(), hyb.settings.size());
  for (std::size_t t = 0; t < warm.settings.size(); ++t) {
    EXPECT_EQ(warm.settings[t], hyb.settings[t]) << "t = " << t;
    EXPECT_EQ(warm.steps[t].reward, hyb.steps[t].reward);
  }
}

TEST(Comparison, ForcedDrlHybridEqualsDrl) {
  auto cfg = small_comparison();
  cfg.hybrid.force_beta = 1;
  const auto drl = run_variant(VariantKind::drl, cfg, fixed_offset);
  const auto hyb = run_variant(VariantKind::hybrid, cfg, fixed_offset);
  for (std::size_t t = 0; t < drl.settings.size(); ++t) EXPECT_EQ(drl.settings[t], hyb.settings[t]);
}

TEST(Comparison, QuietScheduleKeepsDrlConstant) {
  auto cfg = small_comparison();
  cfg.schedule = cfg.schedule.quiet();
  const auto drl = run_variant(VariantKind::drl, cfg, fixed_offset);
  for (const auto& r : drl.steps) EXPECT_EQ(r.reward, drl.steps.front().reward);
}

TEST(Comparison, DrivenMagnetsFollowSchedule) {
  const auto cfg = small_comparison();
  for (auto kind : {VariantKind::es, VariantKind::hybrid}) {
    const auto tr = run_variant(kind, cfg, fixed_offset);
    for (const auto& r : tr.steps) {
      const auto v = schedule_eval(cfg.schedule, r.t);
      EXPECT_EQ(r.q_a, v.q_a);
      EXPECT_EQ(r.q_b, v.q_b);
      EXPECT_EQ(r.delta_L, v.delta_L);
    }
  }
}

TEST(Comparison, EsStepsStayBounded) {
  const auto cfg = small_comparison();
  const auto tr = run_variant(VariantKind::es, cfg, nullptr);
  const auto bounds = cfg.hybrid.es.step_bounds(6);
  const double bound = *std::max_element(bounds.begin(), bounds.end());
  for (const auto& r : tr.steps) EXPECT_LE(r.dq_inf, bound);
}

TEST(Comparison, PolicyRequiredForDrlVariants) {
  const auto cfg = small_comparison();
  EXPECT_THROW(run_variant(VariantKind::hybrid, cfg, nullptr), std::invalid_argument);
  EXPECT_NO_THROW(run_variant(VariantKind::es, cfg, nullptr));
}

TEST(Comparison, WindowMeanAndBetaCycles) {
  VariantTrace tr;
  const std::vector<int> betas{0, 1, 1, 0, 0, 1, 0, 1, 1, 0};
  for (long t = 0; t < 10; ++t) tr.steps.push_back({t, static_cast<double>(t), betas[t]});
  EXPECT_DOUBLE_EQ(window_mean(tr, 2, 4), 3.0);
  EXPECT_EQ(beta_cycles(tr), 2);
  EXPECT_THROW(window_mean(tr, 20, 30), std::invalid_argument);
}

TEST(Plant1D, ZeroInputFollowsExponential) {
  const Plant1D p{0.1, 1.0, 0.0};
  const auto tr = run_policy_1d(p, [](double) { return 0.0; }, 1.0, 5.0, 0.05, 1e-3, 1e3);
  EXPECT_NEAR(tr.x.back(), std::exp(0.5), 1e-10);
}

TEST(Plant1D, EnvironmentRewardIsObjective) {
  Plant1DEnvConfig ec;
  ec.plant = {0.0, 1.0, 0.0};
  Plant1DEnvironment env(ec);
  std::mt19937_64 rng(1);
  const double x0 = env.reset(rng)[0];
  const auto s = env.step({0.0});
  EXPECT_NEAR(s.obs[0], x0, 1e-15);
  EXPECT_EQ(s.reward, objective_1d(s.obs[0]));
}
