#pragma once

// Curriculum-driven DDPG training loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdrl/ddpg.hpp"
#include "esdrl/kv_env.hpp"

namespace esdrl::ddpg {

struct Stage {
  std::string phase;  // "I", "II", "III" (or free-form for other tasks)
  std::string name;   // e.g. "I.3"
  StageSettings settings;
  std::size_t min_episodes = 500;
  std::size_t max_episodes = 2000;
};

struct CurriculumPlan {
  std::vector<Stage> stages;
  std::size_t saturation_window = 50;
  double saturation_threshold = 0.01;
};

/// Checks that group sizes partition 1..n into contiguous blocks.
inline std::vector<std::vector<std::size_t>> contiguous_groups(const std::vector<std::size_t>& sizes, std::size_t n) {
  std::vector<std::vector<std::size_t>> groups;
  std::size_t next = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("curriculum: empty magnet group");
    std::vector<std::size_t> g;
    for (std::size_t k = 0; k < s; ++k) g.push_back(next++);
    groups.push_back(std::move(g));
  }
  if (next != n)
    throw std::invalid_argument("curriculum: groups cover " + std::to_string(next) + " magnets, lattice has " +
                                std::to_string(n));
  return groups;
}

struct PhaseBudget {
  std::size_t min_episodes = 500;
  std::size_t max_episodes = 2000;
};

/// Phase I (one stage per group), Phase II (all magnets, fixed beam),
/// Phase III (all magnets, randomized beam).
inline CurriculumPlan kv_curriculum(const std::vector<std::size_t>& group_sizes, std::size_t n_magnets,
                                    PhaseBudget per_group, PhaseBudget phase2, PhaseBudget phase3) {
  CurriculumPlan plan;
  const auto groups = contiguous_groups(group_sizes, n_magnets);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Stage s;
    s.phase = "I";
    s.name = "I." + std::to_string(g + 1);
    s.settings.action_mask.assign(n_magnets, false);
    for (std::size_t i : groups[g]) s.settings.action_mask[i] = true;
    s.min_episodes = per_group.min_episodes;
    s.max_episodes = per_group.max_episodes;
    if (per_group.max_episodes > 0) plan.stages.push_back(std::move(s));
  }
  if (phase2.max_episodes > 0) plan.stages.push_back({"II", "II", {{}, false}, phase2.min_episodes, phase2.max_episodes});
  if (phase3.max_episodes > 0) plan.stages.push_back({"III", "III", {{}, true}, phase3.min_episodes, phase3.max_episodes});
  return plan;
}

/// True when the latest `window`-episode mean improved by less than
/// `threshold` (relative) over the window before it.
inline bool reward_saturated(const std::vector<double>& episode_rewards, std::size_t window, double threshold) {
  if (window == 0 || episode_rewards.size() < 2 * window) return false;
  const auto end = episode_rewards.end();
  const double recent = std::accumulate(end - static_cast<std::ptrdiff_t>(window), end, 0.0) / static_cast<double>(window);
  const double before = std::accumulate(end - static_cast<std::ptrdiff_t>(2 * window), end - static_cast<std::ptrdiff_t>(window), 0.0) /
                        static_cast<double>(window);
  const double scale = std::max(std::abs(before), 1e-12);
  return (recent - before) / scale < threshold;
}

/// Budget precedence: never before min_episodes, always at max_episodes.
inline bool stage_complete(std::size_t episodes_in_stage, const Stage& stage, const std::vector<double>& stage_rewards,
                           const CurriculumPlan& plan) {
  if (episodes_in_stage >= stage.max_episodes) return true;
  if (episodes_in_stage < stage.min_episodes) return false;
  return reward_saturated(stage_rewards, plan.saturation_window, plan.saturation_threshold);
}

struct LearningRecord {
  std::size_t episode = 0;
  std::string phase;
  std::string stage;
  double mean_reward = 0;
  double critic_loss = 0;       // mean over the episode's updates (0 if none)
  double actor_objective = 0;   // mean over the episode's updates (0 if none)
  std::size_t failures = 0;
  std::size_t steps = 0;
};

struct TrainProgress {
  std::size_t episode = 0;
  std::size_t stage_index = 0;
};

struct TrainOptions {
  std::size_t horizon = 50;
  std::uint64_t seed = 0;
  std::size_t failure_window = 100;
  double failure_abort_fraction = 0.5;
  std::function<void(const LearningRecord&)> on_episode;
  // Called after each stage with the stage name and the progress so far
  // (episodes done, index of the next stage).
  std::function<void(const std::string&, const AgentBundle&, const TrainProgress&)> on_stage_end;
};

struct TrainResult {
  std::vector<LearningRecord> curve;
  TrainProgress progress;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the plan from `start` (a fresh run starts at {0, 0}).
inline TrainResult train(const CurriculumPlan& plan, AgentBundle& bundle, Environment& env, const TrainOptions& opts,
                         TrainProgress start = {}) {
  if (env.action_dim() != bundle.act_dim()) throw std::invalid_argument("train: environment/agent action sizes differ");
  std::mt19937_64 rng(opts.seed ^ (0x9E3779B97F4A7C15ULL * (start.episode + 1)));
  ReplayBuffer replay(bundle.hp.replay_capacity);
  const std::size_t warmup = bundle.hp.batch * std::max<std::size_t>(1, bundle.hp.warmup_batches);

  TrainResult result;
  result.progress = start;
  std::deque<int> recent_failures;

  for (std::size_t si = start.stage_index; si < plan.stages.size(); ++si) {
    const Stage& stage = plan.stages[si];
    env.configure(stage.settings);
    bundle.action_mask = stage.settings.action_mask.empty() ? std::vector<bool>(bundle.act_dim(), true)
                                                            : stage.settings.action_mask;
    std::vector<double> stage_rewards;
    std::size_t in_stage = 0;
    while (!stage_complete(in_stage, stage, stage_rewards, plan)) {
      LearningRecord rec;
      rec.episode = result.progress.episode;
      rec.phase = stage.phase;
      rec.stage = stage.name;
      double reward_sum = 0, loss_sum = 0, obj_sum = 0;
      std::size_t updates = 0;

      Vector s = bundle.transform.apply(env.reset(rng));
      for (std::size_t t = 0; t < opts.horizon; ++t) {
        const Vector a = bundle.explore(s, rng);
        const EnvStep out = env.step(bundle.to_physical(a));
        Transition tr;
        tr.s = s;
        tr.a = a;
        tr.r = out.reward;
        tr.done = out.done ? 1 : 0;
        tr.s_next = out.failed ? s : bundle.transform.apply(out.obs);
        const Vector s_next = tr.s_next;
        replay.push(std::move(tr));
        reward_sum += out.reward;
        ++rec.steps;
        if (out.failed) ++rec.failures;

        if (replay.size() >= warmup && replay.size() >= bundle.hp.batch) {
          const Minibatch mb = gather(replay, replay.sample_indices(bundle.hp.batch, rng));
          loss_sum += critic_update(bundle, mb);
          obj_sum += actor_update(bundle, mb);
          update_targets(bundle);
          ++updates;
        }
        if (out.done) break;
        s = s_next;
      }
      rec.mean_reward = reward_sum / static_cast<double>(std::max<std::size_t>(1, rec.steps));
      rec.critic_loss = updates ? loss_sum / static_cast<double>(updates) : 0.0;
      rec.actor_objective = updates ? obj_sum / static_cast<double>(updates) : 0.0;
      stage_rewards.push_back(rec.mean_reward);
      result.curve.push_back(rec);
      if (opts.on_episode) opts.on_episode(rec);
      ++in_stage;
      ++result.progress.episode;

      recent_failures.push_back(rec.failures > 0 ? 1 : 0);
      if (recent_failures.size() > opts.failure_window) recent_failures.pop_front();
      if (recent_failures.size() == opts.failure_window) {
        const double frac = static_cast<double>(std::accumulate(recent_failures.begin(), recent_failures.end(), 0)) /
                            static_cast<double>(opts.failure_window);
        if (frac > opts.failure_abort_fraction)
          throw TrainingAborted("train: " + std::to_string(static_cast<int>(frac * 100)) + "% of the last " +
                                std::to_string(opts.failure_window) + " episodes failed the envelope integration (stage " +
                                stage.name + ", episode " + std::to_string(rec.episode) + ")");
      }
    }
    result.progress.stage_index = si + 1;
    if (opts.on_stage_end) opts.on_stage_end(stage.name, bundle, result.progress);
  }
  bundle.action_mask.assign(bundle.act_dim(), true);
  return result;
}

/// Mean per-step reward of a fixed policy over `episodes` episodes.
inline double evaluate_policy(Environment& env, const std::function<std::vector<double>(const std::vector<double>&)>& policy,
                              std::size_t episodes, std::size_t horizon, std::mt19937_64& rng) {
  double total = 0;
  std::size_t steps = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<double> obs = env.reset(rng);
    for (std::size_t t = 0; t < horizon; ++t) {
      const EnvStep out = env.step(policy(obs));
      total += out.reward;
      ++steps;
      if (out.done) break;
      obs = out.obs;
    }
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

/// Uniform random actions inside the bounds.
inline std::function<std::vector<double>(const std::vector<double>&)> random_policy(std::vector<double> low,
                                                                                    std::vector<double> high,
                                                                                    std::mt19937_64& rng) {
  return [low = std::move(low), high = std::move(high), &rng](const std::vector<double>&) {
    std::vector<double> a(low.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::uniform_real_distribution<double>(low[i], high[i])(rng);
    return a;
  };
}

}  // namespace esdrl::ddpg
