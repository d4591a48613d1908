#pragma once

#include <cmath>
#include <stdexcept>

#include "esdrl/kv_sim.hpp"

namespace esdrl {

struct RewardConfig {
  double r_max = 0.0254;  // m
  double w_e = 1000.0;
  double w_s = 10.0;
  double w_r = 100.0;
  double w_w = 100.0;
  double w_t = 100.0;
  double failure_penalty = 99.0;

  double r_band() const { return 0.5 * r_max; }
  double r_tt_sq() const { return 0.5 * r_max * r_max; }

  void validate() const {
    if (!(r_max > 0)) throw std::invalid_argument("reward: r_max must be positive");
    for (double w : {w_e, w_s, w_r, w_w, w_t})
      if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("reward: weights must be finite and >= 0");
    if (!(failure_penalty >= 0)) throw std::invalid_argument("reward: failure_penalty must be >= 0");
  }
};

struct RewardBreakdown {
  double P_env = 0;
  double P_smooth = 0;
  double P_term = 0;
  double P_total = 0;
  double R = 1;
};

struct PathAverages {
  double X = 0;
  double Y = 0;
  double Xp_sq = 0;
  double Yp_sq = 0;
};

inline double hinge(double a) { return a > 0 ? a : 0.0; }

inline double bounded_inverse(double penalty) { return 1.0 / (1.0 + penalty); }

/// Means over the first N grid nodes (the nodes that make up the observation).
inline PathAverages path_averages(const EnvelopeTrajectory& traj) {
  if (!traj.feasible) throw std::invalid_argument("path_averages: trajectory is infeasible");
  const std::size_t n = traj.nodes() - 1;
  PathAverages avg;
  for (std::size_t k = 0; k < n; ++k) {
    avg.X += traj.X[k];
    avg.Y += traj.Y[k];
    avg.Xp_sq += traj.Xp[k] * traj.Xp[k];
    avg.Yp_sq += traj.Yp[k] * traj.Yp[k];
  }
  const double inv = 1.0 / static_cast<double>(n);
  avg.X *= inv;
  avg.Y *= inv;
  avg.Xp_sq *= inv;
  avg.Yp_sq *= inv;
  return avg;
}

inline RewardBreakdown penalty(const PathAverages& avg, double X_end, double Y_end, double Xp_end,
                               double Yp_end, const RewardConfig& cfg) {
  RewardBreakdown b;
  const double band = cfg.r_band();
  b.P_env = cfg.w_e * (hinge(avg.X - band) + hinge(avg.Y - band));
  b.P_smooth = cfg.w_s * (avg.Xp_sq + avg.Yp_sq);
  b.P_term = cfg.w_r * std::abs(X_end - Y_end) + cfg.w_w * (std::abs(Xp_end) + std::abs(Yp_end)) +
             cfg.w_t * std::abs(X_end * X_end + Y_end * Y_end - cfg.r_tt_sq());
  b.P_total = b.P_env + b.P_smooth + b.P_term;
  b.R = bounded_inverse(b.P_total);
  return b;
}

inline RewardBreakdown penalty(const EnvelopeTrajectory& traj, const RewardConfig& cfg) {
  const PathAverages avg = path_averages(traj);
  const std::size_t last = traj.nodes() - 1;
  return penalty(avg, traj.X[last], traj.Y[last], traj.Xp[last], traj.Yp[last], cfg);
}

/// Reward assigned when the envelope integration fails.
inline double failure_reward(const RewardConfig& cfg) { return bounded_inverse(cfg.failure_penalty); }

}  // namespace esdrl
