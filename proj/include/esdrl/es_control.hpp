#pragma once

// Bounded extremum seeking: the discrete multi-parameter update, the
// continuous-time law, and averaging diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdrl/ode.hpp"

namespace esdrl {

struct EsConfig {
  double alpha = 1e-3;
  double omega_base = 0.1;
  std::vector<double> ratios;  // empty: golden-ratio ladder sized on first use
  double gain_k = 15.0;
  double dt = 1.0;
  bool maximize = true;

  /// r_i = 1 + frac(i (sqrt(5) - 1) / 2), i = 1..n. Distinct and in [1, 2).
  static std::vector<double> golden_ladder(std::size_t n) {
    const double g = std::numbers::phi - 1.0;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i + 1) * g;
      r[i] = 1.0 + (x - std::floor(x));
    }
    return r;
  }

  std::vector<double> ratios_for(std::size_t n) const {
    if (ratios.empty()) return golden_ladder(n);
    if (ratios.size() != n)
      throw std::invalid_argument("es: ratios has " + std::to_string(ratios.size()) + " entries, need " +
                                  std::to_string(n));
    return ratios;
  }

  double omega(std::size_t i, std::size_t n) const { return ratios_for(n)[i] * omega_base; }

  /// Per-coordinate hard bound on |Q_i(t+1) - Q_i(t)|.
  std::vector<double> step_bounds(std::size_t n) const {
    const auto r = ratios_for(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = dt * std::sqrt(alpha * (r[i] * omega_base));
    return b;
  }

  void validate(std::size_t n) const {
    if (!(alpha >= 0) || !std::isfinite(alpha)) throw std::invalid_argument("es: alpha must be >= 0");
    if (!(omega_base > 0)) throw std::invalid_argument("es: omega_base must be positive");
    if (!(dt > 0)) throw std::invalid_argument("es: dt must be positive");
    const auto r = ratios_for(n);
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!(r[i] > 0)) throw std::invalid_argument("es: ratios must be positive");
      for (std::size_t j = 0; j < i; ++j)
        if (r[i] == r[j])
          throw std::invalid_argument("es: dither ratios " + std::to_string(j + 1) + " and " +
                                      std::to_string(i + 1) + " are equal");
    }
    const double fastest = *std::max_element(r.begin(), r.end()) * omega_base;
    if (dt * fastest > 0.25 + 1e-12)
      throw std::invalid_argument("es: dt * max(omega_i) exceeds 0.25");
  }
};

struct EsState {
  long step_index = 0;
  std::vector<double> params;
};

/// Q_i(t+1) = Q_i(t) + dt sqrt(alpha w_i) cos(w_i t dt -/+ k V).
/// `active` (optional) masks coordinates that are held fixed.
inline EsState es_step(const EsState& state, double objective_value, const EsConfig& cfg,
                       const std::vector<bool>* active = nullptr) {
  if (!std::isfinite(objective_value))
    throw std::invalid_argument("es_step: objective value is not finite");
  const std::size_t n = state.params.size();
  if (active && active->size() != n) throw std::invalid_argument("es_step: mask size mismatch");
  const auto r = cfg.ratios_for(n);
  const double sign = cfg.maximize ? -1.0 : 1.0;
  const double t = static_cast<double>(state.step_index);

  EsState next{state.step_index + 1, state.params};
  for (std::size_t i = 0; i < n; ++i) {
    if (active && !(*active)[i]) continue;
    const double w = r[i] * cfg.omega_base;
    const double bound = cfg.dt * std::sqrt(cfg.alpha * w);
    const double q = state.params[i];
    double q_next = q + bound * std::cos(w * t * cfg.dt + sign * cfg.gain_k * objective_value);
    // Rounding in the addition can overshoot the bound by an ulp; pull back.
    while (std::abs(q_next - q) > bound) q_next = std::nextafter(q_next, q);
    next.params[i] = q_next;
  }
  return next;
}

// ---------------------------------------------------------------------------
// Continuous-time bounded ES on x' = f(x, t) + g(x, t) * u(x, t), with
// u_i = sqrt(alpha w_i) cos(w_i t -/+ k V(x)) and g diagonal.

struct EsFlowSystem {
  std::size_t dim = 1;
  std::function<double(const std::vector<double>& x, double t)> objective;
  // Drift f(x, t); empty means zero.
  std::function<std::vector<double>(const std::vector<double>& x, double t)> drift;
  // Diagonal input gains g_i(x, t); empty means identity.
  std::function<std::vector<double>(const std::vector<double>& x, double t)> gain;
};

struct EsFlowResult {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  std::vector<double> V;
  bool diverged = false;
  std::string diagnostic;
};

inline std::vector<double> es_control_law(const std::vector<double>& x, double t, const EsFlowSystem& sys,
                                          const EsConfig& cfg, const std::vector<double>& ratios) {
  const double sign = cfg.maximize ? -1.0 : 1.0;
  const double v = sys.objective(x, t);
  std::vector<double> u(sys.dim);
  for (std::size_t i = 0; i < sys.dim; ++i) {
    const double w = ratios[i] * cfg.omega_base;
    u[i] = std::sqrt(cfg.alpha * w) * std::cos(w * t + sign * cfg.gain_k * v);
  }
  return u;
}

/// RK4 in time with step h; samples every `record_every` steps. Stops with a
/// diagnostic if any |x_i| exceeds `ceiling`.
inline EsFlowResult es_continuous(const EsFlowSystem& sys, const EsConfig& cfg, std::vector<double> x0,
                                  double horizon, double h, std::size_t record_every = 1,
                                  double ceiling = 1e6) {
  if (!(horizon > 0) || !(h > 0)) throw std::invalid_argument("es_continuous: horizon and step must be positive");
  if (x0.size() != sys.dim) throw std::invalid_argument("es_continuous: x0 has wrong dimension");
  const auto ratios = cfg.ratios_for(sys.dim);
  const double fastest = *std::max_element(ratios.begin(), ratios.end()) * cfg.omega_base;
  if (h * fastest > 0.5) throw std::invalid_argument("es_continuous: step too coarse for the dither frequency");

  auto rhs = [&](double t, const std::vector<double>& x) {
    const auto u = es_control_law(x, t, sys, cfg, ratios);
    std::vector<double> dx = sys.drift ? sys.drift(x, t) : std::vector<double>(sys.dim, 0.0);
    const std::vector<double> g = sys.gain ? sys.gain(x, t) : std::vector<double>(sys.dim, 1.0);
    for (std::size_t i = 0; i < sys.dim; ++i) dx[i] += g[i] * u[i];
    return dx;
  };
  auto shifted = [](const std::vector<double>& y, double a, const std::vector<double>& k) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
    return out;
  };

  EsFlowResult res;
  const auto steps = static_cast<std::size_t>(std::llround(horizon / h));
  std::vector<double> x = std::move(x0);
  auto record = [&](double t) {
    res.t.push_back(t);
    res.x.push_back(x);
    res.V.push_back(sys.objective(x, t));
  };
  record(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const auto k1 = rhs(t, x);
    const auto k2 = rhs(t + 0.5 * h, shifted(x, 0.5 * h, k1));
    const auto k3 = rhs(t + 0.5 * h, shifted(x, 0.5 * h, k2));
    const auto k4 = rhs(t + h, shifted(x, h, k3));
    for (std::size_t i = 0; i < sys.dim; ++i) x[i] += (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    const bool blown = std::any_of(x.begin(), x.end(), [&](double v) { return !std::isfinite(v) || std::abs(v) > ceiling; });
    if (blown) {
      record(static_cast<double>(k + 1) * h);
      res.diverged = true;
      res.diagnostic = "state exceeded |x| ceiling at t = " + std::to_string(static_cast<double>(k + 1) * h);
      return res;
    }
    if ((k + 1) % record_every == 0) record(static_cast<double>(k + 1) * h);
  }
  return res;
}

/// RK4 integration of a generic flow x' = F(x, t), sampled like es_continuous.
/// Used for the averaged-system oracles.
inline std::vector<std::vector<double>> integrate_flow(
    const std::function<std::vector<double>(const std::vector<double>&, double)>& F, std::vector<double> x0,
    double horizon, double h, std::size_t record_every = 1) {
  auto shifted = [](const std::vector<double>& y, double a, const std::vector<double>& k) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
    return out;
  };
  std::vector<std::vector<double>> out{x0};
  const auto steps = static_cast<std::size_t>(std::llround(horizon / h));
  std::vector<double> x = std::move(x0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const auto k1 = F(x, t);
    const auto k2 = F(shifted(x, 0.5 * h, k1), t + 0.5 * h);
    const auto k3 = F(shifted(x, 0.5 * h, k2), t + 0.5 * h);
    const auto k4 = F(shifted(x, h, k3), t + h);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    if ((k + 1) % record_every == 0) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Averaged-descent diagnostic on a static objective J(Q) with x_i' = u_i.

struct AveragedDescentReport {
  double max_deviation = 0;       // sup_t ||Q(t) - Q_bar(t)||
  double trajectory_diameter = 0; // max pairwise distance along the oracle path
  double relative_deviation = 0;  // max_deviation / trajectory_diameter
  std::vector<double> mean_drift; // (Q(T) - Q(0)) / T
  std::vector<double> oracle_drift;
};

/// Compares bounded ES (continuous time, unit input gains) against the
/// gradient-flow oracle Q_bar' = -/+ (k alpha / 2) grad J integrated with the
/// same step. `grad` is only used by the oracle.
inline AveragedDescentReport averaged_descent_check(
    const std::function<double(const std::vector<double>&)>& J,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad, const EsConfig& cfg,
    const std::vector<double>& q0, double horizon, double h) {
  const std::size_t n = q0.size();
  EsFlowSystem sys;
  sys.dim = n;
  sys.objective = [&](const std::vector<double>& q, double) { return J(q); };
  const auto es = es_continuous(sys, cfg, q0, horizon, h);

  const double c = (cfg.maximize ? 1.0 : -1.0) * cfg.gain_k * cfg.alpha / 2.0;
  auto F = [&](const std::vector<double>& q, double) {
    auto g = grad(q);
    for (double& v : g) v *= c;
    return g;
  };
  const auto oracle = integrate_flow(F, q0, horizon, h);

  AveragedDescentReport rep;
  const std::size_t m = std::min(es.x.size(), oracle.size());
  for (std::size_t k = 0; k < m; ++k) {
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) d2 += (es.x[k][i] - oracle[k][i]) * (es.x[k][i] - oracle[k][i]);
    rep.max_deviation = std::max(rep.max_deviation, std::sqrt(d2));
  }
  // Oracle path is monotone for the gradient flows we use, so the diameter is
  // the largest distance from any point to any other; quadratic in samples, so thin it.
  const std::size_t stride = std::max<std::size_t>(1, oracle.size() / 2000);
  for (std::size_t a = 0; a < oracle.size(); a += stride)
    for (std::size_t b = a + stride; b < oracle.size(); b += stride) {
      double d2 = 0;
      for (std::size_t i = 0; i < n; ++i) d2 += (oracle[a][i] - oracle[b][i]) * (oracle[a][i] - oracle[b][i]);
      rep.trajectory_diameter = std::max(rep.trajectory_diameter, std::sqrt(d2));
    }
  rep.relative_deviation =
      rep.trajectory_diameter > 0 ? rep.max_deviation / rep.trajectory_diameter : std::numeric_limits<double>::infinity();
  rep.mean_drift.resize(n);
  rep.oracle_drift.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rep.mean_drift[i] = (es.x[m - 1][i] - q0[i]) / horizon;
    rep.oracle_drift[i] = (oracle[m - 1][i] - q0[i]) / horizon;
  }
  return rep;
}

}  // namespace esdrl
