#pragma once

#include <array>
#include <cstddef>

namespace esdrl {

// Fixed-size state vector used by the fixed-step integrators.
template <std::size_t N>
using ode_state = std::array<double, N>;

template <std::size_t N>
constexpr ode_state<N> axpy(const ode_state<N>& y, double a, const ode_state<N>& x) {
  ode_state<N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + a * x[i];
  return out;
}

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <std::size_t N, class Rhs>
ode_state<N> rk4_step(const ode_state<N>& y, double t, double h, Rhs&& f) {
  const ode_state<N> k1 = f(t, y);
  const ode_state<N> k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
  const ode_state<N> k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
  const ode_state<N> k4 = f(t + h, axpy(y, h, k3));
  ode_state<N> out{};
  for (std::size_t i = 0; i < N; ++i)
    out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

/// Integrates y' = f(t, y) from t0 over `steps` fixed steps of size h and
/// calls observer(step_index, t, y) at every node including the first.
/// The observer may return false to stop early.
template <std::size_t N, class Rhs, class Observer>
ode_state<N> rk4_integrate(ode_state<N> y, double t0, double h, std::size_t steps, Rhs&& f,
                           Observer&& observer) {
  double t = t0;
  if (!observer(std::size_t{0}, t, y)) return y;
  for (std::size_t k = 0; k < steps; ++k) {
    y = rk4_step(y, t, h, f);
    t = t0 + static_cast<double>(k + 1) * h;
    if (!observer(k + 1, t, y)) break;
  }
  return y;
}

}  // namespace esdrl
