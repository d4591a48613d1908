#pragma once

// Kapchinskij-Vladimirskij envelope integration along a quadrupole beamline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdrl/ode.hpp"

namespace esdrl {

struct MagnetSpec {
  int index = 0;                // 1-based position in beamline order
  double z_start = 0.0;         // m
  double length = 0.0;          // m
  int polarity = 1;             // +1 focuses X, -1 focuses Y
  double nominal_strength = 0;  // T/m
};

struct Lattice {
  std::vector<MagnetSpec> magnets;
  double z_max = 11.70;     // m
  int grid_points = 4000;   // number of integration intervals
  double emittance_x = 0;   // m rad
  double emittance_y = 0;   // m rad
  double perveance = 0;     // generalized perveance K
  double rigidity = 0;      // B rho, T m
  double pipe_radius = 0.0254;

  double dz() const { return z_max / static_cast<double>(grid_points); }
  std::size_t size() const { return magnets.size(); }

  std::vector<double> nominal_strengths() const {
    std::vector<double> out;
    out.reserve(magnets.size());
    for (const auto& m : magnets) out.push_back(m.nominal_strength);
    return out;
  }

  /// Geometry only: ordering, positive lengths, disjoint intervals inside [0, z_max].
  void check_geometry() const;

  /// Geometry plus physics constants. Used on everything loaded from disk.
  void validate() const;
};

struct BeamInit {
  double X0 = 0;
  double Y0 = 0;
  double Xp0 = 0;
  double Yp0 = 0;
};

struct EnvelopeTrajectory {
  std::vector<double> z, X, Y, Xp, Yp;
  bool feasible = false;
  // Position at which the integration was declared infeasible (NaN if feasible).
  double failure_z = std::numeric_limits<double>::quiet_NaN();

  std::size_t nodes() const { return z.size(); }
};

/// Thrown by kv_rhs when an envelope radius is at or below the collapse floor.
class EnvelopeCollapse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kEnvelopeFloor = 1e-6;  // m

using KvState = ode_state<4>;  // X, Y, X', Y'

inline void Lattice::check_geometry() const {
  if (!(z_max > 0)) throw std::invalid_argument("lattice: z_max must be positive");
  if (grid_points < 1) throw std::invalid_argument("lattice: grid_points must be >= 1");
  for (std::size_t i = 0; i < magnets.size(); ++i) {
    const auto& m = magnets[i];
    std::ostringstream who;
    who << "magnet " << m.index;
    if (m.index != static_cast<int>(i) + 1)
      throw std::invalid_argument("lattice: " + who.str() + " is out of order (expected index " +
                                  std::to_string(i + 1) + ")");
    if (!(m.length > 0)) throw std::invalid_argument("lattice: " + who.str() + " has non-positive length");
    if (m.polarity != 1 && m.polarity != -1)
      throw std::invalid_argument("lattice: " + who.str() + " polarity must be +1 or -1");
    if (m.z_start < 0 || m.z_start + m.length > z_max)
      throw std::invalid_argument("lattice: " + who.str() + " lies outside [0, z_max]");
    if (i > 0) {
      const auto& prev = magnets[i - 1];
      if (!(prev.z_start + prev.length < m.z_start)) {
        std::ostringstream msg;
        msg << "lattice: magnets " << prev.index << " and " << m.index << " overlap";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

inline void Lattice::validate() const {
  check_geometry();
  if (!(emittance_x > 0) || !(emittance_y > 0))
    throw std::invalid_argument("lattice: emittances must be positive");
  if (!(rigidity > 0)) throw std::invalid_argument("lattice: rigidity must be positive");
  if (!(perveance >= 0)) throw std::invalid_argument("lattice: perveance must be non-negative");
  if (!(pipe_radius > 0)) throw std::invalid_argument("lattice: pipe_radius must be positive");
}

/// G(z; u) = sum_i u_i sigma_i 1[z_i, z_i + l_i](z), in T/m.
inline double focusing_profile(const Lattice& lattice, std::span<const double> u, double z) {
  if (u.size() != lattice.magnets.size())
    throw std::invalid_argument("focusing_profile: strength vector size does not match lattice");
  for (std::size_t i = 0; i < lattice.magnets.size(); ++i) {
    const auto& m = lattice.magnets[i];
    if (z >= m.z_start && z <= m.z_start + m.length) return u[i] * static_cast<double>(m.polarity);
  }
  return 0.0;
}

namespace detail {

inline KvState kv_rhs_unchecked(const KvState& s, double kappa, const Lattice& lat) {
  const double X = s[0], Y = s[1];
  const double space_charge = lat.perveance / (X + Y);
  const double ex2 = lat.emittance_x * lat.emittance_x;
  const double ey2 = lat.emittance_y * lat.emittance_y;
  return {s[2], s[3], -kappa * X + ex2 / (X * X * X) + space_charge,
          kappa * Y + ey2 / (Y * Y * Y) + space_charge};
}

inline bool state_ok(const KvState& s) {
  for (double v : s)
    if (!std::isfinite(v)) return false;
  return s[0] > kEnvelopeFloor && s[1] > kEnvelopeFloor;
}

}  // namespace detail

/// Right-hand side of the envelope equations. kappa = G / (B rho).
inline KvState kv_rhs(const KvState& state, double kappa, const Lattice& lattice) {
  if (!(state[0] > kEnvelopeFloor) || !(state[1] > kEnvelopeFloor))
    throw EnvelopeCollapse("kv_rhs: envelope at or below collapse floor");
  return detail::kv_rhs_unchecked(state, kappa, lattice);
}

/// Focusing strength per integration step, sampled at each step midpoint.
/// Magnet edges are therefore effectively snapped to grid nodes.
inline std::vector<double> step_kappas(const Lattice& lattice, std::span<const double> u) {
  const std::size_t n = static_cast<std::size_t>(lattice.grid_points);
  const double h = lattice.dz();
  std::vector<double> kappa(n, 0.0);
  for (std::size_t i = 0; i < lattice.magnets.size(); ++i) {
    const auto& m = lattice.magnets[i];
    const double g = u[i] * static_cast<double>(m.polarity) / lattice.rigidity;
    // Only steps whose midpoint can fall inside the magnet.
    const double first = std::floor(m.z_start / h - 0.5);
    const double last = std::ceil((m.z_start + m.length) / h);
    const std::size_t k0 = first < 0 ? 0 : static_cast<std::size_t>(first);
    const std::size_t k1 = std::min(n, static_cast<std::size_t>(std::max(0.0, last)) + 1);
    for (std::size_t k = k0; k < k1; ++k) {
      const double zm = (static_cast<double>(k) + 0.5) * h;
      if (zm >= m.z_start && zm <= m.z_start + m.length) kappa[k] = g;
    }
  }
  return kappa;
}

/// Fixed-step RK4 from z = 0 to z_max. Infeasibility is reported through
/// the `feasible` flag, never thrown.
inline EnvelopeTrajectory integrate(const Lattice& lattice, std::span<const double> u,
                                    const BeamInit& init) {
  lattice.check_geometry();
  if (u.size() != lattice.magnets.size())
    throw std::invalid_argument("integrate: strength vector size does not match lattice");
  if (!(init.X0 > 0) || !(init.Y0 > 0))
    throw std::invalid_argument("integrate: initial envelope radii must be positive");

  const std::size_t n = static_cast<std::size_t>(lattice.grid_points);
  const double h = lattice.dz();
  const std::vector<double> kappa = step_kappas(lattice, u);

  EnvelopeTrajectory traj;
  traj.z.resize(n + 1);
  traj.X.resize(n + 1);
  traj.Y.resize(n + 1);
  traj.Xp.resize(n + 1);
  traj.Yp.resize(n + 1);

  KvState s{init.X0, init.Y0, init.Xp0, init.Yp0};
  bool ok = detail::state_ok(s);
  std::size_t k = 0;
  auto store = [&](std::size_t idx, const KvState& v) {
    traj.z[idx] = static_cast<double>(idx) * h;
    traj.X[idx] = v[0];
    traj.Y[idx] = v[1];
    traj.Xp[idx] = v[2];
    traj.Yp[idx] = v[3];
  };
  if (ok) store(0, s);
  for (; ok && k < n; ++k) {
    const double kap = kappa[k];
    auto rhs = [&](double, const KvState& y) -> KvState {
      if (!detail::state_ok(y)) {
        ok = false;
        return KvState{};
      }
      return detail::kv_rhs_unchecked(y, kap, lattice);
    };
    s = rk4_step(s, static_cast<double>(k) * h, h, rhs);
    if (!ok || !detail::state_ok(s)) {
      ok = false;
      break;
    }
    store(k + 1, s);
  }

  if (!ok) {
    traj = EnvelopeTrajectory{};
    traj.feasible = false;
    traj.failure_z = static_cast<double>(k) * h;
    return traj;
  }
  traj.z[n] = lattice.z_max;
  traj.feasible = true;
  return traj;
}

/// Flattened [X, Y, X', Y'] over the first N grid nodes.
inline std::vector<double> observe(const EnvelopeTrajectory& traj) {
  if (!traj.feasible) throw std::invalid_argument("observe: trajectory is infeasible");
  const std::size_t n = traj.nodes() - 1;
  std::vector<double> out;
  out.reserve(4 * n);
  for (const auto* channel : {&traj.X, &traj.Y, &traj.Xp, &traj.Yp})
    out.insert(out.end(), channel->begin(), channel->begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

/// Mirror image of a lattice: polarities flipped and emittances swapped.
inline Lattice mirrored(Lattice lattice) {
  std::swap(lattice.emittance_x, lattice.emittance_y);
  for (auto& m : lattice.magnets) m.polarity = -m.polarity;
  return lattice;
}

}  // namespace esdrl
