#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "esdrl/kv_sim.hpp"

namespace esdrl::testing {

inline std::filesystem::path source_dir() { return ESDRL_SOURCE_DIR; }

/// Empty beamline of length z_max with N intervals.
inline Lattice drift_lattice(double z_max, int n, double eps, double perveance = 0.0) {
  Lattice lat;
  lat.z_max = z_max;
  lat.grid_points = n;
  lat.emittance_x = lat.emittance_y = eps;
  lat.perveance = perveance;
  lat.rigidity = 0.125;
  return lat;
}

/// Evenly spaced alternating-polarity doublets, small enough for fast tests.
inline Lattice small_fodo(int magnets = 6, int grid = 600) {
  Lattice lat;
  lat.z_max = 0.5 * magnets + 0.2;
  lat.grid_points = grid;
  lat.emittance_x = lat.emittance_y = 8e-6;
  lat.perveance = 4e-5;
  lat.rigidity = 0.125;
  for (int i = 0; i < magnets; ++i) {
    MagnetSpec m;
    m.index = i + 1;
    m.z_start = 0.25 + 0.5 * i;
    m.length = 0.066;
    m.polarity = i % 2 == 0 ? 1 : -1;
    m.nominal_strength = 3.0;
    lat.magnets.push_back(m);
  }
  return lat;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("esdrl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace esdrl::testing
