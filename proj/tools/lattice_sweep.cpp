// Sweeps emittance, perveance and a uniform gradient over a lattice file and
// prints the nominal path averages and reward for each combination. The last
// column is the largest path average seen when the default perturbation
// schedule drives magnets 1 and 10 with every other magnet held at nominal.
//
//   lattice-sweep configs/lattice_default.yaml --eps 3e-6,8e-6 --perveance 2.5e-5,4e-5 --schedule-worst

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esdrl/experiments.hpp"
#include "esdrl/io/config.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/reward.hpp"

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stod(item));
  return out;
}

// Worst max(X_bar, Y_bar) over the schedule, in metres; infinity if any step fails.
double schedule_worst(const esdrl::Lattice& lat, std::vector<double> u, const esdrl::BeamInit& init) {
  const esdrl::PerturbationSchedule sched;
  double worst = 0;
  for (long t = 0; t <= sched.horizon; ++t) {
    const auto v = esdrl::schedule_eval(sched, t);
    u[sched.driven_a] = v.q_a;
    u[sched.driven_b] = v.q_b;
    const auto tr = esdrl::integrate(esdrl::shifted_lattice(lat, sched.shifted_magnet, v.delta_L), u, init);
    if (!tr.feasible) return std::numeric_limits<double>::infinity();
    const auto avg = esdrl::path_averages(tr);
    worst = std::max({worst, avg.X, avg.Y});
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nominal-lattice sweep over physics constants"};
  std::string lattice_path, eps_s = "8e-6", k_s = "4e-5", g_s = "3";
  double x0 = 3e-3, y0 = 3e-3;
  bool worst = false;
  bool keep_drives = true;
  app.add_option("lattice", lattice_path, "lattice YAML file")->required()->check(CLI::ExistingFile);
  app.add_option("--eps", eps_s, "comma-separated emittances (both planes)");
  app.add_option("--perveance", k_s, "comma-separated perveances");
  app.add_option("--gradient", g_s, "comma-separated uniform gradients, T/m");
  app.add_option("--X0", x0);
  app.add_option("--Y0", y0);
  app.add_flag("--schedule-worst", worst, "add the worst path average under the perturbation schedule");
  app.add_flag("!--no-drives", keep_drives, "also overwrite the magnet 1 and 10 setpoints");
  CLI11_PARSE(app, argc, argv);

  esdrl::Lattice base;
  try {
    base = esdrl::io::load_lattice(lattice_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  const esdrl::RewardConfig rc;
  const esdrl::BeamInit init{x0, y0, 0, 0};
  std::printf("eps,perveance,gradient,feasible,X_bar_mm,Y_bar_mm,P_env,P_smooth,P_term,R%s\n", worst ? ",worst_bar_mm" : "");
  for (double eps : parse_list(eps_s))
    for (double K : parse_list(k_s))
      for (double G : parse_list(g_s)) {
        esdrl::Lattice lat = base;
        lat.emittance_x = lat.emittance_y = eps;
        lat.perveance = K;
        std::vector<double> u = lat.nominal_strengths();
        for (std::size_t i = 0; i < u.size(); ++i)
          if (!keep_drives || (i != 0 && i != 9)) u[i] = G;
        const auto tr = esdrl::integrate(lat, u, init);
        if (!tr.feasible) {
          std::printf("%g,%g,%g,0,,,,,,%g%s\n", eps, K, G, esdrl::failure_reward(rc), worst ? "," : "");
          continue;
        }
        const auto avg = esdrl::path_averages(tr);
        const auto b = esdrl::penalty(tr, rc);
        std::printf("%g,%g,%g,1,%.3f,%.3f,%.4g,%.4g,%.4g,%.4f", eps, K, G, avg.X * 1e3, avg.Y * 1e3, b.P_env,
                    b.P_smooth, b.P_term, b.R);
        if (worst) std::printf(",%.3f", schedule_worst(lat, u, init) * 1e3);
        std::printf("\n");
      }
  return 0;
}
