#pragma once

// YAML configuration: lattice files, the run configuration, dotted-path
// overrides, and emission back to YAML for manifests.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "esdrl/ddpg.hpp"
#include "esdrl/es_control.hpp"
#include "esdrl/experiments.hpp"
#include "esdrl/hybrid.hpp"
#include "esdrl/kv_env.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/reward.hpp"
#include "esdrl/train.hpp"

namespace esdrl::io {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
T req(const YAML::Node& n, const std::string& key, const std::string& where) {
  if (!n[key]) throw ConfigError(where + ": missing required field '" + key + "'");
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T opt(const YAML::Node& n, const std::string& key, const T& fallback, const std::string& where) {
  if (!n || !n[key]) return fallback;
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

/// Doubles printed with 17 significant digits so the YAML round-trips exactly.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline YAML::Node num_node(double v) { return YAML::Node(num(v)); }

inline YAML::Node num_list(const std::vector<double>& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (double x : v) n.push_back(num_node(x));
  return n;
}

inline YAML::Node profile_node(const Profile& p) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (const auto& [t, v] : p.knots) {
    YAML::Node k(YAML::NodeType::Sequence);
    k.push_back(num_node(t));
    k.push_back(num_node(v));
    k.SetStyle(YAML::EmitterStyle::Flow);
    n.push_back(k);
  }
  return n;
}

inline Profile profile_from(const YAML::Node& n, const Profile& fallback, const std::string& where) {
  if (!n) return fallback;
  Profile p;
  for (const auto& k : n) {
    if (!k.IsSequence() || k.size() != 2) throw ConfigError(where + ": each knot must be [t, value]");
    p.knots.emplace_back(k[0].as<double>(), k[1].as<double>());
  }
  p.validate(where);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lattice files

inline Lattice lattice_from_yaml(const YAML::Node& n, const std::string& where = "lattice") {
  using detail::req;
  Lattice lat;
  lat.z_max = detail::opt<double>(n, "z_max", lat.z_max, where);
  lat.grid_points = detail::opt<int>(n, "grid_points", lat.grid_points, where);
  lat.emittance_x = req<double>(n, "emittance_x", where);
  lat.emittance_y = req<double>(n, "emittance_y", where);
  lat.perveance = req<double>(n, "perveance", where);
  lat.rigidity = req<double>(n, "rigidity", where);
  lat.pipe_radius = detail::opt<double>(n, "pipe_radius", lat.pipe_radius, where);
  if (!n["magnets"] || !n["magnets"].IsSequence()) throw ConfigError(where + ": 'magnets' must be a list");
  for (const auto& m : n["magnets"]) {
    MagnetSpec s;
    const std::string w = where + ".magnets[" + std::to_string(lat.magnets.size()) + "]";
    s.index = req<int>(m, "index", w);
    s.z_start = req<double>(m, "z_start", w);
    s.length = req<double>(m, "length", w);
    s.polarity = req<int>(m, "polarity", w);
    s.nominal_strength = req<double>(m, "nominal_strength", w);
    lat.magnets.push_back(s);
  }
  if (lat.grid_points <= 0) throw ConfigError(where + ": grid_points must be positive");
  try {
    lat.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return lat;
}

inline YAML::Node lattice_to_yaml(const Lattice& lat) {
  using detail::num_node;
  YAML::Node n;
  n["z_max"] = num_node(lat.z_max);
  n["grid_points"] = lat.grid_points;
  n["emittance_x"] = num_node(lat.emittance_x);
  n["emittance_y"] = num_node(lat.emittance_y);
  n["perveance"] = num_node(lat.perveance);
  n["rigidity"] = num_node(lat.rigidity);
  n["pipe_radius"] = num_node(lat.pipe_radius);
  YAML::Node mags(YAML::NodeType::Sequence);
  for (const auto& m : lat.magnets) {
    YAML::Node e;
    e["index"] = m.index;
    e["z_start"] = num_node(m.z_start);
    e["length"] = num_node(m.length);
    e["polarity"] = m.polarity;
    e["nominal_strength"] = num_node(m.nominal_strength);
    e.SetStyle(YAML::EmitterStyle::Flow);
    mags.push_back(e);
  }
  n["magnets"] = mags;
  return n;
}

inline YAML::Node load_yaml_file(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read " + path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Lattice load_lattice(const std::string& path) { return lattice_from_yaml(load_yaml_file(path), path); }

// ---------------------------------------------------------------------------
// Run configuration

struct TrainingConfig {
  ddpg::Hyperparameters hp;
  double action_limit_fraction = 0.5;  // |offset_i| <= fraction * |Q_i(0)|
  std::size_t obs_stride = 1;
  double position_scale = 100.0;  // network input = X * position_scale
  double slope_scale = 10.0;      // network input = X' * slope_scale
  std::size_t horizon = 50;
  std::vector<std::size_t> groups{4, 3, 3, 3, 3, 3, 3};
  ddpg::PhaseBudget phase1{500, 2000}, phase2{500, 2000}, phase3{500, 2000};
  std::size_t saturation_window = 50;
  double saturation_threshold = 0.01;
  std::size_t failure_window = 100;
  double failure_abort_fraction = 0.5;
  InitRanges init_ranges;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::string lattice_file;  // as written in the config (informational once loaded)
  Lattice lattice;
  BeamInit beam;
  RewardConfig reward;
  EsConfig es;
  SupervisorConfig supervisor;
  bool warm_start = true;
  int force_beta = -1;
  TrainingConfig training;
  PerturbationSchedule schedule;
  std::vector<std::pair<std::string, std::pair<long, long>>> windows{
      {"all", {0, 500}}, {"perturbed", {100, 400}}, {"plateau", {200, 300}}};
  Study1DConfig study1d = default_study_1d();

  void validate() const {
    try {
      lattice.validate();
      reward.validate();
      es.validate(lattice.size());
      supervisor.validate();
      schedule.validate();
      if (!(beam.X0 > 0 && beam.Y0 > 0)) throw std::invalid_argument("beam: X0 and Y0 must be positive");
      if (!(training.action_limit_fraction > 0)) throw std::invalid_argument("training: action_limit_fraction must be positive");
      if (training.obs_stride == 0) throw std::invalid_argument("training: obs_stride must be >= 1");
      ddpg::contiguous_groups(training.groups, lattice.size());
      if (schedule.driven_a >= lattice.size() || schedule.driven_b >= lattice.size() || schedule.shifted_magnet >= lattice.size())
        throw std::invalid_argument("schedule: magnet index out of range for this lattice");
      if (force_beta < -1 || force_beta > 1) throw std::invalid_argument("hybrid: force_beta must be -1, 0 or 1");
      if (reward.failure_penalty == 0)
        std::fprintf(stderr, "warning: reward.failure_penalty = 0 makes failure as good as a perfect beam\n");
      study1d.es.validate(1);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<double> action_limits() const {
    std::vector<double> lim;
    for (const auto& m : lattice.magnets) lim.push_back(training.action_limit_fraction * std::abs(m.nominal_strength));
    return lim;
  }

  KvEnvConfig env_config() const {
    KvEnvConfig c;
    c.lattice = lattice;
    c.reward = reward;
    c.init = beam;
    c.init_ranges = training.init_ranges;
    return c;
  }

  ddpg::InputTransform input_transform() const {
    return ddpg::InputTransform::envelope(static_cast<std::size_t>(lattice.grid_points), training.obs_stride,
                                          training.position_scale, training.slope_scale);
  }

  ddpg::CurriculumPlan curriculum() const {
    auto plan = ddpg::kv_curriculum(training.groups, lattice.size(), training.phase1, training.phase2, training.phase3);
    plan.saturation_window = training.saturation_window;
    plan.saturation_threshold = training.saturation_threshold;
    return plan;
  }

  HybridConfig hybrid_config() const {
    HybridConfig h;
    h.supervisor = supervisor;
    h.es = es;
    h.reward = reward;
    h.warm_start = warm_start;
    h.force_beta = force_beta;
    return h;
  }

  ComparisonConfig comparison_config() const {
    ComparisonConfig c;
    c.lattice = lattice;
    c.reward = reward;
    c.init = beam;
    c.schedule = schedule;
    c.hybrid = hybrid_config();
    return c;
  }
};

namespace detail {

inline ddpg::PhaseBudget budget_from(const YAML::Node& n, ddpg::PhaseBudget d, const std::string& w) {
  if (!n) return d;
  d.min_episodes = opt<std::size_t>(n, "min_episodes", d.min_episodes, w);
  d.max_episodes = opt<std::size_t>(n, "max_episodes", d.max_episodes, w);
  return d;
}

inline YAML::Node budget_node(const ddpg::PhaseBudget& b) {
  YAML::Node n;
  n["min_episodes"] = b.min_episodes;
  n["max_episodes"] = b.max_episodes;
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

inline ddpg::Hyperparameters hp_from(const YAML::Node& n, ddpg::Hyperparameters hp, const std::string& w) {
  if (!n) return hp;
  hp.gamma = opt(n, "gamma", hp.gamma, w);
  hp.tau = opt(n, "tau", hp.tau, w);
  hp.actor_lr = opt(n, "actor_lr", hp.actor_lr, w);
  hp.critic_lr = opt(n, "critic_lr", hp.critic_lr, w);
  hp.noise_sigma = opt(n, "noise_sigma", hp.noise_sigma, w);
  hp.batch = opt(n, "batch", hp.batch, w);
  hp.replay_capacity = opt(n, "replay_capacity", hp.replay_capacity, w);
  hp.warmup_batches = opt(n, "warmup_batches", hp.warmup_batches, w);
  hp.actor_hidden = opt(n, "actor_hidden", hp.actor_hidden, w);
  hp.critic_hidden = opt(n, "critic_hidden", hp.critic_hidden, w);
  hp.actor_final_init = opt(n, "actor_final_init", hp.actor_final_init, w);
  hp.critic_final_init = opt(n, "critic_final_init", hp.critic_final_init, w);
  return hp;
}

inline YAML::Node hp_node(const ddpg::Hyperparameters& hp) {
  YAML::Node n;
  n["gamma"] = num_node(hp.gamma);
  n["tau"] = num_node(hp.tau);
  n["actor_lr"] = num_node(hp.actor_lr);
  n["critic_lr"] = num_node(hp.critic_lr);
  n["noise_sigma"] = num_node(hp.noise_sigma);
  n["batch"] = hp.batch;
  n["replay_capacity"] = hp.replay_capacity;
  n["warmup_batches"] = hp.warmup_batches;
  n["actor_hidden"] = hp.actor_hidden;
  n["actor_hidden"].SetStyle(YAML::EmitterStyle::Flow);
  n["critic_hidden"] = hp.critic_hidden;
  n["critic_hidden"].SetStyle(YAML::EmitterStyle::Flow);
  n["actor_final_init"] = num_node(hp.actor_final_init);
  n["critic_final_init"] = num_node(hp.critic_final_init);
  return n;
}

inline EsConfig es_from(const YAML::Node& n, EsConfig es, const std::string& w) {
  if (!n) return es;
  es.alpha = opt(n, "alpha", es.alpha, w);
  es.omega_base = opt(n, "omega_base", es.omega_base, w);
  es.ratios = opt(n, "ratios", es.ratios, w);
  es.gain_k = opt(n, "gain_k", es.gain_k, w);
  es.dt = opt(n, "dt", es.dt, w);
  es.maximize = opt(n, "maximize", es.maximize, w);
  return es;
}

inline YAML::Node es_node(const EsConfig& es) {
  YAML::Node n;
  n["alpha"] = num_node(es.alpha);
  n["omega_base"] = num_node(es.omega_base);
  n["ratios"] = num_list(es.ratios);
  n["ratios"].SetStyle(YAML::EmitterStyle::Flow);
  n["gain_k"] = num_node(es.gain_k);
  n["dt"] = num_node(es.dt);
  n["maximize"] = es.maximize;
  return n;
}

}  // namespace detail

/// `base_dir` resolves a relative lattice_file.
inline RunConfig run_config_from_yaml(const YAML::Node& root, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  RunConfig c;
  c.seed = opt<std::uint64_t>(root, "seed", c.seed, "config");
  c.output_dir = opt<std::string>(root, "output_dir", c.output_dir, "config");
  // An inline `lattice` section overlays the file named by `lattice_file`
  // key by key, so single constants can be overridden from the command line.
  YAML::Node lat_node;
  if (root["lattice_file"]) {
    c.lattice_file = root["lattice_file"].as<std::string>();
    std::filesystem::path p(c.lattice_file);
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) throw ConfigError("lattice_file does not exist: " + p.string());
    lat_node = load_yaml_file(p.string());
  } else {
    c.lattice_file = opt<std::string>(root, "lattice_source", "", "config");
  }
  if (const YAML::Node inline_lat = root["lattice"]) {
    if (!inline_lat.IsMap()) throw ConfigError("config: 'lattice' must be a mapping");
    if (!lat_node) lat_node = YAML::Node(YAML::NodeType::Map);
    for (const auto& kv : inline_lat) lat_node[kv.first.as<std::string>()] = kv.second;
  }
  if (!lat_node) throw ConfigError("config: needs 'lattice_file' or an inline 'lattice' section");
  c.lattice = lattice_from_yaml(lat_node, "lattice");

  const YAML::Node beam = root["beam"];
  if (!beam) throw ConfigError("config: missing 'beam' section");
  c.beam.X0 = req<double>(beam, "X0", "beam");
  c.beam.Y0 = req<double>(beam, "Y0", "beam");
  c.beam.Xp0 = req<double>(beam, "Xp0", "beam");
  c.beam.Yp0 = req<double>(beam, "Yp0", "beam");

  const YAML::Node rw = root["reward"];
  if (!rw) throw ConfigError("config: missing 'reward' section");
  c.reward.r_max = opt(rw, "r_max", c.reward.r_max, "reward");
  c.reward.w_e = req<double>(rw, "w_e", "reward");
  c.reward.w_s = req<double>(rw, "w_s", "reward");
  c.reward.w_r = req<double>(rw, "w_r", "reward");
  c.reward.w_w = req<double>(rw, "w_w", "reward");
  c.reward.w_t = req<double>(rw, "w_t", "reward");
  c.reward.failure_penalty = opt(rw, "failure_penalty", c.reward.failure_penalty, "reward");

  c.es = es_from(root["es"], c.es, "es");

  if (const YAML::Node sv = root["supervisor"]) {
    c.supervisor.safety_fraction = opt(sv, "safety_fraction", c.supervisor.safety_fraction, "supervisor");
    c.supervisor.r_max = opt(sv, "r_max", c.reward.r_max, "supervisor");
    const auto rule = opt<std::string>(sv, "rule", "and", "supervisor");
    if (rule == "and") c.supervisor.rule = CombineRule::both_inside;
    else if (rule == "or") c.supervisor.rule = CombineRule::either_inside;
    else throw ConfigError("supervisor.rule must be 'and' or 'or'");
    c.supervisor.dwell_steps = opt(sv, "dwell_steps", c.supervisor.dwell_steps, "supervisor");
  } else {
    c.supervisor.r_max = c.reward.r_max;
  }
  if (const YAML::Node hy = root["hybrid"]) {
    c.warm_start = opt(hy, "warm_start", c.warm_start, "hybrid");
    c.force_beta = opt(hy, "force_beta", c.force_beta, "hybrid");
  }

  if (const YAML::Node tr = root["training"]) {
    auto& t = c.training;
    t.hp = hp_from(tr["ddpg"], t.hp, "training.ddpg");
    t.action_limit_fraction = opt(tr, "action_limit_fraction", t.action_limit_fraction, "training");
    t.obs_stride = opt(tr, "obs_stride", t.obs_stride, "training");
    t.position_scale = opt(tr, "position_scale", t.position_scale, "training");
    t.slope_scale = opt(tr, "slope_scale", t.slope_scale, "training");
    t.horizon = opt(tr, "horizon", t.horizon, "training");
    t.groups = opt(tr, "groups", t.groups, "training");
    t.phase1 = budget_from(tr["phase1"], t.phase1, "training.phase1");
    t.phase2 = budget_from(tr["phase2"], t.phase2, "training.phase2");
    t.phase3 = budget_from(tr["phase3"], t.phase3, "training.phase3");
    t.saturation_window = opt(tr, "saturation_window", t.saturation_window, "training");
    t.saturation_threshold = opt(tr, "saturation_threshold", t.saturation_threshold, "training");
    t.failure_window = opt(tr, "failure_window", t.failure_window, "training");
    t.failure_abort_fraction = opt(tr, "failure_abort_fraction", t.failure_abort_fraction, "training");
    if (const YAML::Node ir = tr["init_ranges"]) {
      t.init_ranges.radius_lo = opt(ir, "radius_lo", t.init_ranges.radius_lo, "training.init_ranges");
      t.init_ranges.radius_hi = opt(ir, "radius_hi", t.init_ranges.radius_hi, "training.init_ranges");
      t.init_ranges.slope_lo = opt(ir, "slope_lo", t.init_ranges.slope_lo, "training.init_ranges");
      t.init_ranges.slope_hi = opt(ir, "slope_hi", t.init_ranges.slope_hi, "training.init_ranges");
    }
  }

  if (const YAML::Node sc = root["schedule"]) {
    auto& s = c.schedule;
    const auto driven = opt<std::vector<std::size_t>>(sc, "driven", {s.driven_a + 1, s.driven_b + 1}, "schedule");
    if (driven.size() != 2 || driven[0] == 0 || driven[1] == 0 || driven[0] == driven[1])
      throw ConfigError("schedule.driven must list two distinct 1-based magnet indices");
    s.driven_a = driven[0] - 1;
    s.driven_b = driven[1] - 1;
    s.q_a_star = opt(sc, "q_star_a", s.q_a_star, "schedule");
    s.q_b_star = opt(sc, "q_star_b", s.q_b_star, "schedule");
    s.nu = opt(sc, "nu", s.nu, "schedule");
    s.amplitude = profile_from(sc["amplitude"], s.amplitude, "schedule.amplitude");
    s.drift = profile_from(sc["drift"], s.drift, "schedule.drift");
    const auto shifted = opt<std::size_t>(sc, "shifted_magnet", s.shifted_magnet + 1, "schedule");
    if (shifted == 0) throw ConfigError("schedule.shifted_magnet is 1-based");
    s.shifted_magnet = shifted - 1;
    s.horizon = opt(sc, "horizon", s.horizon, "schedule");
  }
  if (const YAML::Node w = root["windows"]) {
    c.windows.clear();
    for (const auto& kv : w) {
      const auto v = kv.second.as<std::vector<long>>();
      if (v.size() != 2 || v[0] > v[1]) throw ConfigError("windows." + kv.first.as<std::string>() + " must be [t0, t1]");
      c.windows.emplace_back(kv.first.as<std::string>(), std::make_pair(v[0], v[1]));
    }
  }

  if (const YAML::Node st = root["study1d"]) {
    auto& s = c.study1d;
    s.plant.a = opt(st, "a", s.plant.a, "study1d");
    s.plant.b0 = opt(st, "b0", s.plant.b0, "study1d");
    s.f_low = opt(st, "f_low", s.f_low, "study1d");
    s.f_high = opt(st, "f_high", s.f_high, "study1d");
    s.x0 = opt(st, "x0", s.x0, "study1d");
    s.horizon = opt(st, "horizon", s.horizon, "study1d");
    s.h = opt(st, "h", s.h, "study1d");
    s.record_every = opt(st, "record_every", s.record_every, "study1d");
    s.ceiling = opt(st, "ceiling", s.ceiling, "study1d");
    s.es = es_from(st["es"], s.es, "study1d.es");
    s.env.control_dt = opt(st, "control_dt", s.env.control_dt, "study1d");
    s.env.x0_range = opt(st, "train_x0_range", s.env.x0_range, "study1d");
    s.env.ceiling = opt(st, "train_ceiling", s.env.ceiling, "study1d");
    s.env.h = s.h;
    s.hp = hp_from(st["ddpg"], s.hp, "study1d.ddpg");
    s.episodes = opt(st, "episodes", s.episodes, "study1d");
    s.horizon_steps = opt(st, "horizon_steps", s.horizon_steps, "study1d");
    s.u_max = opt(st, "u_max", s.u_max, "study1d");
    s.seed = opt(st, "seed", s.seed, "study1d");
  }
  c.validate();
  return c;
}

inline YAML::Node run_config_to_yaml(const RunConfig& c) {
  using namespace detail;
  YAML::Node n;
  n["seed"] = c.seed;
  n["output_dir"] = c.output_dir;
  if (!c.lattice_file.empty()) n["lattice_source"] = c.lattice_file;  // informational; the lattice is inline
  n["lattice"] = lattice_to_yaml(c.lattice);
  YAML::Node beam;
  beam["X0"] = num_node(c.beam.X0);
  beam["Y0"] = num_node(c.beam.Y0);
  beam["Xp0"] = num_node(c.beam.Xp0);
  beam["Yp0"] = num_node(c.beam.Yp0);
  n["beam"] = beam;
  YAML::Node rw;
  rw["r_max"] = num_node(c.reward.r_max);
  rw["w_e"] = num_node(c.reward.w_e);
  rw["w_s"] = num_node(c.reward.w_s);
  rw["w_r"] = num_node(c.reward.w_r);
  rw["w_w"] = num_node(c.reward.w_w);
  rw["w_t"] = num_node(c.reward.w_t);
  rw["failure_penalty"] = num_node(c.reward.failure_penalty);
  n["reward"] = rw;
  n["es"] = es_node(c.es);
  YAML::Node sv;
  sv["safety_fraction"] = num_node(c.supervisor.safety_fraction);
  sv["r_max"] = num_node(c.supervisor.r_max);
  sv["rule"] = c.supervisor.rule == CombineRule::both_inside ? "and" : "or";
  sv["dwell_steps"] = c.supervisor.dwell_steps;
  n["supervisor"] = sv;
  YAML::Node hy;
  hy["warm_start"] = c.warm_start;
  hy["force_beta"] = c.force_beta;
  n["hybrid"] = hy;

  const auto& t = c.training;
  YAML::Node tr;
  tr["ddpg"] = hp_node(t.hp);
  tr["action_limit_fraction"] = num_node(t.action_limit_fraction);
  tr["obs_stride"] = t.obs_stride;
  tr["position_scale"] = num_node(t.position_scale);
  tr["slope_scale"] = num_node(t.slope_scale);
  tr["horizon"] = t.horizon;
  tr["groups"] = t.groups;
  tr["groups"].SetStyle(YAML::EmitterStyle::Flow);
  tr["phase1"] = budget_node(t.phase1);
  tr["phase2"] = budget_node(t.phase2);
  tr["phase3"] = budget_node(t.phase3);
  tr["saturation_window"] = t.saturation_window;
  tr["saturation_threshold"] = num_node(t.saturation_threshold);
  tr["failure_window"] = t.failure_window;
  tr["failure_abort_fraction"] = num_node(t.failure_abort_fraction);
  YAML::Node ir;
  ir["radius_lo"] = num_node(t.init_ranges.radius_lo);
  ir["radius_hi"] = num_node(t.init_ranges.radius_hi);
  ir["slope_lo"] = num_node(t.init_ranges.slope_lo);
  ir["slope_hi"] = num_node(t.init_ranges.slope_hi);
  tr["init_ranges"] = ir;
  n["training"] = tr;

  const auto& s = c.schedule;
  YAML::Node sc;
  YAML::Node driven(YAML::NodeType::Sequence);
  driven.push_back(s.driven_a + 1);
  driven.push_back(s.driven_b + 1);
  driven.SetStyle(YAML::EmitterStyle::Flow);
  sc["driven"] = driven;
  sc["q_star_a"] = num_node(s.q_a_star);
  sc["q_star_b"] = num_node(s.q_b_star);
  sc["nu"] = num_node(s.nu);
  sc["amplitude"] = profile_node(s.amplitude);
  sc["drift"] = profile_node(s.drift);
  sc["shifted_magnet"] = s.shifted_magnet + 1;
  sc["horizon"] = s.horizon;
  n["schedule"] = sc;
  YAML::Node w;
  for (const auto& [name, win] : c.windows) {
    YAML::Node v(YAML::NodeType::Sequence);
    v.push_back(win.first);
    v.push_back(win.second);
    v.SetStyle(YAML::EmitterStyle::Flow);
    w[name] = v;
  }
  n["windows"] = w;

  const auto& st = c.study1d;
  YAML::Node sd;
  sd["a"] = num_node(st.plant.a);
  sd["b0"] = num_node(st.plant.b0);
  sd["f_low"] = num_node(st.f_low);
  sd["f_high"] = num_node(st.f_high);
  sd["x0"] = num_node(st.x0);
  sd["horizon"] = num_node(st.horizon);
  sd["h"] = num_node(st.h);
  sd["record_every"] = st.record_every;
  sd["ceiling"] = num_node(st.ceiling);
  sd["es"] = es_node(st.es);
  sd["control_dt"] = num_node(st.env.control_dt);
  sd["train_x0_range"] = num_node(st.env.x0_range);
  sd["train_ceiling"] = num_node(st.env.ceiling);
  sd["ddpg"] = hp_node(st.hp);
  sd["episodes"] = st.episodes;
  sd["horizon_steps"] = st.horizon_steps;
  sd["u_max"] = num_node(st.u_max);
  sd["seed"] = st.seed;
  n["study1d"] = sd;
  return n;
}

inline std::string emit(const YAML::Node& n) {
  YAML::Emitter out;
  out.SetIndent(2);
  out << n;
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Overrides: "section.key=value" with the value parsed as YAML.

struct Override {
  std::string path;
  std::string value;
};

inline Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not of the form key=value");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

inline void apply_override(YAML::Node& root, const Override& ov) {
  std::vector<std::string> parts;
  std::stringstream ss(ov.path);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw ConfigError("override path '" + ov.path + "' has an empty component");
    parts.push_back(p);
  }
  YAML::Node value;
  try {
    value = YAML::Load(ov.value);
  } catch (const YAML::Exception& e) {
    throw ConfigError("override " + ov.path + ": cannot parse value: " + e.what());
  }
  // yaml-cpp nodes are handles; walk with fresh references at each level.
  std::function<void(YAML::Node, std::size_t)> set = [&](YAML::Node node, std::size_t k) {
    if (k + 1 == parts.size()) {
      node[parts[k]] = value;
      return;
    }
    if (!node[parts[k]] || !node[parts[k]].IsMap()) node[parts[k]] = YAML::Node(YAML::NodeType::Map);
    set(node[parts[k]], k + 1);
  };
  set(root, 0);
}

struct LoadedConfig {
  RunConfig config;
  YAML::Node resolved;  // fully expanded, lattice inline
};

/// Reads a config file, applies overrides, resolves the lattice and validates.
inline LoadedConfig load_run_config(const std::string& path, const std::vector<Override>& overrides = {}) {
  YAML::Node root = load_yaml_file(path);
  for (const auto& ov : overrides) apply_override(root, ov);
  LoadedConfig lc;
  lc.config = run_config_from_yaml(root, std::filesystem::path(path).parent_path());
  lc.resolved = run_config_to_yaml(lc.config);
  return lc;
}

}  // namespace esdrl::io
