// esdrl: simulate, train, evaluate, experiment, export.
//
// Every command writes a manifest.json next to its outputs. Passing that
// manifest back with --manifest re-executes the run with identical results.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "esdrl/ddpg.hpp"
#include "esdrl/experiments.hpp"
#include "esdrl/io/config.hpp"
#include "esdrl/io/run_log.hpp"
#include "esdrl/kv_env.hpp"
#include "esdrl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace esdrl;

namespace {

struct Common {
  std::string config_path;
  std::string manifest_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "run configuration (YAML)");
  cmd->add_option("--manifest", c.manifest_path, "re-run from a manifest.json");
  cmd->add_option("--seed", c.seed, "override the configured seed");
  cmd->add_option("--set", c.sets, "override a config value: section.key=value (repeatable)");
  cmd->add_option("--out", c.out, "output directory (relative paths resolve under $ESDRL_OUTPUT_ROOT)");
}

struct Context {
  io::RunConfig cfg;
  std::string config_yaml;
  std::vector<std::string> overrides;  // as given, including Qk=v settings
  std::map<std::size_t, double> settings;  // 0-based magnet -> strength (simulate only)
  json arguments = json::object();     // from the manifest when re-running
  fs::path out_dir;
};

Context resolve(const Common& c, const std::string& command) {
  Context ctx;
  YAML::Node root;
  fs::path base = ".";
  std::vector<std::string> sets = c.sets;
  if (!c.manifest_path.empty()) {
    const auto m = io::manifest_from_json(json::parse(io::read_text(c.manifest_path)));
    if (m.command != command)
      throw std::runtime_error("manifest was written by '" + m.command + "', not '" + command + "'");
    root = YAML::Load(m.config_yaml);
    ctx.arguments = m.arguments;
    // The stored config already has config-path overrides applied; only
    // magnet-setting overrides still need to be replayed.
    std::vector<std::string> replay;
    for (const auto& s : m.overrides)
      if (std::regex_match(io::parse_override(s).path, std::regex("Q[0-9]+"))) replay.push_back(s);
    ctx.overrides = m.overrides;
    for (const auto& s : sets) ctx.overrides.push_back(s);
    sets.insert(sets.begin(), replay.begin(), replay.end());
    if (!c.seed) root["seed"] = m.seed;
  } else {
    if (c.config_path.empty()) throw std::runtime_error("either --config or --manifest is required");
    root = io::load_yaml_file(c.config_path);
    base = fs::path(c.config_path).parent_path();
    ctx.overrides = sets;
  }
  for (const auto& s : sets) {
    const auto ov = io::parse_override(s);
    std::smatch mq;
    if (std::regex_match(ov.path, mq, std::regex("Q([0-9]+)"))) {
      if (command != "simulate") throw std::runtime_error("magnet setting overrides (" + s + ") only apply to simulate");
      const auto k = std::stoul(mq[1].str());
      if (k == 0) throw std::runtime_error("magnet indices are 1-based: " + s);
      ctx.settings[k - 1] = std::stod(ov.value);
      continue;
    }
    io::apply_override(root, ov);
  }
  if (c.seed) root["seed"] = *c.seed;
  ctx.cfg = io::run_config_from_yaml(root, base);
  for (const auto& [k, v] : ctx.settings)
    if (k >= ctx.cfg.lattice.size())
      throw std::runtime_error("magnet Q" + std::to_string(k + 1) + " does not exist (lattice has " +
                               std::to_string(ctx.cfg.lattice.size()) + ")");
  ctx.config_yaml = io::emit(io::run_config_to_yaml(ctx.cfg));

  fs::path out = c.out.empty() ? fs::path(ctx.cfg.output_dir) : fs::path(c.out);
  if (out.is_relative()) {
    if (const char* root_env = std::getenv("ESDRL_OUTPUT_ROOT")) out = fs::path(root_env) / out;
  }
  fs::create_directories(out);
  ctx.out_dir = out;
  return ctx;
}

void write_manifest(const Context& ctx, const std::string& command, const json& arguments) {
  io::Manifest m;
  m.command = command;
  m.seed = ctx.cfg.seed;
  m.config_yaml = ctx.config_yaml;
  m.overrides = ctx.overrides;
  m.arguments = arguments;
  io::write_text(ctx.out_dir / "manifest.json", io::manifest_json(m).dump(2) + "\n");
}

template <class T>
void from_args(const json& args, const char* key, T& value) {
  if (args.contains(key)) value = args.at(key).get<T>();
}

json breakdown_json(const RewardBreakdown& b) {
  return {{"P_env", b.P_env}, {"P_smooth", b.P_smooth}, {"P_term", b.P_term}, {"P_total", b.P_total}, {"R", b.R}};
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& common) {
  Context ctx = resolve(common, "simulate");
  std::vector<double> q = ctx.cfg.lattice.nominal_strengths();
  for (const auto& [k, v] : ctx.settings) q[k] = v;
  const auto tr = integrate(ctx.cfg.lattice, q, ctx.cfg.beam);
  json summary = {{"feasible", tr.feasible}, {"settings", q}};
  if (tr.feasible) {
    const auto b = penalty(tr, ctx.cfg.reward);
    const auto avg = path_averages(tr);
    summary["breakdown"] = breakdown_json(b);
    summary["X_bar"] = avg.X;
    summary["Y_bar"] = avg.Y;
    io::write_text(ctx.out_dir / "trajectory.csv", io::trajectory_csv(tr));
    std::printf("feasible  R = %.6f  X_bar = %.3f mm  Y_bar = %.3f mm\n", b.R, avg.X * 1e3, avg.Y * 1e3);
  } else {
    summary["failure_z"] = tr.failure_z;
    summary["reward"] = failure_reward(ctx.cfg.reward);
    std::printf("infeasible: envelope collapsed at z = %.4f m, R = %.6f\n", tr.failure_z, failure_reward(ctx.cfg.reward));
  }
  io::write_text(ctx.out_dir / "summary.json", summary.dump(2) + "\n");
  write_manifest(ctx, "simulate", json::object());
  return 0;
}

struct TrainArgs {
  std::string phase = "all";
  long max_episodes = -1;
  std::string resume;
};

ddpg::CurriculumPlan select_plan(const io::RunConfig& cfg, const TrainArgs& a) {
  auto plan = cfg.curriculum();
  if (a.phase != "all") {
    if (a.phase != "I" && a.phase != "II" && a.phase != "III")
      throw std::runtime_error("--phase must be I, II, III or all");
    std::vector<ddpg::Stage> keep;
    for (auto& s : plan.stages)
      if (s.phase == a.phase) keep.push_back(s);
    plan.stages = keep;
  }
  if (a.max_episodes >= 0)
    for (auto& s : plan.stages) {
      s.max_episodes = std::min<std::size_t>(s.max_episodes, static_cast<std::size_t>(a.max_episodes));
      s.min_episodes = std::min(s.min_episodes, s.max_episodes);
    }
  if (plan.stages.empty()) throw std::runtime_error("the selected curriculum has no stages");
  return plan;
}

int cmd_train(const Common& common, TrainArgs a) {
  Context ctx = resolve(common, "train");
  from_args(ctx.arguments, "phase", a.phase);
  from_args(ctx.arguments, "max_episodes", a.max_episodes);
  from_args(ctx.arguments, "resume", a.resume);
  const auto& cfg = ctx.cfg;
  const auto plan = select_plan(cfg, a);

  std::mt19937_64 init_rng(cfg.seed);
  const auto lim = cfg.action_limits();
  std::vector<double> low(lim.size());
  for (std::size_t i = 0; i < lim.size(); ++i) low[i] = -lim[i];
  ddpg::AgentBundle bundle;
  ddpg::TrainProgress start;
  if (!a.resume.empty()) {
    const auto ck = nn::load_checkpoint(a.resume);
    bundle = ddpg::bundle_from(ck);
    if (bundle.act_dim() != cfg.lattice.size()) throw std::runtime_error("checkpoint does not match this lattice");
    start.episode = ck.header.value("episodes_done", std::size_t{0});
    const std::string next = ck.header.value("next_stage", std::string());
    for (std::size_t i = 0; i < plan.stages.size(); ++i)
      if (plan.stages[i].name == next) start.stage_index = i;
  } else {
    bundle = ddpg::AgentBundle::create(cfg.training.hp, cfg.input_transform(), low, lim, init_rng);
  }

  KvEnvironment env(cfg.env_config());
  io::RunLog log(ctx.out_dir / "curve.jsonl", "learning_curve");
  ddpg::TrainOptions opts;
  opts.horizon = cfg.training.horizon;
  opts.seed = cfg.seed;
  opts.failure_window = cfg.training.failure_window;
  opts.failure_abort_fraction = cfg.training.failure_abort_fraction;
  opts.on_episode = [&](const ddpg::LearningRecord& r) {
    log.append(io::learning_record_json(r));
    if (r.episode % 10 == 0)
      std::fprintf(stderr, "[%s] episode %zu  mean reward %.4f  failures %zu\n", r.stage.c_str(), r.episode,
                   r.mean_reward, r.failures);
  };
  opts.on_stage_end = [&](const std::string& name, const ddpg::AgentBundle& b, const ddpg::TrainProgress& p) {
    auto ck = ddpg::bundle_checkpoint(b);
    ck.header["completed_stage"] = name;
    ck.header["next_stage"] = p.stage_index < plan.stages.size() ? plan.stages[p.stage_index].name : "";
    ck.header["episodes_done"] = p.episode;
    ck.header["seed"] = cfg.seed;
    nn::save_checkpoint(ck, (ctx.out_dir / ("ckpt_" + name + ".ckpt")).string());
  };
  ddpg::TrainResult res;
  try {
    res = ddpg::train(plan, bundle, env, opts, start);
  } catch (const ddpg::TrainingAborted& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    write_manifest(ctx, "train", {{"phase", a.phase}, {"max_episodes", a.max_episodes}, {"resume", a.resume}});
    return 3;
  }
  auto final_ck = ddpg::bundle_checkpoint(bundle);
  final_ck.header["episodes_done"] = res.progress.episode;
  final_ck.header["next_stage"] = "";
  final_ck.header["seed"] = cfg.seed;
  nn::save_checkpoint(final_ck, (ctx.out_dir / "final.ckpt").string());
  write_manifest(ctx, "train", {{"phase", a.phase}, {"max_episodes", a.max_episodes}, {"resume", a.resume}});
  std::printf("trained %zu episodes; checkpoint %s\n", res.curve.size(), (ctx.out_dir / "final.ckpt").c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::size_t episodes = 10;
  bool randomize_init = false;
};

int cmd_evaluate(const Common& common, EvalArgs a) {
  Context ctx = resolve(common, "evaluate");
  from_args(ctx.arguments, "checkpoint", a.checkpoint);
  from_args(ctx.arguments, "episodes", a.episodes);
  from_args(ctx.arguments, "randomize_init", a.randomize_init);
  if (a.checkpoint.empty()) throw std::runtime_error("evaluate needs --checkpoint (an actor checkpoint from 'train')");
  const auto& cfg = ctx.cfg;
  const auto policy = ddpg::RuntimePolicy::load(a.checkpoint);
  if (policy.act_dim() != cfg.lattice.size()) throw std::runtime_error("checkpoint does not match this lattice");
  KvEnvironment env(cfg.env_config());
  env.configure({{}, a.randomize_init});
  std::mt19937_64 rng(cfg.seed);
  const double trained = ddpg::evaluate_policy(env, policy, a.episodes, cfg.training.horizon, rng);
  std::mt19937_64 rng2(cfg.seed), act_rng(cfg.seed + 1);
  const double random = ddpg::evaluate_policy(env, ddpg::random_policy(policy.low(), policy.high(), act_rng), a.episodes,
                                              cfg.training.horizon, rng2);
  std::mt19937_64 rng3(cfg.seed);
  const auto zero = [n = cfg.lattice.size()](const std::vector<double>&) { return std::vector<double>(n, 0.0); };
  const double nominal = ddpg::evaluate_policy(env, zero, a.episodes, cfg.training.horizon, rng3);
  const json out = {{"policy_mean_reward", trained}, {"random_mean_reward", random}, {"nominal_mean_reward", nominal}};
  io::write_text(ctx.out_dir / "evaluation.json", out.dump(2) + "\n");
  write_manifest(ctx, "evaluate", {{"checkpoint", a.checkpoint}, {"episodes", a.episodes}, {"randomize_init", a.randomize_init}});
  std::printf("policy %.6f  random %.6f  nominal %.6f\n", trained, random, nominal);
  return 0;
}

struct ExperimentArgs {
  std::string study = "perturbation";
  std::string variants = "drl,es,es_warm,hybrid";
  std::string checkpoint;
  bool quiet = false;  // zero-amplitude, zero-drift schedule
};

int cmd_experiment(const Common& common, ExperimentArgs a) {
  Context ctx = resolve(common, "experiment");
  from_args(ctx.arguments, "study", a.study);
  from_args(ctx.arguments, "variants", a.variants);
  from_args(ctx.arguments, "checkpoint", a.checkpoint);
  from_args(ctx.arguments, "quiet", a.quiet);
  const auto& cfg = ctx.cfg;
  const json args = {{"study", a.study}, {"variants", a.variants}, {"checkpoint", a.checkpoint}, {"quiet", a.quiet}};

  if (a.study == "1d") {
    std::vector<ddpg::LearningRecord> curve;
    const auto agent = train_toy_agent(cfg.study1d, &curve);
    io::RunLog log(ctx.out_dir / "toy_curve.jsonl", "learning_curve");
    for (const auto& r : curve) log.append(io::learning_record_json(r));
    const auto res = run_1d_study(cfg.study1d, agent);
    json summary = json::object();
    for (const auto& [name, tr] : res.traces) {
      io::write_text(ctx.out_dir / (name + ".csv"), io::trace1d_csv(tr));
      double vmin = 1, vmax = 0;
      for (double v : tr.V) vmin = std::min(vmin, v), vmax = std::max(vmax, v);
      summary[name] = {{"min_V", vmin}, {"max_V", vmax}, {"diverged", tr.diverged}, {"samples", tr.t.size()}};
    }
    io::write_text(ctx.out_dir / "summary.json", summary.dump(2) + "\n");
    write_manifest(ctx, "experiment", args);
    std::cout << summary.dump(2) << "\n";
    return 0;
  }
  if (a.study != "perturbation") throw std::runtime_error("--study must be perturbation or 1d");

  std::vector<VariantKind> kinds;
  std::stringstream ss(a.variants);
  for (std::string v; std::getline(ss, v, ',');)
    if (!v.empty()) kinds.push_back(parse_variant(v));
  if (kinds.empty()) throw std::runtime_error("--variants is empty");

  OffsetPolicy policy;
  if (!a.checkpoint.empty()) {
    if (!fs::exists(a.checkpoint)) throw std::runtime_error("checkpoint not found: " + a.checkpoint);
    auto rp = std::make_shared<ddpg::RuntimePolicy>(ddpg::RuntimePolicy::load(a.checkpoint));
    if (rp->act_dim() != cfg.lattice.size()) throw std::runtime_error("checkpoint does not match this lattice");
    policy = [rp](const std::vector<double>& o) { return (*rp)(o); };
  }
  auto cc = cfg.comparison_config();
  if (a.quiet) cc.schedule = cc.schedule.quiet();
  const auto traces = run_comparison(kinds, cc, policy);

  json summary = json::object();
  for (const auto& tr : traces) {
    const std::string name = variant_name(tr.kind);
    io::write_text(ctx.out_dir / (name + ".csv"), io::variant_csv(tr));
    io::RunLog log(ctx.out_dir / (name + ".jsonl"), "control_trace");
    for (const auto& r : tr.steps) log.append(io::step_record_json(r, r.beta ? "drl" : "es"));
    json means = json::object();
    for (const auto& [wname, win] : cfg.windows) means[wname] = window_mean(tr, win.first, win.second);
    summary[name] = {{"window_means", means}, {"beta_cycles", beta_cycles(tr)}};
  }
  io::write_text(ctx.out_dir / "summary.json", summary.dump(2) + "\n");
  write_manifest(ctx, "experiment", args);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct ExportArgs {
  std::string log;
  std::string csv;
};

int cmd_export(const Common& common, ExportArgs a) {
  if (a.log.empty() || a.csv.empty()) throw std::runtime_error("export needs --log FILE.jsonl and --csv OUT.csv");
  (void)common;
  io::write_text(a.csv, io::log_to_csv(io::read_log(a.log)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extremum seeking / DDPG control laboratory on a KV envelope beamline"};
  app.require_subcommand(1);

  Common c_sim, c_train, c_eval, c_exp, c_export;
  auto* sim = app.add_subcommand("simulate", "integrate one magnet setting and write the trajectory");
  add_common(sim, c_sim);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "run the DDPG curriculum");
  add_common(train, c_train);
  train->add_option("--phase", ta.phase, "I, II, III or all");
  train->add_option("--max-episodes", ta.max_episodes, "cap on episodes per stage");
  train->add_option("--resume", ta.resume, "continue from a checkpoint written by train");

  EvalArgs ea;
  auto* eval = app.add_subcommand("evaluate", "score a trained actor against random and nominal baselines");
  add_common(eval, c_eval);
  eval->add_option("--checkpoint", ea.checkpoint, "actor checkpoint");
  eval->add_option("--episodes", ea.episodes);
  eval->add_flag("--randomize-init", ea.randomize_init, "draw the initial beam per episode");

  ExperimentArgs xa;
  auto* exp = app.add_subcommand("experiment", "perturbation comparison or the 1D study");
  add_common(exp, c_exp);
  exp->add_option("--study", xa.study, "perturbation or 1d");
  exp->add_option("--variants", xa.variants, "comma list of drl, es, es_warm, hybrid");
  exp->add_option("--checkpoint", xa.checkpoint, "actor checkpoint for drl, es_warm and hybrid");
  exp->add_flag("--quiet-schedule", xa.quiet, "hold the drives at their setpoints (no perturbation)");

  ExportArgs xp;
  auto* exq = app.add_subcommand("export", "convert a run log to CSV");
  add_common(exq, c_export);
  exq->add_option("--log", xp.log, "run log (.jsonl)");
  exq->add_option("--csv", xp.csv, "output CSV");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(c_sim);
    if (*train) return cmd_train(c_train, ta);
    if (*eval) return cmd_evaluate(c_eval, ea);
    if (*exp) return cmd_experiment(c_exp, xa);
    if (*exq) return cmd_export(c_export, xp);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
