#pragma once

// Run artifacts: line-delimited JSON logs with a schema header, manifests,
// and CSV exports. Nothing here records wall-clock time, so re-running a
// manifest reproduces every file byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esdrl/experiments.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/train.hpp"

namespace esdrl::io {

inline constexpr int kLogSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "esdrl 1.0.0";

using json = nlohmann::json;

class RunLog {
 public:
  RunLog(const std::filesystem::path& path, const std::string& kind) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open log " + path.string());
    append({{"schema", "esdrl.runlog"}, {"schema_version", kLogSchemaVersion}, {"kind", kind}});
  }

  void append(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("log write failed");
  }

 private:
  std::ofstream out_;
};

/// Records after the schema header.
inline std::vector<json> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log " + path.string());
  std::vector<json> out;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty log");
  const json head = json::parse(line);
  if (head.value("schema", "") != "esdrl.runlog") throw std::runtime_error(path.string() + ": not a run log");
  if (head.value("schema_version", 0) != kLogSchemaVersion)
    throw std::runtime_error(path.string() + ": unsupported log schema version");
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

inline json learning_record_json(const ddpg::LearningRecord& r) {
  return {{"episode", r.episode},         {"phase", r.phase},
          {"stage", r.stage},             {"mean_reward", r.mean_reward},
          {"critic_loss", r.critic_loss}, {"actor_objective", r.actor_objective},
          {"failures", r.failures},       {"steps", r.steps}};
}

inline json step_record_json(const StepRecord& r, const char* channel) {
  return {{"t", r.t},         {"reward", r.reward}, {"beta", r.beta},   {"Q1", r.q_a},
          {"Q10", r.q_b},     {"deltaL", r.delta_L}, {"X_bar", r.X_bar}, {"Y_bar", r.Y_bar},
          {"feasible", r.feasible}, {"dQ_inf", r.dq_inf}, {"channel", channel}};
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_yaml;  // fully resolved configuration
  std::vector<std::string> overrides;
  json arguments = json::object();  // command-specific options
};

inline json manifest_json(const Manifest& m) {
  return {{"schema", "esdrl.manifest"},
          {"schema_version", kLogSchemaVersion},
          {"code_version", kCodeVersion},
          {"command", m.command},
          {"seed", m.seed},
          {"overrides", m.overrides},
          {"arguments", m.arguments},
          {"config", m.config_yaml}};
}

inline Manifest manifest_from_json(const json& j) {
  if (j.value("schema", "") != "esdrl.manifest") throw std::runtime_error("not a manifest");
  Manifest m;
  m.command = j.at("command").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_yaml = j.at("config").get<std::string>();
  m.overrides = j.at("overrides").get<std::vector<std::string>>();
  m.arguments = j.at("arguments");
  return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trajectory_csv(const EnvelopeTrajectory& tr) {
  std::string s = "z,X,Y,Xp,Yp\n";
  for (std::size_t k = 0; k < tr.nodes(); ++k)
    s += g17(tr.z[k]) + "," + g17(tr.X[k]) + "," + g17(tr.Y[k]) + "," + g17(tr.Xp[k]) + "," + g17(tr.Yp[k]) + "\n";
  return s;
}

inline std::string variant_csv(const VariantTrace& tr) {
  std::string s = "t,reward,beta,Q1,Q10,deltaL\n";
  for (const auto& r : tr.steps)
    s += std::to_string(r.t) + "," + g17(r.reward) + "," + std::to_string(r.beta) + "," + g17(r.q_a) + "," + g17(r.q_b) +
         "," + g17(r.delta_L) + "\n";
  return s;
}

inline std::string trace1d_csv(const Trace1D& tr) {
  std::string s = "t,x,V\n";
  for (std::size_t k = 0; k < tr.t.size(); ++k) s += g17(tr.t[k]) + "," + g17(tr.x[k]) + "," + g17(tr.V[k]) + "\n";
  return s;
}

/// Flattens a run log into CSV using the keys of the first record.
inline std::string log_to_csv(const std::vector<json>& records) {
  if (records.empty()) return "";
  std::vector<std::string> keys;
  for (const auto& [k, v] : records.front().items()) keys.push_back(k);
  std::string s;
  for (std::size_t i = 0; i < keys.size(); ++i) s += (i ? "," : "") + keys[i];
  s += "\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (i) s += ",";
      const auto& v = r.contains(keys[i]) ? r.at(keys[i]) : json();
      if (v.is_number_float()) s += g17(v.get<double>());
      else if (v.is_string()) s += v.get<std::string>();
      else if (!v.is_null()) s += v.dump();
    }
    s += "\n";
  }
  return s;
}

/// Parses a variant CSV back into (t, reward) pairs.
inline std::vector<std::pair<long, double>> read_variant_rewards(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<long, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    out.emplace_back(std::stol(line.substr(0, c1)), std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
  }
  return out;
}

}  // namespace esdrl::io
