#include "lab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace lab {

namespace {

// Every accepted key with a kind-independent fallback default. Kind-specific
// defaults are applied on top in RunConfig's constructor.
const std::map<std::string, std::string>& base_defaults() {
  static const std::map<std::string, std::string> defaults = {
      {"reward_mode", "immediate"},
      {"agent.kind", "qlearning"},
      {"noise.sigma", "0"},
      {"env.layout_seed", "7"},
      {"env.max_steps", "100"},
      {"infernet.hidden_layers", "3"},
      {"infernet.units", "256"},
      {"infernet.activation", "leaky_relu"},
      {"infernet.dropout", "0"},
      {"infernet.lr", "1e-4"},
      {"infernet.batch_episodes", "32"},
      {"infernet.train_steps", "500000"},
      {"infernet.buffer", "500"},
      {"infernet.train_every", "1"},
      {"infernet.pretrain_episodes", "500"},
      {"infernet.pretrain_steps", "5000"},
      {"agent.gamma", "0.9"},
      {"agent.alpha", "0.1"},
      {"agent.lr", "2.5e-4"},
      {"agent.batch", "32"},
      {"agent.buffer", "500000"},
      {"agent.units", "32"},
      {"agent.hidden_layers", "2"},
      {"agent.target_sync", "500"},
      {"agent.train_episodes", "2000"},
      {"agent.train_steps", "150000"},
      {"agent.epsilon_start", "1.0"},
      {"agent.epsilon_end", "0.05"},
      {"agent.updates_per_step", "4"},
      {"td.lambda", "0.91"},
      {"td.alpha", "0.1"},
      {"td.traces", "dutch"},
      {"eval.every", "50"},
      {"eval.episodes", "50"},
      {"offline.sizes", "10,25,50,100,150,200"},
      {"offline.iterations", "5000"},
      {"rmse.sizes", "10,25,50,100,150,200,300,500"},
      {"bench.sizes", "250,500,1000,2000"},
      {"bench.steps_per_episode", "20"},
      {"gp.lengthscale", "1.0"},
      {"gp.signal_variance", "1.0"},
      {"gp.noise_variance", "0.1"},
      {"gp.jitter", "1e-8"},
      {"diag.steps", "50000"},
      {"diag.checkpoint_every", "1000"},
      {"diag.episodes", "200"},
  };
  return defaults;
}

const std::set<std::string>& budget_keys() {
  static const std::set<std::string> keys = {
      "infernet.train_steps", "infernet.pretrain_steps", "agent.train_episodes",
      "agent.train_steps",    "offline.iterations",      "diag.steps",
  };
  return keys;
}

}  // namespace

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "online_gridworld") return ExperimentKind::OnlineGridworld;
  if (name == "offline_gridworld") return ExperimentKind::OfflineGridworld;
  if (name == "cartpole") return ExperimentKind::Cartpole;
  if (name == "rmse_curve") return ExperimentKind::RmseCurve;
  if (name == "time_bench") return ExperimentKind::TimeBench;
  if (name == "loss_diag") return ExperimentKind::LossDiag;
  if (name == "atari" || name == "healthcare")
    throw ConfigError("experiment kind '" + name +
                      "' is out of scope for this artifact (desk-scale "
                      "experiments only)");
  throw ConfigError("unknown experiment kind: " + name);
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::OnlineGridworld: return "online_gridworld";
    case ExperimentKind::OfflineGridworld: return "offline_gridworld";
    case ExperimentKind::Cartpole: return "cartpole";
    case ExperimentKind::RmseCurve: return "rmse_curve";
    case ExperimentKind::TimeBench: return "time_bench";
    case ExperimentKind::LossDiag: return "loss_diag";
  }
  return "?";
}

RunConfig::RunConfig(ExperimentKind kind) : kind_(kind) {
  values_ = base_defaults();
  seeds = {0};
  switch (kind) {
    case ExperimentKind::OnlineGridworld:
      // GW Online column: lr 1e-4, 3x256 leaky relu, batch 32 ep.,
      // 500k steps, buffer 500, gamma 0.9, 2000 agent episodes.
      break;
    case ExperimentKind::RmseCurve:
      values_["noise.sigma"] = "0.3";  // noisy variant of the RMSE curve
      [[fallthrough]];
    case ExperimentKind::OfflineGridworld:
    case ExperimentKind::TimeBench:
    case ExperimentKind::LossDiag:
      // GW Offline column.
      values_["infernet.lr"] = "1e-3";
      values_["infernet.train_steps"] = "50000";
      break;
    case ExperimentKind::Cartpole:
      values_["infernet.units"] = "64";
      values_["infernet.activation"] = "relu";
      values_["infernet.dropout"] = "0.2";
      values_["infernet.lr"] = "1e-4";
      values_["infernet.batch_episodes"] = "10";
      values_["infernet.train_steps"] = "60000";
      values_["agent.gamma"] = "0.99";
      values_["env.max_steps"] = "200";
      break;
  }
}

void RunConfig::validate(const std::string& key,
                         const std::string& value) const {
  if (key == "reward_mode" && value != "immediate" && value != "delayed" &&
      value != "inferred")
    throw ConfigError("bad reward_mode: " + value);
  if (key == "agent.kind" && value != "qlearning" && value != "tdlambda" &&
      value != "dqn")
    throw ConfigError("bad agent.kind: " + value);
  if (key == "infernet.activation" && value != "leaky_relu" && value != "relu")
    throw ConfigError("bad infernet.activation: " + value);
  if (key == "td.traces" && value != "dutch" && value != "accumulating" &&
      value != "replacing")
    throw ConfigError("bad td.traces: " + value);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "experiment") {
    ExperimentKind k = experiment_kind_from_string(value);
    if (k != kind_)
      throw ConfigError("config experiment kind '" + value +
                        "' does not match the requested command '" +
                        to_string(kind_) + "'");
    return;
  }
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  validate(key, value);
  it->second = value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    // trim
    auto issp = [](unsigned char c) { return std::isspace(c); };
    line.erase(line.begin(),
               std::find_if_not(line.begin(), line.end(), issp));
    while (!line.empty() && issp(line.back())) line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && issp(key.back())) key.pop_back();
    value.erase(value.begin(),
                std::find_if_not(value.begin(), value.end(), issp));
    set(key, value);
  }
}

void RunConfig::apply_fast_profile() {
  for (const std::string& key : budget_keys()) {
    std::int64_t v = get_i64(key);
    values_[key] = std::to_string(std::max<std::int64_t>(1, v / 10));
  }
}

bool RunConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  return static_cast<int>(get_i64(key));
}

std::int64_t RunConfig::get_i64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    // allow scientific notation for big budgets
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("");
    return static_cast<std::int64_t>(d);
  } catch (...) {
    throw ConfigError("config key " + key + ": not an integer: " + v);
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("");
    return d;
  } catch (...) {
    throw ConfigError("config key " + key + ": not a number: " + v);
  }
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (...) {
      throw ConfigError("config key " + key + ": bad list item: " + item);
    }
  }
  if (out.empty()) throw ConfigError("config key " + key + ": empty list");
  return out;
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "experiment=" << to_string(kind_) << '\n';
  for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  return os.str();
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

}  // namespace lab
