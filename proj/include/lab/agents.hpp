#pragma once

#include "lab/nn.hpp"

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lab::agents {

using Rng = std::mt19937_64;

/// Linear epsilon decay: start -> end over `horizon` episodes, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t horizon = 1;

  double at(std::int64_t episode) const;
};

/// Greedy with probability 1-eps (uniform random tie-break), else uniform.
int epsilon_greedy(std::span<const double> values, double epsilon, Rng& rng);

/// Tabular action values; unvisited entries read as zero.
class QTable {
 public:
  QTable(int n_actions, double alpha, double gamma);

  double get(std::int64_t state, int action) const;
  std::vector<double> action_values(std::int64_t state) const;

  /// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') * (1-done) - Q(s,a))
  void update(std::int64_t s, int a, double r, std::int64_t s_next, bool done);

  int n_actions() const { return n_actions_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }

  std::string dump() const;  // "state action value" lines
  std::size_t size() const { return values_.size(); }

 private:
  int n_actions_;
  double alpha_;
  double gamma_;
  std::unordered_map<std::int64_t, double> values_;

  std::int64_t key(std::int64_t state, int action) const {
    return state * n_actions_ + action;
  }
};

enum class TraceKind { Dutch, Accumulating, Replacing };

TraceKind trace_kind_from_string(const std::string& name);

/// On-policy action-value TD(lambda) with eligibility traces.
class TDLambdaAgent {
 public:
  TDLambdaAgent(int n_actions, double alpha, double gamma, double lambda,
                TraceKind traces = TraceKind::Dutch);

  void begin_episode();  // resets all traces
  /// delta = r + gamma * Q(s',a') * (1-done) - Q(s,a), propagated to every
  /// traced entry.
  void update(std::int64_t s, int a, double r, std::int64_t s_next, int a_next,
              bool done);

  double get(std::int64_t state, int action) const;
  std::vector<double> action_values(std::int64_t state) const;
  double trace(std::int64_t state, int action) const;

  int n_actions() const { return n_actions_; }

 private:
  int n_actions_;
  double alpha_;
  double gamma_;
  double lambda_;
  TraceKind kind_;
  std::unordered_map<std::int64_t, double> values_;
  std::unordered_map<std::int64_t, double> traces_;

  std::int64_t key(std::int64_t state, int action) const {
    return state * n_actions_ + action;
  }
};

struct Transition {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

struct DQNConfig {
  std::vector<int> hidden_units = {32, 32};
  double learning_rate = 2.5e-4;
  double gamma = 0.99;
  int batch_size = 32;
  std::size_t replay_capacity = 500000;
  int target_sync_period = 500;  // in train steps
};

/// Minimal DQN: online/target nets, FIFO replay, Adam on squared TD error.
class DQNAgent {
 public:
  DQNAgent(int state_dim, int n_actions, const DQNConfig& config, Rng& rng);

  void observe(Transition t);  // append to replay (FIFO eviction)
  int act(const Eigen::VectorXd& state, double epsilon, Rng& rng) const;

  /// One minibatch update; requires replay size >= batch size.
  double train_step(Rng& rng);

  std::vector<double> q_values(const Eigen::VectorXd& state) const;
  std::size_t replay_size() const { return replay_.size(); }
  const nn::MLPModel& online_net() const { return online_; }
  const nn::MLPModel& target_net() const { return target_; }
  std::int64_t train_steps() const { return train_steps_; }

 private:
  DQNConfig config_;
  int n_actions_;
  nn::MLPModel online_;
  nn::MLPModel target_;
  nn::AdamState opt_;
  std::deque<Transition> replay_;
  std::int64_t train_steps_ = 0;
};

}  // namespace lab::agents
