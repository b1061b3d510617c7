#pragma once

#include "lab/infernet.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace lab::env {

using Rng = std::mt19937_64;

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;  // done by step cap rather than terminal
};

struct GridStepResult {
  int next_cell = 0;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
};

/// 14x7 grid. The agent starts at the bottom-right cell and must reach the
/// terminal at the top-left using actions {up, left, down}. Five cells pay +1
/// and four pay -1, each at most once per episode; all placements are fixed by
/// the layout seed for the lifetime of a run. Off-grid moves clamp.
class GridWorld {
 public:
  static constexpr int kWidth = 14;
  static constexpr int kHeight = 7;
  static constexpr int kNumActions = 3;  // 0: up, 1: left, 2: down
  static constexpr int kNumPositive = 5;
  static constexpr int kNumNegative = 4;

  explicit GridWorld(std::uint64_t layout_seed = 7, int max_steps = 100);

  int reset();                     // returns the start cell
  GridStepResult step(int action); // throws std::logic_error after done

  int cell() const { return pos_; }
  bool done() const { return done_; }
  int max_steps() const { return max_steps_; }
  std::uint64_t layout_seed() const { return layout_seed_; }

  int num_cells() const { return kWidth * kHeight; }
  int start_cell() const { return start_; }
  int terminal_cell() const { return terminal_; }

  /// Reward cells in a fixed order (positives first); parallel value list.
  const std::vector<int>& reward_cell_ids() const { return reward_cell_ids_; }
  double reward_at(int cell) const;  // 0 for non-reward cells
  std::uint32_t consumed_mask() const { return consumed_; }

  /// Text map: '.' empty, '+'/'-' reward cells, 'S' start, 'T' terminal.
  std::string layout_map() const;

 private:
  std::uint64_t layout_seed_;
  int max_steps_;
  int start_;
  int terminal_;
  std::vector<int> reward_cell_ids_;
  std::vector<double> reward_values_;
  std::map<int, int> cell_to_reward_index_;

  int pos_ = 0;
  int steps_ = 0;
  bool done_ = true;
  std::uint32_t consumed_ = 0;
};

/// Classic cart-pole with Euler integration. Reward is 1.0 per step while the
/// pole stays within bounds; the terminating transition pays 0.
class CartPole {
 public:
  static constexpr int kNumActions = 2;
  static constexpr int kStateDim = 4;

  explicit CartPole(int max_steps = 200);

  Eigen::VectorXd reset(Rng& rng);  // state components ~ U(-0.05, 0.05)
  StepResult step(int action);

  bool done() const { return done_; }
  const Eigen::VectorXd& state() const { return state_; }
  int max_steps() const { return max_steps_; }

 private:
  int max_steps_;
  Eigen::VectorXd state_;
  int steps_ = 0;
  bool done_ = true;
};

/// Additive zero-mean Gaussian reward noise.
class NoiseModel {
 public:
  NoiseModel(double sigma, std::uint64_t seed);

  double apply(double reward);
  double sigma() const { return sigma_; }

 private:
  double sigma_;
  Rng rng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

enum class RewardMode { Immediate, Delayed, Inferred };

RewardMode reward_mode_from_string(const std::string& name);
std::string to_string(RewardMode mode);

/// Per-step reward stream presented to the agent. Immediate passes the
/// episode's rewards through; delayed emits zeros with the episodic sum on
/// the final step; inferred passes through the episode's (relabeled) rewards.
std::vector<double> wrap_rewards(RewardMode mode, const lab::Episode& episode);

/// Exact value iteration over the (cell, consumed-set) augmented GridWorld
/// state space.
struct GridSolution {
  double gamma = 0.0;
  std::vector<double> values;  // indexed mask * num_cells + cell
  std::vector<int> policy;     // greedy action per augmented state

  double start_value(const GridWorld& env) const;
};

GridSolution value_iterate(const GridWorld& env, double gamma,
                           double tol = 1e-12);

/// Undiscounted episodic return of the VI-greedy policy, executed in the
/// environment. This is the oracle "optimal return" agents are compared to.
double optimal_return(const GridWorld& env, double gamma);

}  // namespace lab::env
