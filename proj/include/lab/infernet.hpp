#pragma once

#include "lab/nn.hpp"

#include <deque>
#include <string>
#include <vector>

namespace lab {

struct Step {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0.0;  // immediate reward as observed (may be hidden/noisy)
  Eigen::VectorXd next_state;
};

struct Episode {
  std::vector<Step> steps;
  double delayed_reward = 0.0;
  bool terminated = false;  // false when ended by truncation

  std::size_t length() const { return steps.size(); }
};

/// Exact episodic sum the environments report at episode end.
double delayed_from_immediate(const std::vector<double>& rewards);

/// Bounded FIFO episode store; eviction is strictly oldest-first.
class EpisodeBuffer {
 public:
  explicit EpisodeBuffer(std::size_t capacity = 500);

  void push(Episode episode);
  const Episode& at(std::size_t i) const { return storage_[i]; }
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }

 private:
  std::size_t capacity_;
  std::deque<Episode> storage_;
};

/// Maps (state, action) to the fixed-size network input.
struct StateActionEncoder {
  enum class Scheme { GridOneHot, ContinuousConcat };

  Scheme scheme = Scheme::GridOneHot;
  int width = 0, height = 0;  // GridOneHot
  int state_dim = 0;          // ContinuousConcat
  int n_actions = 0;

  static StateActionEncoder grid_onehot(int width, int height, int n_actions);
  static StateActionEncoder continuous_concat(int state_dim, int n_actions);

  int dim() const;
  Eigen::VectorXd encode(const Eigen::VectorXd& state, int action) const;
  Eigen::VectorXd encode_cell(int cell, int action) const;  // GridOneHot
};

struct InferNetConfig {
  std::vector<int> hidden_units = {256, 256, 256};
  nn::Activation activation = nn::Activation::LeakyRelu;
  double dropout_rate = 0.0;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_episodes = 32;
};

/// The sum-constrained reward regressor f(s, a | theta).
class InferNetModel {
 public:
  InferNetModel(StateActionEncoder encoder, const InferNetConfig& config,
                nn::Rng& rng);

  /// One optimizer update on `batch_size` episodes sampled uniformly with
  /// replacement. Returns the mean per-episode loss.
  double train_minibatch(const EpisodeBuffer& buffer, int batch_size,
                         nn::Rng& rng);

  /// Eval-mode per-step inferred rewards f(s_t, a_t).
  std::vector<double> infer_rewards(const Episode& episode) const;

  /// Copy of the episode with per-step rewards replaced by inferred values;
  /// the stored delayed reward is preserved.
  Episode relabel(const Episode& episode) const;

  /// Eval-mode episode loss (no parameter update).
  double episode_loss(const Episode& episode) const;

  const nn::MLPModel& net() const { return net_; }
  nn::MLPModel& net() { return net_; }
  const StateActionEncoder& encoder() const { return encoder_; }
  const InferNetConfig& config() const { return config_; }

  void save(const std::string& path) const;
  static InferNetModel load(const std::string& path);

 private:
  InferNetModel() = default;

  StateActionEncoder encoder_;
  InferNetConfig config_;
  nn::MLPModel net_;
  nn::AdamState opt_;

  Eigen::MatrixXd encode_episode(const Episode& episode) const;
};

}  // namespace lab
