#pragma once

#include "lab/agents.hpp"
#include "lab/config.hpp"
#include "lab/env.hpp"
#include "lab/gp.hpp"
#include "lab/infernet.hpp"
#include "lab/metrics.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lab {

/// Random-policy GridWorld episodes. `episodes` carry the observed (possibly
/// noisy) rewards and the observed episodic sum as the delayed reward;
/// `true_rewards` keeps the parallel noiseless values for diagnostics.
struct GridDataset {
  std::vector<Episode> episodes;
  std::vector<std::vector<double>> true_rewards;

  std::size_t total_steps() const;
  std::vector<Episode> prefix(std::size_t n_episodes) const;
};

GridDataset generate_grid_dataset(std::uint64_t layout_seed, int max_steps,
                                  int n_episodes, double noise_sigma,
                                  std::uint64_t seed);

/// Per-step RMSE of `inferred` against the dataset's true rewards over the
/// first `n_episodes` episodes.
double dataset_rmse(const GridDataset& data,
                    const std::vector<std::vector<double>>& inferred,
                    std::size_t n_episodes);

InferNetConfig infernet_config_from(const RunConfig& config);

using TrainCheckpointFn =
    std::function<void(std::int64_t step, const InferNetModel& model)>;

/// Trains InferNet on a fixed episode set for `steps` minibatch updates.
InferNetModel train_infernet_offline(const RunConfig& config,
                                     const std::vector<Episode>& episodes,
                                     std::int64_t steps, std::uint64_t seed,
                                     std::int64_t checkpoint_every = 0,
                                     const TrainCheckpointFn& on_checkpoint = {});

/// Algorithm-1 style online run (GridWorld tabular agents or CartPole DQN,
/// chosen by the experiment kind / agent.kind).
RunResult run_online(const RunConfig& config);

/// Offline pipeline: random datasets of growing size, reward inference with
/// InferNet and InferGP, offline Q-learning, online greedy evaluation.
RunResult run_offline(const RunConfig& config);

/// RMSE of inferred vs true rewards as a function of dataset size, with and
/// without reward noise.
RunResult rmse_curve(const RunConfig& config);

/// Wall-clock scaling of InferGP fitting vs InferNet training.
RunResult time_bench(const RunConfig& config);

/// Objective-loss vs true per-step MSE co-descent diagnostic.
RunResult loss_diag(const RunConfig& config);

RunResult run_experiment(const RunConfig& config);

}  // namespace lab
