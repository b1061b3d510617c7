#pragma once

#include "lab/infernet.hpp"

#include <Eigen/Dense>

#include <vector>

namespace lab::gp {

struct KernelConfig {
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double observation_noise_variance = 0.1;
  double jitter = 1e-8;
};

/// Exact GP inference of per-step rewards from episode-sum observations.
/// Each episode contributes one observation: the sum of the latent function
/// over its steps, plus Gaussian noise. Fitting solves the E x E system
/// (A K A^T + sigma_n^2 I) dual = y where A is the episode-sum aggregation
/// matrix over all n step inputs.
class AggregatedGP {
 public:
  AggregatedGP(const KernelConfig& config, std::vector<Episode> episodes,
               const StateActionEncoder& encoder);

  double predict(const Eigen::VectorXd& query) const;  // posterior mean
  std::vector<double> infer_episode(const Episode& episode,
                                    const StateActionEncoder& encoder) const;

  std::size_t num_inputs() const { return static_cast<std::size_t>(inputs_.cols()); }
  std::size_t num_episodes() const { return static_cast<std::size_t>(dual_.size()); }
  const Eigen::VectorXd& dual() const { return dual_; }

 private:
  KernelConfig config_;
  Eigen::MatrixXd inputs_;        // d x n, all steps of all episodes
  Eigen::VectorXd input_sq_norm_; // cached ||x_i||^2
  Eigen::VectorXd step_weight_;   // A^T dual expanded per step (length n)
  Eigen::VectorXd dual_;          // length E

  Eigen::VectorXd kernel_row(const Eigen::VectorXd& query) const;
};

AggregatedGP gp_fit(const KernelConfig& config,
                    const std::vector<Episode>& episodes,
                    const StateActionEncoder& encoder);

double gp_predict(const AggregatedGP& model, const Eigen::VectorXd& query);

std::vector<double> gp_infer_episode(const AggregatedGP& model,
                                     const Episode& episode,
                                     const StateActionEncoder& encoder);

}  // namespace lab::gp
