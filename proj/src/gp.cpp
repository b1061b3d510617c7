#include "lab/gp.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace lab::gp {

namespace {
constexpr Eigen::Index kRowBlock = 512;
}

AggregatedGP::AggregatedGP(const KernelConfig& config,
                           std::vector<Episode> episodes,
                           const StateActionEncoder& encoder)
    : config_(config) {
  if (episodes.empty()) throw std::invalid_argument("gp_fit: no episodes");
  if (config.lengthscale <= 0.0 || config.signal_variance <= 0.0)
    throw std::invalid_argument("gp_fit: kernel hyperparameters must be positive");
  if (config.observation_noise_variance < 0.0)
    throw std::invalid_argument("gp_fit: noise variance must be >= 0");

  const Eigen::Index E = static_cast<Eigen::Index>(episodes.size());
  Eigen::Index n = 0;
  for (const auto& ep : episodes) {
    if (ep.steps.empty()) throw std::invalid_argument("gp_fit: empty episode");
    n += static_cast<Eigen::Index>(ep.steps.size());
  }

  inputs_.resize(encoder.dim(), n);
  std::vector<Eigen::Index> episode_of(n);
  Eigen::VectorXd y(E);
  {
    Eigen::Index i = 0;
    for (Eigen::Index e = 0; e < E; ++e) {
      y(e) = episodes[e].delayed_reward;
      for (const Step& s : episodes[e].steps) {
        inputs_.col(i) = encoder.encode(s.state, s.action);
        episode_of[i] = e;
        ++i;
      }
    }
  }
  input_sq_norm_ = inputs_.colwise().squaredNorm();

  // M = A K A^T, built blockwise so K is never held in full.
  const double inv_two_l2 = 1.0 / (2.0 * config.lengthscale * config.lengthscale);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(E, E);
  for (Eigen::Index r0 = 0; r0 < n; r0 += kRowBlock) {
    const Eigen::Index rows = std::min(kRowBlock, n - r0);
    // squared distances for this row block, then the RBF kernel
    Eigen::MatrixXd block =
        (-2.0 * inputs_.middleCols(r0, rows).transpose() * inputs_).eval();
    block.colwise() += input_sq_norm_.segment(r0, rows);
    block.rowwise() += input_sq_norm_.transpose();
    block = (config.signal_variance *
             (-block.array().cwiseMax(0.0) * inv_two_l2).exp())
                .matrix();
    // reduce columns by episode: C(i, e) = sum_{j in e} K(i, j)
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(rows, E);
    for (Eigen::Index j = 0; j < n; ++j) C.col(episode_of[j]) += block.col(j);
    // reduce rows by episode
    for (Eigen::Index i = 0; i < rows; ++i)
      M.row(episode_of[r0 + i]) += C.row(i);
  }
  M.diagonal().array() += config.observation_noise_variance + config.jitter;

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    M.diagonal().array() += 1e-6;  // one retry with a larger jitter
    llt.compute(M);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "gp_fit: aggregated kernel system is not positive definite (E=" +
          std::to_string(E) + ", n=" + std::to_string(n) + ")");
  }
  dual_ = llt.solve(y);

  step_weight_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) step_weight_(i) = dual_(episode_of[i]);
}

Eigen::VectorXd AggregatedGP::kernel_row(const Eigen::VectorXd& query) const {
  const double inv_two_l2 =
      1.0 / (2.0 * config_.lengthscale * config_.lengthscale);
  Eigen::VectorXd d2 = input_sq_norm_.array() + query.squaredNorm() -
                       2.0 * (inputs_.transpose() * query).array();
  return (config_.signal_variance *
          (-d2.array().cwiseMax(0.0) * inv_two_l2).exp())
      .matrix();
}

double AggregatedGP::predict(const Eigen::VectorXd& query) const {
  if (query.size() != inputs_.rows())
    throw std::invalid_argument("gp_predict: query dimension mismatch");
  return kernel_row(query).dot(step_weight_);
}

std::vector<double> AggregatedGP::infer_episode(
    const Episode& episode, const StateActionEncoder& encoder) const {
  std::vector<double> out;
  out.reserve(episode.steps.size());
  for (const Step& s : episode.steps)
    out.push_back(predict(encoder.encode(s.state, s.action)));
  return out;
}

AggregatedGP gp_fit(const KernelConfig& config,
                    const std::vector<Episode>& episodes,
                    const StateActionEncoder& encoder) {
  return AggregatedGP(config, episodes, encoder);
}

double gp_predict(const AggregatedGP& model, const Eigen::VectorXd& query) {
  return model.predict(query);
}

std::vector<double> gp_infer_episode(const AggregatedGP& model,
                                     const Episode& episode,
                                     const StateActionEncoder& encoder) {
  return model.infer_episode(episode, encoder);
}

}  // namespace lab::gp
