#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace lab::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class Activation { LeakyRelu, Relu };
enum class Mode { Train, Eval };

struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  Vector biases;   // out_dim

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
};

/// Dense feed-forward network with a linear output head. Hidden layers share
/// one activation; dropout (inverted) applies to hidden activations in train
/// mode only.
struct MLPModel {
  std::vector<DenseLayer> layers;
  Activation hidden_activation = Activation::LeakyRelu;
  double leaky_slope = 0.01;
  double dropout_rate = 0.0;

  int input_dim() const { return layers.front().in_dim(); }
  int output_dim() const { return layers.back().out_dim(); }
  std::size_t num_parameters() const;
};

/// He-style uniform fan-in initialization.
MLPModel make_mlp(int input_dim, const std::vector<int>& hidden_units,
                  int output_dim, Activation activation, double dropout_rate,
                  Rng& rng, double leaky_slope = 0.01);

/// Per-parameter accumulator congruent with an MLPModel.
struct GradientBuffer {
  std::vector<DenseLayer> grads;

  void set_zero();
  void add_scaled(const GradientBuffer& other, double scale);
  void scale(double factor);
};

GradientBuffer zeros_like(const MLPModel& model);

/// Intermediates kept by forward_batch for the backward pass.
struct ForwardTrace {
  std::vector<Matrix> activations;     // activations[0] is the input batch
  std::vector<Matrix> preactivations;  // z_l per layer
  std::vector<Matrix> dropout_masks;   // per hidden layer; empty when unused
};

/// Forward pass over a batch (one input per column).
Matrix forward_batch(const MLPModel& model, const Matrix& inputs, Mode mode,
                     Rng* rng, ForwardTrace* trace = nullptr);

Vector forward(const MLPModel& model, const Vector& input, Mode mode,
               Rng& rng);
Vector forward(const MLPModel& model, const Vector& input);  // eval mode

/// Backpropagates dL/d(output batch) through a recorded trace and accumulates
/// parameter gradients into `out`.
void backward(const MLPModel& model, const ForwardTrace& trace,
              const Matrix& output_grad, GradientBuffer& out);

/// Eq.-style episode loss: (R_del - sum_t f(x_t))^2 for a scalar-output
/// model applied independently per timestep (columns of `episode_inputs`).
/// Returns the loss and its analytic gradient.
std::pair<double, GradientBuffer> episode_loss_gradient(
    const MLPModel& model, const Matrix& episode_inputs, double delayed_reward,
    Mode mode = Mode::Eval, Rng* rng = nullptr);

std::pair<double, GradientBuffer> episode_loss_gradient(
    const MLPModel& model, const std::vector<Vector>& episode_inputs,
    double delayed_reward);

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const MLPModel& model, double learning_rate,
                    double beta1 = 0.9, double beta2 = 0.999,
                    double epsilon = 1e-8);

/// One Adam update with bias correction. Shapes must be congruent.
void adam_step(MLPModel& model, AdamState& state, const GradientBuffer& grads);

}  // namespace lab::nn
