#include "lab/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace lab::nn {

namespace {

void check_shapes(const MLPModel& model, const std::vector<DenseLayer>& other,
                  const char* what) {
  if (other.size() != model.layers.size())
    throw std::invalid_argument(std::string(what) + ": layer count mismatch");
  for (std::size_t l = 0; l < other.size(); ++l) {
    if (other[l].weights.rows() != model.layers[l].weights.rows() ||
        other[l].weights.cols() != model.layers[l].weights.cols() ||
        other[l].biases.size() != model.layers[l].biases.size())
      throw std::invalid_argument(std::string(what) + ": shape mismatch at layer " +
                                  std::to_string(l));
  }
}

inline double activate(double z, Activation act, double slope) {
  if (z >= 0.0) return z;
  return act == Activation::LeakyRelu ? slope * z : 0.0;
}

inline double activate_grad(double z, Activation act, double slope) {
  if (z >= 0.0) return 1.0;
  return act == Activation::LeakyRelu ? slope : 0.0;
}

}  // namespace

std::size_t MLPModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

MLPModel make_mlp(int input_dim, const std::vector<int>& hidden_units,
                  int output_dim, Activation activation, double dropout_rate,
                  Rng& rng, double leaky_slope) {
  if (input_dim <= 0 || output_dim <= 0)
    throw std::invalid_argument("make_mlp: dimensions must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("make_mlp: dropout_rate must be in [0,1)");
  MLPModel model;
  model.hidden_activation = activation;
  model.leaky_slope = leaky_slope;
  model.dropout_rate = dropout_rate;
  int prev = input_dim;
  std::vector<int> dims = hidden_units;
  dims.push_back(output_dim);
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("make_mlp: layer width must be positive");
    double limit = std::sqrt(6.0 / static_cast<double>(prev));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer;
    layer.weights = Matrix::NullaryExpr(d, prev, [&]() { return u(rng); });
    layer.biases = Vector::Zero(d);
    model.layers.push_back(std::move(layer));
    prev = d;
  }
  return model;
}

void GradientBuffer::set_zero() {
  for (auto& g : grads) {
    g.weights.setZero();
    g.biases.setZero();
  }
}

void GradientBuffer::add_scaled(const GradientBuffer& other, double scale) {
  for (std::size_t l = 0; l < grads.size(); ++l) {
    grads[l].weights += scale * other.grads[l].weights;
    grads[l].biases += scale * other.grads[l].biases;
  }
}

void GradientBuffer::scale(double factor) {
  for (auto& g : grads) {
    g.weights *= factor;
    g.biases *= factor;
  }
}

GradientBuffer zeros_like(const MLPModel& model) {
  GradientBuffer buf;
  for (const auto& l : model.layers) {
    DenseLayer g;
    g.weights = Matrix::Zero(l.weights.rows(), l.weights.cols());
    g.biases = Vector::Zero(l.biases.size());
    buf.grads.push_back(std::move(g));
  }
  return buf;
}

Matrix forward_batch(const MLPModel& model, const Matrix& inputs, Mode mode,
                     Rng* rng, ForwardTrace* trace) {
  if (model.layers.empty()) throw std::invalid_argument("forward: empty model");
  if (inputs.rows() != model.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch (got " +
                                std::to_string(inputs.rows()) + ", expected " +
                                std::to_string(model.input_dim()) + ")");
  const bool use_dropout =
      mode == Mode::Train && model.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr)
    throw std::invalid_argument("forward: train-mode dropout requires an rng");

  const std::size_t num_layers = model.layers.size();
  if (trace) {
    trace->activations.assign(1, inputs);
    trace->preactivations.clear();
    trace->dropout_masks.clear();
  }

  Matrix a = inputs;
  for (std::size_t l = 0; l < num_layers; ++l) {
    Matrix z = (model.layers[l].weights * a).colwise() + model.layers[l].biases;
    if (trace) trace->preactivations.push_back(z);
    if (l + 1 == num_layers) {
      a = std::move(z);  // linear head
    } else {
      a = z.unaryExpr([&](double v) {
        return activate(v, model.hidden_activation, model.leaky_slope);
      });
      if (use_dropout) {
        std::bernoulli_distribution keep(1.0 - model.dropout_rate);
        const double inv_keep = 1.0 / (1.0 - model.dropout_rate);
        Matrix mask = Matrix::NullaryExpr(a.rows(), a.cols(), [&]() {
          return keep(*rng) ? inv_keep : 0.0;
        });
        a = a.cwiseProduct(mask);
        if (trace) trace->dropout_masks.push_back(std::move(mask));
      } else if (trace) {
        trace->dropout_masks.emplace_back();
      }
    }
    if (trace) trace->activations.push_back(a);
  }
  return a;
}

Vector forward(const MLPModel& model, const Vector& input, Mode mode,
               Rng& rng) {
  return forward_batch(model, input, mode, &rng);
}

Vector forward(const MLPModel& model, const Vector& input) {
  return forward_batch(model, input, Mode::Eval, nullptr);
}

void backward(const MLPModel& model, const ForwardTrace& trace,
              const Matrix& output_grad, GradientBuffer& out) {
  check_shapes(model, out.grads, "backward");
  const int num_layers = static_cast<int>(model.layers.size());
  Matrix delta = output_grad;  // dL/dz for the current layer
  for (int l = num_layers - 1; l >= 0; --l) {
    out.grads[l].weights.noalias() += delta * trace.activations[l].transpose();
    out.grads[l].biases += delta.rowwise().sum();
    if (l == 0) break;
    Matrix da = model.layers[l].weights.transpose() * delta;
    // chain through dropout (if any) then the hidden activation of layer l-1
    if (static_cast<std::size_t>(l - 1) < trace.dropout_masks.size() &&
        trace.dropout_masks[l - 1].size() > 0)
      da = da.cwiseProduct(trace.dropout_masks[l - 1]);
    delta = da.cwiseProduct(trace.preactivations[l - 1].unaryExpr([&](double z) {
      return activate_grad(z, model.hidden_activation, model.leaky_slope);
    }));
  }
}

std::pair<double, GradientBuffer> episode_loss_gradient(
    const MLPModel& model, const Matrix& episode_inputs, double delayed_reward,
    Mode mode, Rng* rng) {
  if (episode_inputs.cols() == 0)
    throw std::invalid_argument("episode_loss_gradient: empty episode");
  if (!std::isfinite(delayed_reward))
    throw std::invalid_argument("episode_loss_gradient: non-finite delayed reward");
  if (model.output_dim() != 1)
    throw std::invalid_argument("episode_loss_gradient: model must have scalar output");

  ForwardTrace trace;
  Matrix outputs = forward_batch(model, episode_inputs, mode, rng, &trace);
  const double residual = delayed_reward - outputs.sum();
  const double loss = residual * residual;

  // dL/dy_t = -2 * residual for every timestep.
  Matrix output_grad = Matrix::Constant(1, episode_inputs.cols(), -2.0 * residual);
  GradientBuffer grads = zeros_like(model);
  backward(model, trace, output_grad, grads);
  return {loss, std::move(grads)};
}

std::pair<double, GradientBuffer> episode_loss_gradient(
    const MLPModel& model, const std::vector<Vector>& episode_inputs,
    double delayed_reward) {
  if (episode_inputs.empty())
    throw std::invalid_argument("episode_loss_gradient: empty episode");
  Matrix inputs(episode_inputs.front().size(), episode_inputs.size());
  for (std::size_t t = 0; t < episode_inputs.size(); ++t) {
    if (episode_inputs[t].size() != inputs.rows())
      throw std::invalid_argument("episode_loss_gradient: inconsistent input dims");
    inputs.col(static_cast<Eigen::Index>(t)) = episode_inputs[t];
  }
  return episode_loss_gradient(model, inputs, delayed_reward);
}

AdamState make_adam(const MLPModel& model, double learning_rate, double beta1,
                    double beta2, double epsilon) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  GradientBuffer z = zeros_like(model);
  state.first_moment = z.grads;
  state.second_moment = z.grads;
  return state;
}

void adam_step(MLPModel& model, AdamState& state, const GradientBuffer& grads) {
  check_shapes(model, grads.grads, "adam_step");
  check_shapes(model, state.first_moment, "adam_step");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].weights, state.first_moment[l].weights,
           state.second_moment[l].weights, grads.grads[l].weights);
    update(model.layers[l].biases, state.first_moment[l].biases,
           state.second_moment[l].biases, grads.grads[l].biases);
  }
}

}  // namespace lab::nn
