#include "lab/infernet.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lab {

double delayed_from_immediate(const std::vector<double>& rewards) {
  if (rewards.empty())
    throw std::invalid_argument("delayed_from_immediate: empty reward list");
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum;
}

EpisodeBuffer::EpisodeBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0)
    throw std::invalid_argument("EpisodeBuffer: capacity must be positive");
}

void EpisodeBuffer::push(Episode episode) {
  storage_.push_back(std::move(episode));
  while (storage_.size() > capacity_) storage_.pop_front();
}

StateActionEncoder StateActionEncoder::grid_onehot(int width, int height,
                                                   int n_actions) {
  if (width <= 0 || height <= 0 || n_actions <= 0)
    throw std::invalid_argument("grid_onehot: dimensions must be positive");
  StateActionEncoder e;
  e.scheme = Scheme::GridOneHot;
  e.width = width;
  e.height = height;
  e.n_actions = n_actions;
  return e;
}

StateActionEncoder StateActionEncoder::continuous_concat(int state_dim,
                                                         int n_actions) {
  if (state_dim <= 0 || n_actions <= 0)
    throw std::invalid_argument("continuous_concat: dimensions must be positive");
  StateActionEncoder e;
  e.scheme = Scheme::ContinuousConcat;
  e.state_dim = state_dim;
  e.n_actions = n_actions;
  return e;
}

int StateActionEncoder::dim() const {
  return scheme == Scheme::GridOneHot ? width * height + n_actions
                                      : state_dim + n_actions;
}

Eigen::VectorXd StateActionEncoder::encode_cell(int cell, int action) const {
  if (scheme != Scheme::GridOneHot)
    throw std::invalid_argument("encode_cell: encoder is not grid_onehot");
  if (cell < 0 || cell >= width * height)
    throw std::invalid_argument("encode: grid cell out of range");
  if (action < 0 || action >= n_actions)
    throw std::invalid_argument("encode: action out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  out(cell) = 1.0;
  out(width * height + action) = 1.0;
  return out;
}

Eigen::VectorXd StateActionEncoder::encode(const Eigen::VectorXd& state,
                                           int action) const {
  if (scheme == Scheme::GridOneHot) {
    if (state.size() != 1)
      throw std::invalid_argument("encode: grid state must be a single cell index");
    return encode_cell(static_cast<int>(state(0)), action);
  }
  if (state.size() != state_dim)
    throw std::invalid_argument("encode: state dimension mismatch");
  if (action < 0 || action >= n_actions)
    throw std::invalid_argument("encode: action out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  out.head(state_dim) = state;
  out(state_dim + action) = 1.0;
  return out;
}

InferNetModel::InferNetModel(StateActionEncoder encoder,
                             const InferNetConfig& config, nn::Rng& rng)
    : encoder_(encoder), config_(config) {
  net_ = nn::make_mlp(encoder_.dim(), config.hidden_units, 1,
                      config.activation, config.dropout_rate, rng);
  opt_ = nn::make_adam(net_, config.learning_rate, config.adam_beta1,
                       config.adam_beta2, config.adam_epsilon);
}

Eigen::MatrixXd InferNetModel::encode_episode(const Episode& episode) const {
  if (episode.steps.empty())
    throw std::invalid_argument("encode_episode: empty episode");
  Eigen::MatrixXd inputs(encoder_.dim(),
                         static_cast<Eigen::Index>(episode.steps.size()));
  for (std::size_t t = 0; t < episode.steps.size(); ++t)
    inputs.col(static_cast<Eigen::Index>(t)) =
        encoder_.encode(episode.steps[t].state, episode.steps[t].action);
  return inputs;
}

double InferNetModel::train_minibatch(const EpisodeBuffer& buffer,
                                      int batch_size, nn::Rng& rng) {
  if (buffer.empty())
    throw std::invalid_argument("train_minibatch: empty episode buffer");
  if (batch_size <= 0)
    throw std::invalid_argument("train_minibatch: batch size must be positive");

  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  nn::GradientBuffer mean_grad = nn::zeros_like(net_);
  nn::GradientBuffer episode_grad = nn::zeros_like(net_);
  double mean_loss = 0.0;
  const nn::Mode mode =
      config_.dropout_rate > 0.0 ? nn::Mode::Train : nn::Mode::Eval;
  for (int b = 0; b < batch_size; ++b) {
    const Episode& ep = buffer.at(pick(rng));
    episode_grad.set_zero();
    Eigen::MatrixXd inputs = encode_episode(ep);
    auto [loss, grads] = nn::episode_loss_gradient(net_, inputs,
                                                   ep.delayed_reward, mode, &rng);
    mean_loss += loss;
    mean_grad.add_scaled(grads, 1.0 / batch_size);
  }
  mean_loss /= batch_size;
  if (mean_loss > 0.0) nn::adam_step(net_, opt_, mean_grad);
  else opt_.step_count += 1;  // zero gradient is a fixed point
  return mean_loss;
}

std::vector<double> InferNetModel::infer_rewards(const Episode& episode) const {
  Eigen::MatrixXd inputs = encode_episode(episode);
  Eigen::MatrixXd outputs =
      nn::forward_batch(net_, inputs, nn::Mode::Eval, nullptr);
  std::vector<double> rewards(episode.steps.size());
  for (std::size_t t = 0; t < rewards.size(); ++t)
    rewards[t] = outputs(0, static_cast<Eigen::Index>(t));
  return rewards;
}

Episode InferNetModel::relabel(const Episode& episode) const {
  Episode out = episode;
  std::vector<double> inferred = infer_rewards(episode);
  for (std::size_t t = 0; t < inferred.size(); ++t)
    out.steps[t].reward = inferred[t];
  return out;
}

double InferNetModel::episode_loss(const Episode& episode) const {
  std::vector<double> inferred = infer_rewards(episode);
  double sum = 0.0;
  for (double r : inferred) sum += r;
  const double residual = episode.delayed_reward - sum;
  return residual * residual;
}

// ---------------------------------------------------------------------------
// Checkpoint format: little-endian binary, raw IEEE doubles (bit-exact).

namespace {
constexpr std::uint32_t kMagic = 0x494e4e31;  // "INN1"

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  write_pod<std::int64_t>(os, m.rows());
  write_pod<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_matrix(std::istream& is) {
  const auto rows = read_pod<std::int64_t>(is);
  const auto cols = read_pod<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (1ll << 30))
    throw std::runtime_error("checkpoint: bad matrix shape");
  Eigen::MatrixXd m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return m;
}
}  // namespace

void InferNetModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  write_pod(os, kMagic);
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(encoder_.scheme));
  write_pod<std::int32_t>(os, encoder_.width);
  write_pod<std::int32_t>(os, encoder_.height);
  write_pod<std::int32_t>(os, encoder_.state_dim);
  write_pod<std::int32_t>(os, encoder_.n_actions);
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(net_.hidden_activation));
  write_pod<double>(os, net_.leaky_slope);
  write_pod<double>(os, net_.dropout_rate);
  write_pod<double>(os, config_.learning_rate);
  write_pod<double>(os, config_.adam_beta1);
  write_pod<double>(os, config_.adam_beta2);
  write_pod<double>(os, config_.adam_epsilon);
  write_pod<std::int32_t>(os, config_.batch_episodes);
  write_pod<std::int64_t>(os, opt_.step_count);
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(net_.layers.size()));
  for (const auto& layer : net_.layers) {
    write_matrix(os, layer.weights);
    write_matrix(os, layer.biases);
  }
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    write_matrix(os, opt_.first_moment[l].weights);
    write_matrix(os, opt_.first_moment[l].biases);
    write_matrix(os, opt_.second_moment[l].weights);
    write_matrix(os, opt_.second_moment[l].biases);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

InferNetModel InferNetModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  if (read_pod<std::uint32_t>(is) != kMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  InferNetModel model;
  model.encoder_.scheme =
      static_cast<StateActionEncoder::Scheme>(read_pod<std::int32_t>(is));
  model.encoder_.width = read_pod<std::int32_t>(is);
  model.encoder_.height = read_pod<std::int32_t>(is);
  model.encoder_.state_dim = read_pod<std::int32_t>(is);
  model.encoder_.n_actions = read_pod<std::int32_t>(is);
  model.net_.hidden_activation =
      static_cast<nn::Activation>(read_pod<std::int32_t>(is));
  model.net_.leaky_slope = read_pod<double>(is);
  model.net_.dropout_rate = read_pod<double>(is);
  model.config_.learning_rate = read_pod<double>(is);
  model.config_.adam_beta1 = read_pod<double>(is);
  model.config_.adam_beta2 = read_pod<double>(is);
  model.config_.adam_epsilon = read_pod<double>(is);
  model.config_.batch_episodes = read_pod<std::int32_t>(is);
  const auto step_count = read_pod<std::int64_t>(is);
  const auto num_layers = read_pod<std::int32_t>(is);
  if (num_layers <= 0 || num_layers > 64)
    throw std::runtime_error("checkpoint: bad layer count");
  model.config_.activation = model.net_.hidden_activation;
  model.config_.dropout_rate = model.net_.dropout_rate;
  for (int l = 0; l < num_layers; ++l) {
    nn::DenseLayer layer;
    layer.weights = read_matrix(is);
    layer.biases = read_matrix(is);
    model.net_.layers.push_back(std::move(layer));
  }
  model.config_.hidden_units.clear();
  for (int l = 0; l + 1 < num_layers; ++l)
    model.config_.hidden_units.push_back(model.net_.layers[l].out_dim());
  model.opt_ = nn::make_adam(model.net_, model.config_.learning_rate,
                             model.config_.adam_beta1, model.config_.adam_beta2,
                             model.config_.adam_epsilon);
  model.opt_.step_count = step_count;
  for (int l = 0; l < num_layers; ++l) {
    model.opt_.first_moment[l].weights = read_matrix(is);
    model.opt_.first_moment[l].biases = read_matrix(is);
    model.opt_.second_moment[l].weights = read_matrix(is);
    model.opt_.second_moment[l].biases = read_matrix(is);
  }
  return model;
}

}  // namespace lab
