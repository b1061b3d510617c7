#include "lab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lab::agents {

double EpsilonSchedule::at(std::int64_t episode) const {
  if (horizon <= 0 || episode >= horizon) return end;
  const double frac = static_cast<double>(episode) / static_cast<double>(horizon);
  return start + (end - start) * frac;
}

int epsilon_greedy(std::span<const double> values, double epsilon, Rng& rng) {
  if (values.empty())
    throw std::invalid_argument("epsilon_greedy: empty value vector");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (epsilon > 0.0 && u(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(values.size()) - 1);
    return pick(rng);
  }
  const double best = *std::max_element(values.begin(), values.end());
  std::vector<int> ties;
  for (int i = 0; i < static_cast<int>(values.size()); ++i)
    if (values[i] == best) ties.push_back(i);
  if (ties.size() == 1) return ties.front();
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return ties[pick(rng)];
}

QTable::QTable(int n_actions, double alpha, double gamma)
    : n_actions_(n_actions), alpha_(alpha), gamma_(gamma) {
  if (n_actions <= 0) throw std::invalid_argument("QTable: n_actions must be positive");
  if (gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("QTable: gamma must be in (0,1]");
}

double QTable::get(std::int64_t state, int action) const {
  auto it = values_.find(key(state, action));
  return it == values_.end() ? 0.0 : it->second;
}

std::vector<double> QTable::action_values(std::int64_t state) const {
  std::vector<double> out(n_actions_);
  for (int a = 0; a < n_actions_; ++a) out[a] = get(state, a);
  return out;
}

void QTable::update(std::int64_t s, int a, double r, std::int64_t s_next,
                    bool done) {
  double bootstrap = 0.0;
  if (!done) {
    bootstrap = get(s_next, 0);
    for (int an = 1; an < n_actions_; ++an)
      bootstrap = std::max(bootstrap, get(s_next, an));
  }
  const double target = r + gamma_ * bootstrap;
  double& q = values_[key(s, a)];
  q += alpha_ * (target - q);
}

std::string QTable::dump() const {
  // Deterministic ordering for regression comparisons.
  std::map<std::int64_t, double> sorted(values_.begin(), values_.end());
  std::ostringstream os;
  os.precision(17);
  for (const auto& [k, v] : sorted)
    os << k / n_actions_ << ' ' << k % n_actions_ << ' ' << v << '\n';
  return os.str();
}

TraceKind trace_kind_from_string(const std::string& name) {
  if (name == "dutch") return TraceKind::Dutch;
  if (name == "accumulating") return TraceKind::Accumulating;
  if (name == "replacing") return TraceKind::Replacing;
  throw std::invalid_argument("unknown trace kind: " + name);
}

TDLambdaAgent::TDLambdaAgent(int n_actions, double alpha, double gamma,
                             double lambda, TraceKind traces)
    : n_actions_(n_actions), alpha_(alpha), gamma_(gamma), lambda_(lambda),
      kind_(traces) {
  if (n_actions <= 0)
    throw std::invalid_argument("TDLambdaAgent: n_actions must be positive");
}

void TDLambdaAgent::begin_episode() { traces_.clear(); }

double TDLambdaAgent::get(std::int64_t state, int action) const {
  auto it = values_.find(key(state, action));
  return it == values_.end() ? 0.0 : it->second;
}

double TDLambdaAgent::trace(std::int64_t state, int action) const {
  auto it = traces_.find(key(state, action));
  return it == traces_.end() ? 0.0 : it->second;
}

std::vector<double> TDLambdaAgent::action_values(std::int64_t state) const {
  std::vector<double> out(n_actions_);
  for (int a = 0; a < n_actions_; ++a) out[a] = get(state, a);
  return out;
}

void TDLambdaAgent::update(std::int64_t s, int a, double r, std::int64_t s_next,
                           int a_next, bool done) {
  const double q_sa = get(s, a);
  const double q_next = done ? 0.0 : get(s_next, a_next);
  const double delta = r + gamma_ * q_next - q_sa;
  const double decay = gamma_ * lambda_;

  double& e_sa = traces_[key(s, a)];
  switch (kind_) {
    case TraceKind::Dutch:
      e_sa = decay * e_sa + (1.0 - alpha_ * decay * e_sa);
      break;
    case TraceKind::Accumulating:
      e_sa = decay * e_sa + 1.0;
      break;
    case TraceKind::Replacing:
      e_sa = 1.0;
      break;
  }

  for (auto it = traces_.begin(); it != traces_.end();) {
    values_[it->first] += alpha_ * delta * it->second;
    it->second *= decay;
    if (std::abs(it->second) < 1e-12) it = traces_.erase(it);
    else ++it;
  }
}

// ---------------------------------------------------------------------------

DQNAgent::DQNAgent(int state_dim, int n_actions, const DQNConfig& config,
                   Rng& rng)
    : config_(config), n_actions_(n_actions) {
  online_ = nn::make_mlp(state_dim, config.hidden_units, n_actions,
                         nn::Activation::Relu, 0.0, rng);
  target_ = online_;
  opt_ = nn::make_adam(online_, config.learning_rate);
}

void DQNAgent::observe(Transition t) {
  replay_.push_back(std::move(t));
  while (replay_.size() > config_.replay_capacity) replay_.pop_front();
}

std::vector<double> DQNAgent::q_values(const Eigen::VectorXd& state) const {
  Eigen::VectorXd q = nn::forward(online_, state);
  return {q.data(), q.data() + q.size()};
}

int DQNAgent::act(const Eigen::VectorXd& state, double epsilon, Rng& rng) const {
  std::vector<double> q = q_values(state);
  return epsilon_greedy(q, epsilon, rng);
}

double DQNAgent::train_step(Rng& rng) {
  const int batch = config_.batch_size;
  if (replay_.size() < static_cast<std::size_t>(batch))
    throw std::invalid_argument("DQNAgent::train_step: replay smaller than batch");

  std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
  const int state_dim = online_.input_dim();
  Eigen::MatrixXd states(state_dim, batch);
  Eigen::MatrixXd next_states(state_dim, batch);
  std::vector<const Transition*> sampled(batch);
  for (int i = 0; i < batch; ++i) {
    sampled[i] = &replay_[pick(rng)];
    states.col(i) = sampled[i]->state;
    next_states.col(i) = sampled[i]->next_state;
  }

  Eigen::MatrixXd next_q =
      nn::forward_batch(target_, next_states, nn::Mode::Eval, nullptr);
  nn::ForwardTrace trace;
  Eigen::MatrixXd q = nn::forward_batch(online_, states, nn::Mode::Eval,
                                        nullptr, &trace);

  // Squared TD error on the taken action only; mean over the batch.
  Eigen::MatrixXd output_grad = Eigen::MatrixXd::Zero(n_actions_, batch);
  double loss = 0.0;
  for (int i = 0; i < batch; ++i) {
    const Transition& t = *sampled[i];
    const double bootstrap = t.done ? 0.0 : next_q.col(i).maxCoeff();
    const double target = t.reward + config_.gamma * bootstrap;
    const double err = q(t.action, i) - target;
    loss += err * err / batch;
    output_grad(t.action, i) = 2.0 * err / batch;
  }
  nn::GradientBuffer grads = nn::zeros_like(online_);
  nn::backward(online_, trace, output_grad, grads);
  nn::adam_step(online_, opt_, grads);

  train_steps_ += 1;
  if (train_steps_ % config_.target_sync_period == 0) target_ = online_;
  return loss;
}

}  // namespace lab::agents
