#include "lab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace lab {

namespace {

std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Eigen::VectorXd cell_state(int cell) {
  Eigen::VectorXd v(1);
  v(0) = static_cast<double>(cell);
  return v;
}

StateActionEncoder grid_encoder() {
  return StateActionEncoder::grid_onehot(env::GridWorld::kWidth,
                                         env::GridWorld::kHeight,
                                         env::GridWorld::kNumActions);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

/// Greedy (noise-free) evaluation of a tabular policy on the grid.
double greedy_grid_return(const env::GridWorld& layout,
                          const std::function<std::vector<double>(int)>& values,
                          int episodes, agents::Rng& rng) {
  env::GridWorld env(layout.layout_seed(), layout.max_steps());
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int cell = env.reset();
    double ret = 0.0;
    while (!env.done()) {
      const int a = agents::epsilon_greedy(values(cell), 0.0, rng);
      auto r = env.step(a);
      ret += r.reward;
      cell = r.next_cell;
    }
    total += ret;
  }
  return total / episodes;
}

}  // namespace

std::size_t GridDataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.length();
  return n;
}

std::vector<Episode> GridDataset::prefix(std::size_t n_episodes) const {
  if (n_episodes > episodes.size())
    throw std::invalid_argument("GridDataset::prefix: not enough episodes");
  return {episodes.begin(), episodes.begin() + n_episodes};
}

GridDataset generate_grid_dataset(std::uint64_t layout_seed, int max_steps,
                                  int n_episodes, double noise_sigma,
                                  std::uint64_t seed) {
  GridDataset data;
  env::GridWorld env(layout_seed, max_steps);
  agents::Rng rng(substream(seed, 11));
  env::NoiseModel noise(noise_sigma, substream(seed, 12));
  std::uniform_int_distribution<int> pick(0, env::GridWorld::kNumActions - 1);
  for (int e = 0; e < n_episodes; ++e) {
    Episode ep;
    std::vector<double> true_r;
    int cell = env.reset();
    double delayed = 0.0;
    while (!env.done()) {
      const int a = pick(rng);
      auto r = env.step(a);
      const double observed = noise.apply(r.reward);
      ep.steps.push_back(Step{cell_state(cell), a, observed,
                              cell_state(r.next_cell)});
      true_r.push_back(r.reward);
      delayed += observed;
      cell = r.next_cell;
    }
    ep.delayed_reward = delayed;
    ep.terminated = cell == env.terminal_cell();
    data.episodes.push_back(std::move(ep));
    data.true_rewards.push_back(std::move(true_r));
  }
  return data;
}

double dataset_rmse(const GridDataset& data,
                    const std::vector<std::vector<double>>& inferred,
                    std::size_t n_episodes) {
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    for (std::size_t t = 0; t < data.true_rewards[e].size(); ++t) {
      const double d = inferred[e][t] - data.true_rewards[e][t];
      sq += d * d;
      ++n;
    }
  }
  return std::sqrt(sq / n);
}

InferNetConfig infernet_config_from(const RunConfig& config) {
  InferNetConfig c;
  c.hidden_units.assign(config.get_int("infernet.hidden_layers"),
                        config.get_int("infernet.units"));
  c.activation = config.get("infernet.activation") == "relu"
                     ? nn::Activation::Relu
                     : nn::Activation::LeakyRelu;
  c.dropout_rate = config.get_double("infernet.dropout");
  c.learning_rate = config.get_double("infernet.lr");
  c.batch_episodes = config.get_int("infernet.batch_episodes");
  return c;
}

InferNetModel train_infernet_offline(const RunConfig& config,
                                     const std::vector<Episode>& episodes,
                                     std::int64_t steps, std::uint64_t seed,
                                     std::int64_t checkpoint_every,
                                     const TrainCheckpointFn& on_checkpoint) {
  if (episodes.empty())
    throw std::invalid_argument("train_infernet_offline: no episodes");
  nn::Rng rng(substream(seed, 21));
  InferNetModel model(grid_encoder(), infernet_config_from(config), rng);
  EpisodeBuffer buffer(episodes.size());
  for (const auto& e : episodes) buffer.push(e);
  const int batch = model.config().batch_episodes;
  for (std::int64_t s = 1; s <= steps; ++s) {
    model.train_minibatch(buffer, batch, rng);
    if (checkpoint_every > 0 && on_checkpoint &&
        (s % checkpoint_every == 0 || s == steps))
      on_checkpoint(s, model);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Online GridWorld (Algorithm-1 loop, tabular agents)

namespace {

struct OnlineGridSeedResult {
  std::vector<MetricPoint> eval_return;
};

/// Replay of one relabeled episode through a tabular learner.
void replay_episode_q(agents::QTable& q, const Episode& ep) {
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    const Step& s = ep.steps[t];
    const bool done = (t + 1 == ep.steps.size()) && ep.terminated;
    q.update(static_cast<std::int64_t>(s.state(0)), s.action, s.reward,
             static_cast<std::int64_t>(s.next_state(0)), done);
  }
}

void replay_episode_td(agents::TDLambdaAgent& td, const Episode& ep) {
  td.begin_episode();
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    const Step& s = ep.steps[t];
    const bool last = t + 1 == ep.steps.size();
    const int a_next = last ? 0 : ep.steps[t + 1].action;
    const bool done = last && ep.terminated;
    td.update(static_cast<std::int64_t>(s.state(0)), s.action, s.reward,
              static_cast<std::int64_t>(s.next_state(0)), a_next, done);
  }
}

OnlineGridSeedResult run_online_grid_seed(const RunConfig& config,
                                          std::uint64_t seed) {
  const std::uint64_t layout_seed = config.get_i64("env.layout_seed");
  const int max_steps = config.get_int("env.max_steps");
  const double sigma = config.get_double("noise.sigma");
  const env::RewardMode mode =
      env::reward_mode_from_string(config.get("reward_mode"));
  const std::string agent_kind = config.get("agent.kind");
  const std::int64_t train_episodes = config.get_i64("agent.train_episodes");
  const int eval_every = config.get_int("eval.every");
  const int eval_episodes = config.get_int("eval.episodes");
  const int updates_per_step = config.get_int("agent.updates_per_step");

  env::GridWorld env(layout_seed, max_steps);
  env::NoiseModel noise(sigma, substream(seed, 1));
  agents::Rng agent_rng(substream(seed, 2));
  agents::Rng eval_rng(substream(seed, 3));
  nn::Rng infer_rng(substream(seed, 4));
  agents::Rng random_policy_rng(substream(seed, 5));

  agents::QTable q(env::GridWorld::kNumActions, config.get_double("agent.alpha"),
                   config.get_double("agent.gamma"));
  agents::TDLambdaAgent td(env::GridWorld::kNumActions,
                           config.get_double("td.alpha"),
                           config.get_double("agent.gamma"),
                           config.get_double("td.lambda"),
                           agents::trace_kind_from_string(config.get("td.traces")));
  const bool use_td = agent_kind == "tdlambda";
  auto action_values = [&](int cell) {
    return use_td ? td.action_values(cell) : q.action_values(cell);
  };

  agents::EpsilonSchedule eps{config.get_double("agent.epsilon_start"),
                              config.get_double("agent.epsilon_end"),
                              std::max<std::int64_t>(1, train_episodes / 2)};

  // InferNet machinery (inferred mode only)
  const bool inferred = mode == env::RewardMode::Inferred;
  std::unique_ptr<InferNetModel> model;
  EpisodeBuffer buffer(static_cast<std::size_t>(config.get_i64("infernet.buffer")));
  std::deque<Episode> relabeled;
  const std::size_t relabeled_cap = buffer.capacity();
  std::int64_t infernet_budget = config.get_i64("infernet.train_steps");
  const int infernet_batch = config.get_int("infernet.batch_episodes");
  const int train_every = std::max(1, config.get_int("infernet.train_every"));

  if (inferred) {
    model = std::make_unique<InferNetModel>(grid_encoder(),
                                            infernet_config_from(config),
                                            infer_rng);
    // Phase 1: fill the buffer from a random policy, training as we go,
    // then spend the pretraining budget.
    const std::int64_t pretrain_episodes =
        config.get_i64("infernet.pretrain_episodes");
    std::uniform_int_distribution<int> pick(0, env::GridWorld::kNumActions - 1);
    for (std::int64_t k = 0; k < pretrain_episodes; ++k) {
      Episode ep;
      int cell = env.reset();
      double delayed = 0.0;
      while (!env.done()) {
        const int a = pick(random_policy_rng);
        auto r = env.step(a);
        const double observed = noise.apply(r.reward);
        ep.steps.push_back(Step{cell_state(cell), a, observed,
                                cell_state(r.next_cell)});
        delayed += observed;
        cell = r.next_cell;
      }
      ep.delayed_reward = delayed;
      ep.terminated = cell == env.terminal_cell();
      buffer.push(std::move(ep));
      if (infernet_budget > 0) {
        model->train_minibatch(buffer, infernet_batch, infer_rng);
        --infernet_budget;
      }
    }
    std::int64_t pretrain_steps = config.get_i64("infernet.pretrain_steps");
    while (pretrain_steps-- > 0 && infernet_budget-- > 0)
      model->train_minibatch(buffer, infernet_batch, infer_rng);
  }

  OnlineGridSeedResult result;
  std::int64_t global_step = 0;
  for (std::int64_t episode = 0; episode < train_episodes; ++episode) {
    const double epsilon = eps.at(episode);
    Episode tmp;
    int cell = env.reset();
    double delayed = 0.0;
    int a = agents::epsilon_greedy(action_values(cell), epsilon, agent_rng);
    if (use_td && !inferred) td.begin_episode();
    while (!env.done()) {
      auto r = env.step(a);
      const double observed = noise.apply(r.reward);
      delayed += observed;
      tmp.steps.push_back(Step{cell_state(cell), a, observed,
                               cell_state(r.next_cell)});
      const bool done = r.done;
      const int a_next = done ? 0
                              : agents::epsilon_greedy(action_values(r.next_cell),
                                                       epsilon, agent_rng);
      if (mode == env::RewardMode::Immediate) {
        if (use_td)
          td.update(cell, a, observed, r.next_cell, a_next,
                    done && !r.truncated);
        else
          q.update(cell, a, observed, r.next_cell, done && !r.truncated);
      } else if (mode == env::RewardMode::Delayed) {
        const double stream_reward = done ? delayed : 0.0;
        if (use_td)
          td.update(cell, a, stream_reward, r.next_cell, a_next,
                    done && !r.truncated);
        else
          q.update(cell, a, stream_reward, r.next_cell, done && !r.truncated);
      } else {
        // Agent trains on previously relabeled data only.
        if (!use_td && !relabeled.empty()) {
          std::uniform_int_distribution<std::size_t> pick_ep(0, relabeled.size() - 1);
          for (int u = 0; u < updates_per_step; ++u) {
            const Episode& ep = relabeled[pick_ep(agent_rng)];
            std::uniform_int_distribution<std::size_t> pick_t(0, ep.steps.size() - 1);
            const std::size_t t = pick_t(agent_rng);
            const Step& s = ep.steps[t];
            const bool tdone = (t + 1 == ep.steps.size()) && ep.terminated;
            q.update(static_cast<std::int64_t>(s.state(0)), s.action, s.reward,
                     static_cast<std::int64_t>(s.next_state(0)), tdone);
          }
        }
        if (infernet_budget > 0 && global_step % train_every == 0) {
          model->train_minibatch(buffer, infernet_batch, infer_rng);
          --infernet_budget;
        }
      }
      cell = r.next_cell;
      a = a_next;
      ++global_step;
    }
    tmp.delayed_reward = delayed;
    tmp.terminated = cell == env.terminal_cell();

    if (inferred) {
      Episode fresh = model->relabel(tmp);
      if (use_td) {
        replay_episode_td(td, fresh);
        if (!relabeled.empty()) {
          std::uniform_int_distribution<std::size_t> pick_ep(0, relabeled.size() - 1);
          for (int u = 0; u < updates_per_step; ++u)
            replay_episode_td(td, relabeled[pick_ep(agent_rng)]);
        }
      } else {
        replay_episode_q(q, fresh);
      }
      relabeled.push_back(std::move(fresh));
      while (relabeled.size() > relabeled_cap) relabeled.pop_front();
      buffer.push(std::move(tmp));
    }

    if ((episode + 1) % eval_every == 0 || episode + 1 == train_episodes) {
      const double ret =
          greedy_grid_return(env, action_values, eval_episodes, eval_rng);
      if (result.eval_return.empty() ||
          result.eval_return.back().x != static_cast<double>(episode + 1))
        result.eval_return.push_back(
            MetricPoint{static_cast<double>(episode + 1), ret, 0.0, 1});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CartPole + DQN

struct CartpoleSeedResult {
  std::vector<MetricPoint> eval_return;
};

double greedy_cartpole_return(int max_steps, const agents::DQNAgent& agent,
                              int episodes, agents::Rng& rng) {
  env::CartPole env(max_steps);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd s = env.reset(rng);
    double ret = 0.0;
    while (!env.done()) {
      const int a = agent.act(s, 0.0, rng);
      auto r = env.step(a);
      ret += r.reward;
      s = r.next_state;
    }
    total += ret;
  }
  return total / episodes;
}

CartpoleSeedResult run_cartpole_seed(const RunConfig& config,
                                     std::uint64_t seed) {
  const int max_steps = config.get_int("env.max_steps");
  const double sigma = config.get_double("noise.sigma");
  const env::RewardMode mode =
      env::reward_mode_from_string(config.get("reward_mode"));
  const std::int64_t train_steps = config.get_i64("agent.train_steps");
  const int eval_every = config.get_int("eval.every");  // in episodes
  const int eval_episodes = config.get_int("eval.episodes");

  env::CartPole env(max_steps);
  env::NoiseModel noise(sigma, substream(seed, 1));
  agents::Rng agent_rng(substream(seed, 2));
  agents::Rng eval_rng(substream(seed, 3));
  nn::Rng infer_rng(substream(seed, 4));
  agents::Rng env_rng(substream(seed, 5));

  agents::DQNConfig dqn_cfg;
  dqn_cfg.hidden_units.assign(config.get_int("agent.hidden_layers"),
                              config.get_int("agent.units"));
  dqn_cfg.learning_rate = config.get_double("agent.lr");
  dqn_cfg.gamma = config.get_double("agent.gamma");
  dqn_cfg.batch_size = config.get_int("agent.batch");
  dqn_cfg.replay_capacity =
      static_cast<std::size_t>(config.get_i64("agent.buffer"));
  dqn_cfg.target_sync_period = config.get_int("agent.target_sync");
  agents::DQNAgent agent(env::CartPole::kStateDim, env::CartPole::kNumActions,
                         dqn_cfg, agent_rng);

  const bool inferred = mode == env::RewardMode::Inferred;
  auto encoder = StateActionEncoder::continuous_concat(
      env::CartPole::kStateDim, env::CartPole::kNumActions);
  std::unique_ptr<InferNetModel> model;
  EpisodeBuffer buffer(static_cast<std::size_t>(config.get_i64("infernet.buffer")));
  std::int64_t infernet_budget = config.get_i64("infernet.train_steps");
  const int infernet_batch = config.get_int("infernet.batch_episodes");
  const int train_every = std::max(1, config.get_int("infernet.train_every"));

  if (inferred) {
    model = std::make_unique<InferNetModel>(encoder,
                                            infernet_config_from(config),
                                            infer_rng);
    const std::int64_t pretrain_episodes =
        config.get_i64("infernet.pretrain_episodes");
    std::uniform_int_distribution<int> pick(0, env::CartPole::kNumActions - 1);
    for (std::int64_t k = 0; k < pretrain_episodes; ++k) {
      Episode ep;
      Eigen::VectorXd s = env.reset(env_rng);
      double delayed = 0.0;
      bool terminated = false;
      while (!env.done()) {
        const int a = pick(agent_rng);
        auto r = env.step(a);
        const double observed = noise.apply(r.reward);
        ep.steps.push_back(Step{s, a, observed, r.next_state});
        delayed += observed;
        s = r.next_state;
        terminated = r.done && !r.truncated;
      }
      ep.delayed_reward = delayed;
      ep.terminated = terminated;
      buffer.push(std::move(ep));
      if (infernet_budget > 0) {
        model->train_minibatch(buffer, infernet_batch, infer_rng);
        --infernet_budget;
      }
    }
    std::int64_t pretrain_steps = config.get_i64("infernet.pretrain_steps");
    while (pretrain_steps-- > 0 && infernet_budget-- > 0)
      model->train_minibatch(buffer, infernet_batch, infer_rng);
  }

  agents::EpsilonSchedule eps{config.get_double("agent.epsilon_start"),
                              config.get_double("agent.epsilon_end"),
                              std::max<std::int64_t>(1, train_steps / 2)};

  CartpoleSeedResult result;
  std::int64_t global_step = 0;
  std::int64_t episode = 0;
  while (global_step < train_steps) {
    Episode tmp;
    Eigen::VectorXd s = env.reset(env_rng);
    double delayed = 0.0;
    bool terminated = false;
    std::vector<agents::Transition> pending;
    while (!env.done() && global_step < train_steps) {
      const int a = agent.act(s, eps.at(global_step), agent_rng);
      auto r = env.step(a);
      const double observed = noise.apply(r.reward);
      delayed += observed;
      terminated = r.done && !r.truncated;
      tmp.steps.push_back(Step{s, a, observed, r.next_state});
      if (mode == env::RewardMode::Immediate) {
        agent.observe(agents::Transition{s, a, observed, r.next_state,
                                         terminated});
      } else if (mode == env::RewardMode::Delayed) {
        pending.push_back(agents::Transition{s, a, 0.0, r.next_state,
                                             terminated});
      } else {
        pending.push_back(agents::Transition{s, a, 0.0, r.next_state,
                                             terminated});
        if (infernet_budget > 0 && global_step % train_every == 0) {
          model->train_minibatch(buffer, infernet_batch, infer_rng);
          --infernet_budget;
        }
      }
      if (agent.replay_size() >= static_cast<std::size_t>(dqn_cfg.batch_size))
        agent.train_step(agent_rng);
      s = r.next_state;
      ++global_step;
    }
    tmp.delayed_reward = delayed;
    tmp.terminated = terminated;
    if (mode == env::RewardMode::Delayed) {
      // episodic sum lands on the final transition
      if (!pending.empty()) pending.back().reward = delayed;
      for (auto& t : pending) agent.observe(std::move(t));
    } else if (inferred && !tmp.steps.empty()) {
      std::vector<double> inferred_r = model->infer_rewards(tmp);
      for (std::size_t t = 0; t < pending.size(); ++t)
        pending[t].reward = inferred_r[t];
      for (auto& t : pending) agent.observe(std::move(t));
      buffer.push(std::move(tmp));
    }
    ++episode;
    if (episode % eval_every == 0 || global_step >= train_steps) {
      const double ret =
          greedy_cartpole_return(max_steps, agent, eval_episodes, eval_rng);
      result.eval_return.push_back(
          MetricPoint{static_cast<double>(global_step), ret, 0.0, 1});
    }
  }
  return result;
}

}  // namespace

RunResult run_online(const RunConfig& config) {
  RunResult result;
  result.experiment = to_string(config.kind());
  result.config_canonical = config.canonical();
  result.config_hash = config.hash();
  result.seeds = config.seeds;

  if (config.kind() == ExperimentKind::Cartpole ||
      config.get("agent.kind") == "dqn") {
    std::vector<std::vector<MetricPoint>> runs;
    for (std::uint64_t seed : config.seeds) {
      // x grids can differ per seed (episode lengths vary); resample onto the
      // final point only when they do.
      runs.push_back(run_cartpole_seed(config, seed).eval_return);
    }
    // Align by truncating to the shortest series; x is global step count.
    std::size_t len = runs.front().size();
    for (auto& r : runs) len = std::min(len, r.size());
    std::vector<std::vector<MetricPoint>> aligned;
    for (auto& r : runs) {
      std::vector<MetricPoint> a(r.end() - len, r.end());
      // use the index as the common x
      for (std::size_t i = 0; i < a.size(); ++i) a[i].x = static_cast<double>(i);
      aligned.push_back(std::move(a));
    }
    result.series.push_back(aggregate_seeds("eval_return", aligned));
    return result;
  }

  env::GridWorld layout(config.get_i64("env.layout_seed"),
                        config.get_int("env.max_steps"));
  result.layout_map = layout.layout_map();
  std::vector<std::vector<MetricPoint>> runs;
  for (std::uint64_t seed : config.seeds)
    runs.push_back(run_online_grid_seed(config, seed).eval_return);
  result.series.push_back(aggregate_seeds("eval_return", runs));

  const double opt =
      env::optimal_return(layout, config.get_double("agent.gamma"));
  result.series.push_back(MetricSeries{
      "optimal_return", {MetricPoint{0.0, opt, 0.0, 1}}});
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> mode_rewards(const std::vector<Episode>& eps,
                                              env::RewardMode mode) {
  std::vector<std::vector<double>> out;
  for (const auto& ep : eps) out.push_back(env::wrap_rewards(mode, ep));
  return out;
}

/// Offline tabular Q-learning: `iterations` full sweeps over the dataset.
double offline_q_policy_return(const RunConfig& config,
                               const std::vector<Episode>& episodes,
                               const std::vector<std::vector<double>>& rewards,
                               const env::GridWorld& layout,
                               std::uint64_t seed) {
  agents::QTable q(env::GridWorld::kNumActions,
                   config.get_double("agent.alpha"),
                   config.get_double("agent.gamma"));
  const std::int64_t iterations = config.get_i64("offline.iterations");
  for (std::int64_t it = 0; it < iterations; ++it) {
    for (std::size_t e = 0; e < episodes.size(); ++e) {
      const Episode& ep = episodes[e];
      for (std::size_t t = 0; t < ep.steps.size(); ++t) {
        const Step& s = ep.steps[t];
        const bool done = (t + 1 == ep.steps.size()) && ep.terminated;
        q.update(static_cast<std::int64_t>(s.state(0)), s.action,
                 rewards[e][t], static_cast<std::int64_t>(s.next_state(0)),
                 done);
      }
    }
  }
  agents::Rng eval_rng(substream(seed, 31));
  return greedy_grid_return(
      layout, [&](int cell) { return q.action_values(cell); },
      config.get_int("eval.episodes"), eval_rng);
}

std::vector<std::vector<double>> infer_dataset(const InferNetModel& model,
                                               const std::vector<Episode>& eps) {
  std::vector<std::vector<double>> out;
  for (const auto& ep : eps) out.push_back(model.infer_rewards(ep));
  return out;
}

std::vector<std::vector<double>> infer_dataset_gp(
    const gp::AggregatedGP& model, const std::vector<Episode>& eps,
    const StateActionEncoder& encoder) {
  std::vector<std::vector<double>> out;
  for (const auto& ep : eps) out.push_back(model.infer_episode(ep, encoder));
  return out;
}

gp::KernelConfig gp_config_from(const RunConfig& config) {
  gp::KernelConfig k;
  k.lengthscale = config.get_double("gp.lengthscale");
  k.signal_variance = config.get_double("gp.signal_variance");
  k.observation_noise_variance = config.get_double("gp.noise_variance");
  k.jitter = config.get_double("gp.jitter");
  return k;
}

}  // namespace

RunResult run_offline(const RunConfig& config) {
  RunResult result;
  result.experiment = to_string(config.kind());
  result.config_canonical = config.canonical();
  result.config_hash = config.hash();
  result.seeds = config.seeds;

  const std::uint64_t layout_seed = config.get_i64("env.layout_seed");
  const int max_steps = config.get_int("env.max_steps");
  env::GridWorld layout(layout_seed, max_steps);
  result.layout_map = layout.layout_map();
  const double sigma = config.get_double("noise.sigma");
  std::vector<int> sizes = config.get_int_list("offline.sizes");
  const int max_size = *std::max_element(sizes.begin(), sizes.end());
  const auto encoder = grid_encoder();

  const std::vector<std::string> modes = {"immediate", "delayed", "infernet",
                                          "infergp"};
  std::map<std::string, std::vector<std::vector<MetricPoint>>> per_mode_runs;

  for (std::uint64_t seed : config.seeds) {
    GridDataset data = generate_grid_dataset(layout_seed, max_steps, max_size,
                                             sigma, seed);
    std::map<std::string, std::vector<MetricPoint>> per_mode;
    for (int size : sizes) {
      std::vector<Episode> subset = data.prefix(size);

      InferNetModel infernet = train_infernet_offline(
          config, subset, config.get_i64("infernet.train_steps"),
          substream(seed, 100 + size));
      gp::AggregatedGP infergp = gp::gp_fit(gp_config_from(config), subset,
                                            encoder);

      for (const auto& mode : modes) {
        std::vector<std::vector<double>> rewards;
        if (mode == "immediate")
          rewards = mode_rewards(subset, env::RewardMode::Immediate);
        else if (mode == "delayed")
          rewards = mode_rewards(subset, env::RewardMode::Delayed);
        else if (mode == "infernet")
          rewards = infer_dataset(infernet, subset);
        else
          rewards = infer_dataset_gp(infergp, subset, encoder);
        const double ret = offline_q_policy_return(config, subset, rewards,
                                                   layout, seed);
        per_mode[mode].push_back(
            MetricPoint{static_cast<double>(size), ret, 0.0, 1});
      }
    }
    for (const auto& mode : modes)
      per_mode_runs[mode].push_back(per_mode[mode]);
  }

  for (const auto& mode : modes)
    result.series.push_back(
        aggregate_seeds("return_" + mode, per_mode_runs[mode]));
  const double opt =
      env::optimal_return(layout, config.get_double("agent.gamma"));
  result.series.push_back(MetricSeries{
      "optimal_return", {MetricPoint{0.0, opt, 0.0, 1}}});
  return result;
}

RunResult rmse_curve(const RunConfig& config) {
  RunResult result;
  result.experiment = to_string(config.kind());
  result.config_canonical = config.canonical();
  result.config_hash = config.hash();
  result.seeds = config.seeds;

  const std::uint64_t layout_seed = config.get_i64("env.layout_seed");
  const int max_steps = config.get_int("env.max_steps");
  env::GridWorld layout(layout_seed, max_steps);
  result.layout_map = layout.layout_map();
  std::vector<int> sizes = config.get_int_list("rmse.sizes");
  const int max_size = *std::max_element(sizes.begin(), sizes.end());
  const double sigma = config.get_double("noise.sigma");
  const auto encoder = grid_encoder();

  std::map<std::string, std::vector<std::vector<MetricPoint>>> runs;
  for (std::uint64_t seed : config.seeds) {
    std::map<std::string, std::vector<MetricPoint>> cur;
    for (double s : {0.0, sigma}) {
      const std::string suffix = s == 0.0 ? "_none" : "_noise";
      GridDataset data = generate_grid_dataset(layout_seed, max_steps,
                                               max_size, s, seed);
      for (int size : sizes) {
        std::vector<Episode> subset = data.prefix(size);
        InferNetModel infernet = train_infernet_offline(
            config, subset, config.get_i64("infernet.train_steps"),
            substream(seed, 200 + size));
        gp::AggregatedGP infergp = gp::gp_fit(gp_config_from(config), subset,
                                              encoder);
        cur["rmse_infernet" + suffix].push_back(MetricPoint{
            static_cast<double>(size),
            dataset_rmse(data, infer_dataset(infernet, subset), size), 0.0, 1});
        cur["rmse_infergp" + suffix].push_back(MetricPoint{
            static_cast<double>(size),
            dataset_rmse(data, infer_dataset_gp(infergp, subset, encoder), size),
            0.0, 1});
      }
      if (sigma == 0.0) break;  // only one variant when noise is disabled
    }
    for (auto& [name, points] : cur) runs[name].push_back(points);
  }
  for (auto& [name, r] : runs)
    result.series.push_back(aggregate_seeds(name, r));
  return result;
}

RunResult time_bench(const RunConfig& config) {
  RunResult result;
  result.experiment = to_string(config.kind());
  result.config_canonical = config.canonical();
  result.config_hash = config.hash();
  result.seeds = config.seeds;

  const std::uint64_t layout_seed = config.get_i64("env.layout_seed");
  const int max_steps = config.get_int("env.max_steps");
  env::GridWorld layout(layout_seed, max_steps);
  result.layout_map = layout.layout_map();
  std::vector<int> sizes = config.get_int_list("bench.sizes");
  const int steps_per_episode = config.get_int("bench.steps_per_episode");
  const auto encoder = grid_encoder();
  const std::uint64_t seed = config.seeds.front();

  auto now = [] { return std::chrono::steady_clock::now(); };
  auto secs = [](auto a, auto b) {
    return std::chrono::duration<double>(b - a).count();
  };

  std::vector<double> ns, gp_times, net_times;
  for (int n : sizes) {
    // enough random episodes to cover n steps, truncated to exactly n
    GridDataset data =
        generate_grid_dataset(layout_seed, max_steps, 4 * n, 0.0, seed);
    std::vector<Episode> subset;
    int steps = 0;
    for (auto& ep : data.episodes) {
      if (steps >= n) break;
      Episode e = ep;
      if (steps + static_cast<int>(e.steps.size()) > n) {
        e.steps.resize(n - steps);
        double sum = 0.0;
        for (const auto& st : e.steps) sum += st.reward;
        e.delayed_reward = sum;
        e.terminated = false;
      }
      steps += static_cast<int>(e.steps.size());
      subset.push_back(std::move(e));
    }

    auto t0 = now();
    gp::AggregatedGP model = gp::gp_fit(gp_config_from(config), subset, encoder);
    auto t1 = now();
    (void)model;

    const std::int64_t train_steps =
        static_cast<std::int64_t>(steps_per_episode) *
        static_cast<std::int64_t>(subset.size());
    auto t2 = now();
    train_infernet_offline(config, subset, train_steps, substream(seed, 7));
    auto t3 = now();

    ns.push_back(static_cast<double>(n));
    gp_times.push_back(secs(t0, t1));
    net_times.push_back(secs(t2, t3));
  }

  MetricSeries gps{"gp_seconds", {}}, nets{"infernet_seconds", {}};
  for (std::size_t i = 0; i < ns.size(); ++i) {
    gps.points.push_back(MetricPoint{ns[i], gp_times[i], 0.0, 1});
    nets.points.push_back(MetricPoint{ns[i], net_times[i], 0.0, 1});
  }
  result.series.push_back(gps);
  result.series.push_back(nets);
  result.series.push_back(MetricSeries{
      "gp_loglog_slope",
      {MetricPoint{0.0, loglog_slope(ns, gp_times), 0.0, 1}}});
  result.series.push_back(MetricSeries{
      "infernet_loglog_slope",
      {MetricPoint{0.0, loglog_slope(ns, net_times), 0.0, 1}}});
  return result;
}

RunResult loss_diag(const RunConfig& config) {
  RunResult result;
  result.experiment = to_string(config.kind());
  result.config_canonical = config.canonical();
  result.config_hash = config.hash();
  result.seeds = config.seeds;

  const std::uint64_t layout_seed = config.get_i64("env.layout_seed");
  const int max_steps = config.get_int("env.max_steps");
  env::GridWorld layout(layout_seed, max_steps);
  result.layout_map = layout.layout_map();
  const std::uint64_t seed = config.seeds.front();
  const int n_episodes = config.get_int("diag.episodes");
  const double sigma = config.get_double("noise.sigma");

  GridDataset data = generate_grid_dataset(layout_seed, max_steps, n_episodes,
                                           sigma, seed);
  MetricSeries objective{"objective_loss", {}};
  MetricSeries true_mse{"true_mse", {}};
  auto checkpoint = [&](std::int64_t step, const InferNetModel& model) {
    double loss = 0.0;
    for (const auto& ep : data.episodes) loss += model.episode_loss(ep);
    loss /= data.episodes.size();
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
      std::vector<double> inf = model.infer_rewards(data.episodes[e]);
      for (std::size_t t = 0; t < inf.size(); ++t) {
        const double d = inf[t] - data.true_rewards[e][t];
        sq += d * d;
        ++n;
      }
    }
    objective.points.push_back(
        MetricPoint{static_cast<double>(step), loss, 0.0, 1});
    true_mse.points.push_back(
        MetricPoint{static_cast<double>(step), sq / n, 0.0, 1});
  };
  train_infernet_offline(config, data.episodes, config.get_i64("diag.steps"),
                         seed, config.get_i64("diag.checkpoint_every"),
                         checkpoint);

  std::vector<double> a, b;
  for (const auto& p : objective.points) a.push_back(p.mean);
  for (const auto& p : true_mse.points) b.push_back(p.mean);
  result.series.push_back(std::move(objective));
  result.series.push_back(std::move(true_mse));
  result.series.push_back(MetricSeries{
      "spearman_objective_true", {MetricPoint{0.0, spearman(a, b), 0.0, 1}}});
  return result;
}

RunResult run_experiment(const RunConfig& config) {
  switch (config.kind()) {
    case ExperimentKind::OnlineGridworld:
    case ExperimentKind::Cartpole:
      return run_online(config);
    case ExperimentKind::OfflineGridworld:
      return run_offline(config);
    case ExperimentKind::RmseCurve:
      return rmse_curve(config);
    case ExperimentKind::TimeBench:
      return time_bench(config);
    case ExperimentKind::LossDiag:
      return loss_diag(config);
  }
  throw ConfigError("unhandled experiment kind");
}

}  // namespace lab
