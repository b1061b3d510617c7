#include "lab/agents.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

using namespace lab;

TEST_CASE("q_update: one-step arithmetic") {
  agents::QTable q(3, 0.1, 0.9);
  q.update(0, 1, 1.0, 5, false);
  CHECK(q.get(0, 1) == doctest::Approx(0.1).epsilon(1e-15));

  // terminal transition: target is r exactly, no bootstrap
  agents::QTable qt(2, 0.5, 0.9);
  qt.update(7, 0, 3.0, 8, false);  // seed Q(8,*) = 0, Q(7,0) = 1.5
  qt.update(9, 1, 2.0, 7, true);   // done masks the bootstrap
  CHECK(qt.get(9, 1) == doctest::Approx(0.5 * 2.0).epsilon(1e-15));

  // zero TD error leaves the entry unchanged
  agents::QTable qz(2, 0.3, 0.9);
  qz.update(0, 0, 0.0, 1, false);
  CHECK(qz.get(0, 0) == 0.0);
  CHECK(qz.size() <= 1);
}

TEST_CASE("epsilon_greedy: argmax at eps=0, errors on empty input") {
  agents::Rng rng(1);
  std::array<double, 3> values{0.0, 5.0, 1.0};
  for (int i = 0; i < 20; ++i)
    CHECK(agents::epsilon_greedy(values, 0.0, rng) == 1);

  // constant shift does not change the greedy choice
  std::array<double, 3> shifted{10.0, 15.0, 11.0};
  CHECK(agents::epsilon_greedy(shifted, 0.0, rng) == 1);

  CHECK_THROWS_AS(agents::epsilon_greedy(std::span<const double>{}, 0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("epsilon_greedy: eps=1 is uniform; ties break uniformly") {
  agents::Rng rng(2);
  const int n = 10000;
  auto frequencies = [&](std::span<const double> values, double eps) {
    std::array<int, 3> counts{};
    for (int i = 0; i < n; ++i) ++counts[agents::epsilon_greedy(values, eps, rng)];
    return counts;
  };
  // three-sigma band for a fair three-sided count
  const double p = 1.0 / 3.0;
  const double band = 3.0 * std::sqrt(n * p * (1 - p));

  std::array<double, 3> values{0.0, 5.0, 1.0};
  for (int c : frequencies(values, 1.0))
    CHECK(std::abs(c - n * p) < band);

  std::array<double, 3> equal{2.0, 2.0, 2.0};
  for (int c : frequencies(equal, 0.0))
    CHECK(std::abs(c - n * p) < band);
}

TEST_CASE("epsilon schedule: linear decay then flat") {
  agents::EpsilonSchedule sched{1.0, 0.05, 100};
  CHECK(sched.at(0) == doctest::Approx(1.0));
  CHECK(sched.at(50) == doctest::Approx(0.525));
  CHECK(sched.at(100) == doctest::Approx(0.05));
  CHECK(sched.at(5000) == doctest::Approx(0.05));
}

TEST_CASE("td_lambda: first Dutch visit sets the trace to exactly 1") {
  agents::TDLambdaAgent agent(3, 0.1, 0.9, 0.91, agents::TraceKind::Dutch);
  agent.begin_episode();
  agent.update(4, 2, 0.0, 5, 1, false);
  // e <- gamma*lambda*0 + (1 - alpha*gamma*lambda*0) = 1, then post-decay
  CHECK(agent.trace(4, 2) == doctest::Approx(0.9 * 0.91).epsilon(1e-15));
}

TEST_CASE("td_lambda: lambda=0 reduces to one-step SARSA") {
  agents::TDLambdaAgent td(2, 0.1, 0.9, 0.0);
  td.begin_episode();
  td.update(0, 0, 1.0, 1, 1, false);
  td.update(1, 1, -1.0, 2, 0, false);

  // one-step SARSA by hand
  double q00 = 0.0, q11 = 0.0;
  q00 += 0.1 * (1.0 + 0.9 * q11 - q00);
  q11 += 0.1 * (-1.0 + 0.9 * 0.0 - q11);
  CHECK(td.get(0, 0) == doctest::Approx(q00).epsilon(1e-15));
  CHECK(td.get(1, 1) == doctest::Approx(q11).epsilon(1e-15));
}

TEST_CASE("td_lambda: two-step episode matches hand-unrolled Dutch updates") {
  const double alpha = 0.1, gamma = 0.9, lambda = 0.91;
  agents::TDLambdaAgent td(2, alpha, gamma, lambda);
  td.begin_episode();
  td.update(0, 0, 1.0, 1, 1, false);
  td.update(1, 1, 2.0, 2, 0, true);

  // hand unroll: entries (0,0) and (1,1), everything starts at 0
  double q00 = 0.0, q11 = 0.0, e00 = 0.0, e11 = 0.0;
  const double gl = gamma * lambda;
  {  // step 1 at (0,0)
    const double delta = 1.0 + gamma * q11 - q00;
    e00 = gl * e00 + (1.0 - alpha * gl * e00);
    q00 += alpha * delta * e00;
    q11 += alpha * delta * e11;
    e00 *= gl;
    e11 *= gl;
  }
  {  // step 2 at (1,1), terminal
    const double delta = 2.0 + 0.0 - q11;
    e11 = gl * e11 + (1.0 - alpha * gl * e11);
    q00 += alpha * delta * e00;
    q11 += alpha * delta * e11;
    e00 *= gl;
    e11 *= gl;
  }
  CHECK(td.get(0, 0) == doctest::Approx(q00).epsilon(1e-14));
  CHECK(td.get(1, 1) == doctest::Approx(q11).epsilon(1e-14));
  CHECK(td.trace(0, 0) == doctest::Approx(e00).epsilon(1e-14));
  CHECK(td.trace(1, 1) == doctest::Approx(e11).epsilon(1e-14));
}

TEST_CASE("td_lambda: Dutch traces stay bounded and non-negative") {
  const double alpha = 0.1, gamma = 0.9, lambda = 0.91;
  agents::TDLambdaAgent td(2, alpha, gamma, lambda);
  agents::Rng rng(5);
  std::uniform_int_distribution<int> pick_s(0, 3), pick_a(0, 1);
  const double bound = 1.0 / (alpha * gamma * lambda);
  for (int ep = 0; ep < 20; ++ep) {
    td.begin_episode();
    for (int t = 0; t < 50; ++t) {
      const int s = pick_s(rng), a = pick_a(rng);
      td.update(s, a, pick_a(rng) - 0.5, pick_s(rng), pick_a(rng), t == 49);
      for (int ss = 0; ss < 4; ++ss)
        for (int aa = 0; aa < 2; ++aa) {
          const double e = td.trace(ss, aa);
          REQUIRE(e >= 0.0);
          REQUIRE(e < bound);
        }
    }
  }
}

TEST_CASE("q-learning converges on a 3-state chain to the VI fixed point") {
  // states 0 -> 1 -> 2(terminal); action 0 advances (r=1 entering terminal),
  // action 1 stays (r=0). Optimal: Q*(1,0)=1, Q*(0,0)=gamma,
  // Q*(0,1)=gamma*Q*(0,0), Q*(1,1)=gamma*Q*(1,0).
  const double gamma = 0.9;
  agents::QTable q(2, 0.1, gamma);
  agents::Rng rng(11);
  for (int step = 0, ep = 0; step < 10000; ++ep) {
    int s = 0;
    while (s != 2 && step < 10000) {
      const double eps = std::max(0.05, 1.0 - ep / 200.0);
      auto vals = q.action_values(s);
      const int a = agents::epsilon_greedy(vals, eps, rng);
      const int s_next = a == 0 ? s + 1 : s;
      const double r = (a == 0 && s_next == 2) ? 1.0 : 0.0;
      q.update(s, a, r, s_next, s_next == 2);
      s = s_next;
      ++step;
    }
  }
  CHECK(q.get(1, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(q.get(0, 0) == doctest::Approx(gamma).epsilon(1e-3));
  CHECK(q.get(0, 1) == doctest::Approx(gamma * gamma).epsilon(2e-3));
  CHECK(q.get(1, 1) == doctest::Approx(gamma * 1.0).epsilon(2e-3));
}

TEST_CASE("dqn: repeated terminal transition drives Q(s,a) to the reward") {
  agents::DQNConfig cfg;
  cfg.hidden_units = {16};
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 8;
  cfg.target_sync_period = 10;
  agents::Rng rng(3);
  agents::DQNAgent agent(2, 2, cfg, rng);

  agents::Transition t;
  t.state = Eigen::VectorXd::Constant(2, 0.5);
  t.action = 1;
  t.reward = 1.0;
  t.next_state = Eigen::VectorXd::Zero(2);
  t.done = true;
  for (int i = 0; i < 16; ++i) agent.observe(t);

  CHECK_THROWS_AS([&] {
    agents::DQNAgent starved(2, 2, cfg, rng);
    agents::Rng r2(1);
    starved.train_step(r2);
  }(), std::invalid_argument);

  double loss = 1.0;
  for (int i = 0; i < 500; ++i) loss = agent.train_step(rng);
  CHECK(loss < 1e-3);
  CHECK(agent.q_values(t.state)[1] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("dqn: target net frozen between syncs, copied at the sync point") {
  agents::DQNConfig cfg;
  cfg.hidden_units = {8};
  cfg.batch_size = 4;
  cfg.target_sync_period = 5;
  agents::Rng rng(7);
  agents::DQNAgent agent(2, 2, cfg, rng);

  agents::Transition t;
  t.state = Eigen::VectorXd::Constant(2, 0.3);
  t.action = 0;
  t.reward = 0.5;
  t.next_state = Eigen::VectorXd::Constant(2, -0.2);
  t.done = false;
  for (int i = 0; i < 8; ++i) agent.observe(t);

  const auto snapshot = agent.target_net().layers;
  for (int i = 0; i < 4; ++i) {  // steps 1..4: no sync yet
    agent.train_step(rng);
    for (std::size_t l = 0; l < snapshot.size(); ++l)
      CHECK(agent.target_net().layers[l].weights == snapshot[l].weights);
  }
  agent.train_step(rng);  // step 5 syncs
  bool copied = true;
  for (std::size_t l = 0; l < snapshot.size(); ++l)
    if (agent.target_net().layers[l].weights !=
        agent.online_net().layers[l].weights)
      copied = false;
  CHECK(copied);
}

TEST_CASE("dqn: identical seeds give identical loss sequences") {
  auto run = []() {
    agents::DQNConfig cfg;
    cfg.hidden_units = {8};
    cfg.batch_size = 4;
    agents::Rng rng(9);
    agents::DQNAgent agent(2, 2, cfg, rng);
    agents::Rng env_rng(4);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < 12; ++i) {
      agents::Transition t;
      t.state = Eigen::VectorXd::NullaryExpr(2, [&](auto) { return noise(env_rng); });
      t.action = i % 2;
      t.reward = noise(env_rng);
      t.next_state = Eigen::VectorXd::NullaryExpr(2, [&](auto) { return noise(env_rng); });
      t.done = i % 5 == 0;
      agent.observe(t);
    }
    std::vector<double> losses;
    for (int i = 0; i < 25; ++i) losses.push_back(agent.train_step(rng));
    return losses;
  };
  CHECK(run() == run());
}
