#include "lab/env.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace lab;

TEST_CASE("grid layout: fixed geometry and reward placement") {
  env::GridWorld grid(7);
  CHECK(grid.start_cell() == 6 * 14 + 13);  // bottom-right
  CHECK(grid.terminal_cell() == 0);         // top-left
  CHECK(grid.reward_cell_ids().size() == 9);
  int pos = 0, neg = 0;
  for (int cell : grid.reward_cell_ids()) {
    if (grid.reward_at(cell) > 0) ++pos;
    else ++neg;
  }
  CHECK(pos == 5);
  CHECK(neg == 4);

  // same seed, same layout; different seed, (almost surely) different layout
  env::GridWorld again(7);
  CHECK(again.reward_cell_ids() == grid.reward_cell_ids());
  CHECK(grid.layout_map() == again.layout_map());
}

TEST_CASE("grid_reset: start position, idempotence, consumed set") {
  env::GridWorld grid(7);
  CHECK(grid.reset() == grid.start_cell());
  CHECK(grid.reset() == grid.start_cell());

  // find a reward cell adjacent via up from some reachable path: instead,
  // consume any reward by walking randomly, then reset and re-collect.
  env::Rng rng(3);
  std::uniform_int_distribution<int> pick(0, 2);
  double first_collect = 0.0;
  std::vector<int> actions;
  grid.reset();
  while (!grid.done()) {
    int a = pick(rng);
    actions.push_back(a);
    auto r = grid.step(a);
    if (r.reward != 0.0) {
      first_collect = r.reward;
      break;
    }
  }
  REQUIRE(first_collect != 0.0);
  grid.reset();
  CHECK(grid.consumed_mask() == 0);
  double replayed = 0.0;
  for (int a : actions) {
    auto r = grid.step(a);
    replayed = r.reward;
  }
  CHECK(replayed == first_collect);  // re-entering after reset pays again
}

TEST_CASE("grid_step: off-grid moves clamp with zero reward") {
  env::GridWorld grid(7);
  grid.reset();
  auto r = grid.step(2);  // down at bottom row
  CHECK(r.next_cell == grid.start_cell());
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done);
}

TEST_CASE("grid_step: reward cells pay once per episode") {
  env::GridWorld grid(7);
  // locate a reward cell with a free cell below it (enter via up, re-enter
  // via up after stepping back down)
  for (int cell : grid.reward_cell_ids()) {
    const int row = cell / 14, col = cell % 14;
    if (row + 1 >= 7) continue;
    const int below = (row + 1) * 14 + col;
    if (grid.reward_at(below) != 0.0 || below == grid.terminal_cell()) continue;
    if (cell == grid.terminal_cell()) continue;

    // steer deterministically: walk to `below`, then up, down, up
    env::GridWorld g(7);
    int pos = g.reset();
    // move left then up to reach (col, row+1); the start is bottom-right so
    // left moves then up moves suffice when no terminal interception occurs.
    bool ok = true;
    while (pos % 14 > col && ok) {
      auto s = g.step(1);
      pos = s.next_cell;
      if (s.done) ok = false;
    }
    while (pos / 14 > row + 1 && ok) {
      auto s = g.step(0);
      pos = s.next_cell;
      if (s.done) ok = false;
    }
    if (!ok || pos != below) continue;
    auto first = g.step(0);   // enter reward cell
    auto back = g.step(2);    // leave downward
    auto second = g.step(0);  // re-enter
    CHECK(first.reward == g.reward_at(cell));
    CHECK(back.next_cell == below);
    CHECK(second.reward == 0.0);
    return;
  }
  FAIL("no testable reward cell found in layout");
}

TEST_CASE("grid_step: stepping after done is a contract violation") {
  env::GridWorld grid(7, 5);
  grid.reset();
  while (!grid.done()) grid.step(0);
  CHECK_THROWS_AS(grid.step(0), std::logic_error);
}

TEST_CASE("grid_step: truncation at max_steps is flagged") {
  env::GridWorld grid(7, 3);
  grid.reset();
  grid.step(2);
  grid.step(2);
  auto r = grid.step(2);  // still at bottom-right corner, 3 steps used
  CHECK(r.done);
  CHECK(r.truncated);
}

TEST_CASE("value iteration: greedy rollout's discounted return matches the "
          "start-state value") {
  env::GridWorld grid(7);
  const double gamma = 0.9;
  env::GridSolution sol = env::value_iterate(grid, gamma);

  env::GridWorld rollout(7);
  int cell = rollout.reset();
  double discounted = 0.0, scale = 1.0;
  while (!rollout.done()) {
    const int idx =
        static_cast<int>(rollout.consumed_mask()) * rollout.num_cells() + cell;
    auto r = rollout.step(sol.policy[idx]);
    discounted += scale * r.reward;
    scale *= gamma;
    cell = r.next_cell;
  }
  CHECK(discounted == doctest::Approx(sol.start_value(grid)).epsilon(1e-9));
}

TEST_CASE("grid reachability: terminal reachable from every cell via up/left") {
  env::GridWorld grid(7);
  for (int cell = 0; cell < grid.num_cells(); ++cell) {
    int row = cell / 14, col = cell % 14;
    CHECK(row + col <= 100);  // monotone moves terminate within max_steps
  }
  // and an all-up-then-all-left walk actually terminates
  grid.reset();
  int steps = 0;
  while (!grid.done()) {
    grid.step(steps < 6 ? 0 : 1);
    ++steps;
  }
  CHECK(steps == 6 + 13);
}

TEST_CASE("cart_step: alternating pushes from near-rest survive >= 10 steps") {
  env::CartPole cart;
  env::Rng rng(1);
  cart.reset(rng);
  int survived = 0;
  for (int i = 0; i < 10; ++i) {
    auto r = cart.step(i % 2);
    ++survived;
    if (r.done) break;
  }
  CHECK(survived == 10);
}

TEST_CASE("cart_step: +1 per non-terminal transition, max return = max_steps") {
  env::CartPole cart(50);
  env::Rng rng(2);
  // a crude balance policy: push against the pole's lean
  cart.reset(rng);
  double total = 0.0;
  bool truncated = false;
  while (!cart.done()) {
    const int a = cart.state()(2) > 0 ? 1 : 0;
    auto r = cart.step(a);
    if (!r.done || r.truncated) CHECK(r.reward == 1.0);
    total += r.reward;
    truncated = r.truncated;
  }
  if (truncated) CHECK(total == 50.0);
  CHECK_THROWS_AS(cart.step(0), std::logic_error);
}

TEST_CASE("cartpole determinism: same seed and actions, same trajectory") {
  auto run = []() {
    env::CartPole cart;
    env::Rng rng(77);
    Eigen::VectorXd s = cart.reset(rng);
    std::vector<double> xs{s(0)};
    for (int i = 0; i < 30 && !cart.done(); ++i) {
      auto r = cart.step((i / 3) % 2);
      xs.push_back(r.next_state(0));
    }
    return xs;
  };
  CHECK(run() == run());
}

TEST_CASE("apply_noise: sigma=0 is the identity, negative sigma rejected") {
  env::NoiseModel none(0.0, 1);
  CHECK(none.apply(0.7) == 0.7);
  CHECK_THROWS_AS(env::NoiseModel(-0.1, 1), std::invalid_argument);
}

TEST_CASE("apply_noise: sample moments match N(0, sigma^2)") {
  const double sigma = 0.3;
  env::NoiseModel noise(sigma, 99);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = noise.apply(0.0);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(n));
  CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("wrap_rewards: immediate identity, delayed telescopes to the sum") {
  Episode ep;
  for (double r : {1.0, 0.0, -1.0}) {
    Step s;
    s.state = Eigen::VectorXd::Zero(1);
    s.next_state = Eigen::VectorXd::Zero(1);
    s.reward = r;
    ep.steps.push_back(s);
  }
  auto immediate = env::wrap_rewards(env::RewardMode::Immediate, ep);
  CHECK(immediate == std::vector<double>{1.0, 0.0, -1.0});
  auto delayed = env::wrap_rewards(env::RewardMode::Delayed, ep);
  CHECK(delayed == std::vector<double>{0.0, 0.0, 0.0});  // sum is 0
  double di = 0.0, dd = 0.0;
  for (double v : immediate) di += v;
  for (double v : delayed) dd += v;
  CHECK(di == dd);
}
