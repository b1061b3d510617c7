#include "lab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lab::env {

GridWorld::GridWorld(std::uint64_t layout_seed, int max_steps)
    : layout_seed_(layout_seed), max_steps_(max_steps) {
  if (max_steps <= 0) throw std::invalid_argument("GridWorld: max_steps must be positive");
  terminal_ = 0;                                 // top-left, (col 0, row 0)
  start_ = (kHeight - 1) * kWidth + (kWidth - 1);  // bottom-right

  // Fixed reward placement drawn once from the layout seed.
  std::vector<int> candidates;
  for (int c = 0; c < num_cells(); ++c)
    if (c != start_ && c != terminal_) candidates.push_back(c);
  Rng rng(layout_seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (int i = 0; i < kNumPositive + kNumNegative; ++i) {
    reward_cell_ids_.push_back(candidates[i]);
    reward_values_.push_back(i < kNumPositive ? 1.0 : -1.0);
    cell_to_reward_index_[candidates[i]] = i;
  }
  reset();
}

int GridWorld::reset() {
  pos_ = start_;
  steps_ = 0;
  done_ = false;
  consumed_ = 0;
  return pos_;
}

double GridWorld::reward_at(int cell) const {
  auto it = cell_to_reward_index_.find(cell);
  return it == cell_to_reward_index_.end() ? 0.0 : reward_values_[it->second];
}

GridStepResult GridWorld::step(int action) {
  if (done_) throw std::logic_error("GridWorld::step called after episode end");
  if (action < 0 || action >= kNumActions)
    throw std::invalid_argument("GridWorld: bad action " + std::to_string(action));

  int row = pos_ / kWidth;
  int col = pos_ % kWidth;
  switch (action) {
    case 0: row = std::max(0, row - 1); break;           // up
    case 1: col = std::max(0, col - 1); break;           // left
    case 2: row = std::min(kHeight - 1, row + 1); break; // down
  }
  pos_ = row * kWidth + col;
  steps_ += 1;

  GridStepResult result;
  result.next_cell = pos_;
  auto it = cell_to_reward_index_.find(pos_);
  if (it != cell_to_reward_index_.end() &&
      !(consumed_ & (1u << it->second))) {
    result.reward = reward_values_[it->second];
    consumed_ |= (1u << it->second);
  }
  if (pos_ == terminal_) {
    done_ = true;
  } else if (steps_ >= max_steps_) {
    done_ = true;
    result.truncated = true;
  }
  result.done = done_;
  return result;
}

std::string GridWorld::layout_map() const {
  std::string out;
  for (int row = 0; row < kHeight; ++row) {
    for (int col = 0; col < kWidth; ++col) {
      int cell = row * kWidth + col;
      char ch = '.';
      if (cell == terminal_) ch = 'T';
      else if (cell == start_) ch = 'S';
      else {
        double r = reward_at(cell);
        if (r > 0) ch = '+';
        else if (r < 0) ch = '-';
      }
      out += ch;
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kTotalMass = kCartMass + kPoleMass;
constexpr double kHalfLength = 0.5;
constexpr double kPoleMassLength = kPoleMass * kHalfLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;
constexpr double kXThreshold = 2.4;
const double kThetaThreshold = 12.0 * M_PI / 180.0;
}  // namespace

CartPole::CartPole(int max_steps) : max_steps_(max_steps) {
  if (max_steps <= 0) throw std::invalid_argument("CartPole: max_steps must be positive");
  state_ = Eigen::VectorXd::Zero(kStateDim);
}

Eigen::VectorXd CartPole::reset(Rng& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int i = 0; i < kStateDim; ++i) state_(i) = u(rng);
  steps_ = 0;
  done_ = false;
  return state_;
}

StepResult CartPole::step(int action) {
  if (done_) throw std::logic_error("CartPole::step called after episode end");
  if (action != 0 && action != 1)
    throw std::invalid_argument("CartPole: bad action " + std::to_string(action));

  double x = state_(0), x_dot = state_(1), theta = state_(2), theta_dot = state_(3);
  const double force = action == 1 ? kForceMag : -kForceMag;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp =
      (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  x += kTau * x_dot;
  x_dot += kTau * x_acc;
  theta += kTau * theta_dot;
  theta_dot += kTau * theta_acc;
  state_ << x, x_dot, theta, theta_dot;
  steps_ += 1;

  StepResult result;
  result.next_state = state_;
  const bool failed =
      std::abs(x) > kXThreshold || std::abs(theta) > kThetaThreshold;
  if (failed) {
    done_ = true;
    result.reward = 0.0;
  } else {
    result.reward = 1.0;
    if (steps_ >= max_steps_) {
      done_ = true;
      result.truncated = true;
    }
  }
  result.done = done_;
  return result;
}

// ---------------------------------------------------------------------------

NoiseModel::NoiseModel(double sigma, std::uint64_t seed)
    : sigma_(sigma), rng_(seed) {
  if (sigma < 0.0) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
}

double NoiseModel::apply(double reward) {
  if (sigma_ == 0.0) return reward;
  return reward + sigma_ * dist_(rng_);
}

RewardMode reward_mode_from_string(const std::string& name) {
  if (name == "immediate") return RewardMode::Immediate;
  if (name == "delayed") return RewardMode::Delayed;
  if (name == "inferred") return RewardMode::Inferred;
  throw std::invalid_argument("unknown reward mode: " + name);
}

std::string to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::Immediate: return "immediate";
    case RewardMode::Delayed: return "delayed";
    case RewardMode::Inferred: return "inferred";
  }
  return "?";
}

std::vector<double> wrap_rewards(RewardMode mode, const lab::Episode& episode) {
  std::vector<double> out;
  out.reserve(episode.steps.size());
  for (const Step& s : episode.steps) out.push_back(s.reward);
  if (mode == RewardMode::Delayed && !out.empty()) {
    double sum = 0.0;
    for (double r : out) sum += r;
    std::fill(out.begin(), out.end(), 0.0);
    out.back() = sum;
  }
  return out;
}

// ---------------------------------------------------------------------------

double GridSolution::start_value(const GridWorld& env) const {
  return values[static_cast<std::size_t>(env.start_cell())];
}

GridSolution value_iterate(const GridWorld& env, double gamma, double tol) {
  const int num_cells = env.num_cells();
  const int num_masks = 1 << (GridWorld::kNumPositive + GridWorld::kNumNegative);
  const int n = num_cells * num_masks;
  const auto& reward_cells = env.reward_cell_ids();

  // Precompute per-cell transition targets and reward-cell index.
  std::vector<std::array<int, GridWorld::kNumActions>> next_cell(num_cells);
  std::vector<int> reward_index(num_cells, -1);
  for (std::size_t i = 0; i < reward_cells.size(); ++i)
    reward_index[reward_cells[i]] = static_cast<int>(i);
  for (int cell = 0; cell < num_cells; ++cell) {
    int row = cell / GridWorld::kWidth, col = cell % GridWorld::kWidth;
    next_cell[cell][0] = std::max(0, row - 1) * GridWorld::kWidth + col;
    next_cell[cell][1] = row * GridWorld::kWidth + std::max(0, col - 1);
    next_cell[cell][2] =
        std::min(GridWorld::kHeight - 1, row + 1) * GridWorld::kWidth + col;
  }

  GridSolution sol;
  sol.gamma = gamma;
  sol.values.assign(n, 0.0);
  sol.policy.assign(n, 0);
  const int terminal = env.terminal_cell();

  double delta = tol + 1.0;
  while (delta > tol) {
    delta = 0.0;
    for (int mask = 0; mask < num_masks; ++mask) {
      for (int cell = 0; cell < num_cells; ++cell) {
        if (cell == terminal) continue;  // absorbing, value 0
        const int idx = mask * num_cells + cell;
        double best = -1e300;
        int best_a = 0;
        for (int a = 0; a < GridWorld::kNumActions; ++a) {
          const int nc = next_cell[cell][a];
          double r = 0.0;
          int nmask = mask;
          const int ri = reward_index[nc];
          if (ri >= 0 && !(mask & (1 << ri))) {
            r = env.reward_at(nc);
            nmask = mask | (1 << ri);
          }
          const double v =
              nc == terminal ? r : r + gamma * sol.values[nmask * num_cells + nc];
          if (v > best) {
            best = v;
            best_a = a;
          }
        }
        delta = std::max(delta, std::abs(best - sol.values[idx]));
        sol.values[idx] = best;
        sol.policy[idx] = best_a;
      }
    }
  }
  return sol;
}

double optimal_return(const GridWorld& env, double gamma) {
  GridSolution sol = value_iterate(env, gamma);
  GridWorld rollout(env.layout_seed(), env.max_steps());
  int cell = rollout.reset();
  double total = 0.0;
  while (!rollout.done()) {
    const int idx =
        static_cast<int>(rollout.consumed_mask()) * rollout.num_cells() + cell;
    auto r = rollout.step(sol.policy[idx]);
    total += r.reward;
    cell = r.next_cell;
  }
  return total;
}

}  // namespace lab::env
