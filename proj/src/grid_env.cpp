#include "amrl/grid_env.hpp"

#include <stdexcept>
#include <string>

namespace amrl {

Action Action::from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw std::out_of_range("action index " + std::to_string(index) +
                            " outside 0..7");
  }
  return Action{static_cast<Direction>(index / 2), (index % 2) == 1};
}

char direction_letter(Direction d) {
  switch (d) {
    case Direction::Up: return 'U';
    case Direction::Down: return 'D';
    case Direction::Left: return 'L';
    case Direction::Right: return 'R';
  }
  return '?';
}

Cell offset(Direction d) {
  switch (d) {
    case Direction::Up: return {-1, 0};
    case Direction::Down: return {1, 0};
    case Direction::Left: return {0, -1};
    case Direction::Right: return {0, 1};
  }
  return {0, 0};
}

Observation observe(const EnvState& state, const ObservationConfig& config) {
  const Section& section = *state.section;
  Observation obs;
  obs.channels = config.nozzle_channel ? 2 : 1;
  obs.height = section.height();
  obs.width = section.width();
  const std::size_t plane = static_cast<std::size_t>(obs.height) * obs.width;
  obs.image.assign(plane * obs.channels, 0.0f);
  const auto& mask = section.mask();
  for (std::size_t i = 0; i < plane; ++i) {
    obs.image[i] = (mask[i] && !state.filled[i]) ? 1.0f : 0.0f;
  }
  if (config.nozzle_channel) {
    obs.image[plane + static_cast<std::size_t>(state.nozzle.row) * obs.width +
              state.nozzle.col] = 1.0f;
  }
  const auto& history = state.action_history;
  const int n = static_cast<int>(history.size());
  for (int slot = 0; slot < kHistoryLength; ++slot) {
    const int h = n - kHistoryLength + slot;
    if (h < 0) continue;
    obs.history[slot * kNumActions + history[h].index()] = 1.0f;
  }
  return obs;
}

namespace {
constexpr std::array<Direction, 5> kPattern = {
    Direction::Up, Direction::Up, Direction::Right, Direction::Down,
    Direction::Down};
constexpr int kMinPartial = 3;
}  // namespace

double pattern_score(std::span<const Action> actions) {
  const std::size_t n = actions.size();
  const std::size_t p = kPattern.size();
  long matched = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t len = 0;
    while (len < p && i + len < n && actions[i + len].direction == kPattern[len]) {
      ++len;
    }
    if (len >= static_cast<std::size_t>(kMinPartial)) {
      matched += static_cast<long>(len);
      i += len;
    } else {
      ++i;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(p);
}

double sparse_episode_reward(const EnvState& state) {
  if (!state.terminal()) {
    throw std::logic_error("sparse episode reward requested for a running episode");
  }
  return pattern_score(state.action_history) +
         kSparseAuxiliary * state.correct_deposits -
         kSparseAuxiliary * state.wrong_deposits;
}

GridEnv::GridEnv(EnvConfig config) : config_(config) {
  if (config_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
}

const EnvState& GridEnv::reset(std::shared_ptr<const Section> section, Rng& rng) {
  if (!section) throw std::invalid_argument("reset with null section");
  const int row = uniform_int(rng, 0, section->height() - 1);
  const int col = uniform_int(rng, 0, section->width() - 1);
  return reset_at(std::move(section), Cell{row, col});
}

const EnvState& GridEnv::reset_at(std::shared_ptr<const Section> section,
                                  Cell start) {
  if (!section) throw std::invalid_argument("reset with null section");
  if (section->desired_count() == 0) {
    throw std::invalid_argument("cannot reset on section '" + section->name() +
                                "': it has no desired pixels");
  }
  if (!section->in_bounds(start.row, start.col)) {
    throw std::out_of_range("start cell outside the section grid");
  }
  state_ = EnvState{};
  state_.filled.assign(section->mask().size(), 0);
  state_.section = std::move(section);
  state_.nozzle = start;
  state_.horizon = config_.horizon;
  state_.action_history.reserve(config_.horizon);
  remaining_ = state_.section->desired_count();
  return state_;
}

StepOutcome GridEnv::step(Action action) {
  if (!state_.section) throw std::logic_error("step before reset");
  if (state_.terminal()) throw std::logic_error("step on a terminal state");

  const Section& section = *state_.section;
  StepOutcome out;
  const Cell d = offset(action.direction);
  const Cell target{state_.nozzle.row + d.row, state_.nozzle.col + d.col};
  if (section.in_bounds(target.row, target.col)) {
    state_.nozzle = target;
  } else {
    out.blocked = true;
  }

  double sparse = 0.0;
  if (action.deposit) {
    const auto idx =
        static_cast<std::size_t>(state_.nozzle.row) * section.width() + state_.nozzle.col;
    if (section.mask()[idx] && !state_.filled[idx]) {
      state_.filled[idx] = 1;
      ++state_.correct_deposits;
      --remaining_;
      out.kind = StepKind::CorrectDeposit;
      out.reward_dense = kRewardCorrect;
      sparse = kSparseAuxiliary;
    } else {
      ++state_.wrong_deposits;
      out.kind = StepKind::WrongDeposit;
      out.reward_dense = kRewardWrong;
      sparse = -kSparseAuxiliary;
    }
  } else {
    ++state_.idle_moves;
    out.kind = out.blocked ? StepKind::BlockedMove : StepKind::MoveOnly;
    out.reward_dense = kRewardIdle;
  }

  state_.action_history.push_back(action);
  ++state_.step_count;
  if (remaining_ == 0) {
    state_.done_reason = DoneReason::SectionComplete;
  } else if (state_.step_count >= config_.horizon) {
    state_.done_reason = DoneReason::HorizonReached;
  }
  out.done = state_.terminal();
  out.done_reason = state_.done_reason;

  if (config_.reward_mode == RewardMode::Dense) {
    out.reward = out.reward_dense;
  } else {
    out.reward = sparse;
    if (out.done) out.reward += pattern_score(state_.action_history);
  }
  return out;
}

}  // namespace amrl
