#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "amrl/geometry.hpp"
#include "amrl/rng.hpp"

namespace amrl {

enum class Direction : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr int kNumActions = 8;
inline constexpr int kHistoryLength = 10;
inline constexpr int kHistoryDim = kHistoryLength * kNumActions;

// Index layout is part of the toolpath serialization contract:
// index = 2 * direction + deposit.
struct Action {
  Direction direction = Direction::Up;
  bool deposit = false;

  constexpr int index() const {
    return 2 * static_cast<int>(direction) + (deposit ? 1 : 0);
  }
  static Action from_index(int index);

  friend bool operator==(const Action&, const Action&) = default;
};

char direction_letter(Direction d);
Cell offset(Direction d);

enum class RewardMode { Dense, Sparse };

struct ObservationConfig {
  // Adds a second image channel marking the nozzle pixel.
  bool nozzle_channel = false;
};

struct EnvConfig {
  int horizon = 400;
  RewardMode reward_mode = RewardMode::Dense;
  ObservationConfig observation;
};

enum class StepKind { CorrectDeposit, WrongDeposit, MoveOnly, BlockedMove };
enum class DoneReason { NotDone, SectionComplete, HorizonReached };

inline constexpr double kRewardCorrect = 1.0;
inline constexpr double kRewardWrong = -1.0;
inline constexpr double kRewardIdle = -0.5;
inline constexpr double kSparseAuxiliary = 0.1;

struct StepOutcome {
  StepKind kind = StepKind::MoveOnly;
  bool blocked = false;  // the move would have left the grid
  double reward_dense = 0.0;
  double reward = 0.0;  // reward under the configured mode
  bool done = false;
  DoneReason done_reason = DoneReason::NotDone;
};

struct EnvState {
  std::shared_ptr<const Section> section;
  std::vector<std::uint8_t> filled;
  Cell nozzle;
  int step_count = 0;
  std::vector<Action> action_history;
  int correct_deposits = 0;
  int wrong_deposits = 0;
  int idle_moves = 0;
  int horizon = 400;
  DoneReason done_reason = DoneReason::NotDone;

  bool terminal() const { return done_reason != DoneReason::NotDone; }
  bool is_filled(int row, int col) const {
    return filled[static_cast<std::size_t>(row) * section->width() + col] != 0;
  }
};

struct Observation {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<float> image;  // channel-major, then row-major
  std::array<float, kHistoryDim> history{};

  float pixel(int channel, int row, int col) const {
    return image[(static_cast<std::size_t>(channel) * height + row) * width + col];
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation observe(const EnvState& state, const ObservationConfig& config);

// Greedy left-to-right, non-overlapping matches of the hidden direction
// pattern Up Up Right Down Down. At each position the longest matching
// prefix of length 3..5 scores length / 5.
double pattern_score(std::span<const Action> actions);

// Pattern term plus 0.1 per correct and -0.1 per wrong deposit.
double sparse_episode_reward(const EnvState& state);

class GridEnv {
 public:
  explicit GridEnv(EnvConfig config = {});

  const EnvState& reset(std::shared_ptr<const Section> section, Rng& rng);
  const EnvState& reset_at(std::shared_ptr<const Section> section, Cell start);
  StepOutcome step(Action action);
  StepOutcome step(int action_index) { return step(Action::from_index(action_index)); }

  Observation observe() const { return amrl::observe(state_, config_.observation); }
  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }

 private:
  EnvConfig config_;
  EnvState state_;
  int remaining_ = 0;
};

}  // namespace amrl
