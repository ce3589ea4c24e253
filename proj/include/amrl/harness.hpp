#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amrl/checkpoint.hpp"
#include "amrl/config.hpp"
#include "amrl/geometry.hpp"
#include "amrl/grid_env.hpp"
#include "amrl/run_record.hpp"

namespace amrl {

// Stream-separated generator derived from the run seed.
Rng derive_rng(std::uint64_t seed, std::uint32_t stream);

// Keeps large training buffers in the heap instead of fresh mmaps (glibc
// only; a no-op elsewhere). train() calls it; safe to call repeatedly.
void tune_allocator();

// Deterministic or stochastic controller driven one step at a time.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(const EnvState& /*state*/) {}
  // std::nullopt ends the episode early (e.g. a finished scripted plan).
  virtual std::optional<int> act(const EnvState& state, const Observation& obs) = 0;
};

class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(std::function<int(const Observation&)> pick) : pick_(std::move(pick)) {}
  std::optional<int> act(const EnvState&, const Observation& obs) override { return pick_(obs); }

 private:
  std::function<int(const Observation&)> pick_;
};

int random_policy(Rng& rng);

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  std::optional<int> act(const EnvState&, const Observation&) override {
    return random_policy(rng_);
  }

 private:
  Rng rng_;
};

// Moves to the top-left corner of the section's bounding box (rows first,
// then columns), then sweeps the box row by row alternating direction.
// Every move deposits exactly when the cell it enters is an unfilled desired
// pixel.
std::vector<Action> zigzag_policy(const Section& section, Cell start);

class ZigzagPolicy : public Policy {
 public:
  void begin_episode(const EnvState& state) override;
  std::optional<int> act(const EnvState& state, const Observation& obs) override;

 private:
  std::vector<Action> plan_;
  std::size_t next_ = 0;
};

struct EpisodeResult {
  std::shared_ptr<const Section> section;
  Cell start;
  std::vector<Action> actions;
  double score = 0.0;  // undiscounted sum of rewards
  DoneReason done_reason = DoneReason::NotDone;  // NotDone if the policy stopped
};

EpisodeResult run_episode(Policy& policy, GridEnv& env, std::shared_ptr<const Section> section,
                          Cell start);

struct EvalResult {
  double mean_score = 0.0;
  double score_std = 0.0;  // sample standard deviation; 0 for one episode
  double mean_length = 0.0;
  std::vector<double> scores;

  double standard_error() const;
};

// Each episode draws a section and then a start cell from rng.
EvalResult evaluate(Policy& policy, const SectionDataset& dataset, const EnvConfig& env,
                    int episodes, Rng& rng);

// Training sections and evaluation sections (the holdout split, or the same
// sections when holdout_fraction is 0).
struct RunDatasets {
  SectionDataset train;
  SectionDataset eval;
  int height = 0;
  int width = 0;
};
RunDatasets load_datasets(const TrainConfig& config);

struct TrainOptions {
  // Empty: keep everything in memory.
  std::filesystem::path out_dir;
  std::function<void(const EvalRow&)> on_eval;
};

struct TrainResult {
  RunRecord record;
  nn::Checkpoint best_checkpoint;
  nn::Checkpoint final_checkpoint;
  long env_steps = 0;
  long episodes = 0;
  long train_steps = 0;
};

// Seeded run of the configured agent. With an out_dir it writes config.txt,
// metrics.csv (row by row), best.ckpt, final.ckpt, a manifest next to each
// checkpoint, and learning_curve.svg. A non-finite training signal writes
// diverged.txt and rethrows.
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

// Greedy policy of a checkpoint produced by train() for the given config.
std::unique_ptr<Policy> make_greedy_policy(const TrainConfig& config,
                                           const nn::Checkpoint& checkpoint, int height,
                                           int width);

struct LoadedAgent {
  TrainConfig config;
  int height = 0;
  int width = 0;
  std::unique_ptr<Policy> policy;
};

// Reads <checkpoint>.manifest for the config and section size.
LoadedAgent load_agent(const std::filesystem::path& checkpoint);

}  // namespace amrl
