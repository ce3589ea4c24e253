#include "amrl/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "amrl/dqn.hpp"
#include "amrl/ppo.hpp"
#include "amrl/sac.hpp"
#include "amrl/svg.hpp"

namespace amrl {

Rng derive_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, 0x616d726cu};
  return Rng(seq);
}

void tune_allocator() {
#if defined(__GLIBC__)
  // Batch activations are a few hundred KB, above glibc's default mmap
  // threshold, so every forward pass would map and unmap fresh pages.
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
  });
#endif
}

int random_policy(Rng& rng) { return uniform_int(rng, 0, kNumActions - 1); }

std::vector<Action> zigzag_policy(const Section& section, Cell start) {
  int r0 = section.height(), r1 = -1, c0 = section.width(), c1 = -1;
  for (int r = 0; r < section.height(); ++r) {
    for (int c = 0; c < section.width(); ++c) {
      if (!section.desired(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  std::vector<Action> plan;
  if (r1 < 0) return plan;

  std::vector<std::uint8_t> filled(section.mask().size(), 0);
  Cell pos = start;
  const auto move = [&](Direction d) {
    const Cell o = offset(d);
    pos = Cell{pos.row + o.row, pos.col + o.col};
    const auto idx = static_cast<std::size_t>(pos.row) * section.width() + pos.col;
    const bool deposit = section.desired(pos.row, pos.col) && !filled[idx];
    if (deposit) filled[idx] = 1;
    plan.push_back(Action{d, deposit});
  };

  while (pos.row > r0) move(Direction::Up);
  while (pos.row < r0) move(Direction::Down);
  while (pos.col > c0) move(Direction::Left);
  while (pos.col < c0) move(Direction::Right);
  for (int r = r0; r <= r1; ++r) {
    const bool rightward = (r - r0) % 2 == 0;
    for (int k = c0; k < c1; ++k) move(rightward ? Direction::Right : Direction::Left);
    if (r < r1) move(Direction::Down);
  }
  return plan;
}

void ZigzagPolicy::begin_episode(const EnvState& state) {
  plan_ = zigzag_policy(*state.section, state.nozzle);
  next_ = 0;
}

std::optional<int> ZigzagPolicy::act(const EnvState&, const Observation&) {
  if (next_ >= plan_.size()) return std::nullopt;
  return plan_[next_++].index();
}

EpisodeResult run_episode(Policy& policy, GridEnv& env, std::shared_ptr<const Section> section,
                          Cell start) {
  EpisodeResult result;
  result.section = section;
  result.start = start;
  env.reset_at(std::move(section), start);
  policy.begin_episode(env.state());
  while (!env.state().terminal()) {
    const auto a = policy.act(env.state(), env.observe());
    if (!a) break;
    const auto out = env.step(*a);
    result.actions.push_back(Action::from_index(*a));
    result.score += out.reward;
  }
  result.done_reason = env.state().done_reason;
  return result;
}

double EvalResult::standard_error() const {
  return scores.empty() ? 0.0 : score_std / std::sqrt(static_cast<double>(scores.size()));
}

EvalResult evaluate(Policy& policy, const SectionDataset& dataset, const EnvConfig& env_config,
                    int episodes, Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("evaluate needs at least one episode");
  GridEnv env(env_config);
  EvalResult out;
  double total_len = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const auto& section = dataset.sample(rng);
    const Cell start{uniform_int(rng, 0, section->height() - 1),
                     uniform_int(rng, 0, section->width() - 1)};
    const auto ep = run_episode(policy, env, section, start);
    out.scores.push_back(ep.score);
    total_len += static_cast<double>(ep.actions.size());
  }
  double sum = 0.0;
  for (const double s : out.scores) sum += s;
  out.mean_score = sum / episodes;
  out.mean_length = total_len / episodes;
  if (episodes > 1) {
    double ss = 0.0;
    for (const double s : out.scores) ss += (s - out.mean_score) * (s - out.mean_score);
    out.score_std = std::sqrt(ss / (episodes - 1));
  }
  return out;
}

RunDatasets load_datasets(const TrainConfig& config) {
  SectionDataset all = config.sections_dir.empty()
                           ? SectionDataset::generated(config.dataset_count, config.generator,
                                                       config.dataset_seed)
                           : SectionDataset::from_directory(config.sections_dir);
  const int h = all[0]->height();
  const int w = all[0]->width();
  for (const auto& s : all.sections()) {
    if (s->height() != h || s->width() != w) {
      throw std::invalid_argument("section '" + s->name() + "' is " + std::to_string(s->width()) +
                                  "x" + std::to_string(s->height()) + " but the dataset uses " +
                                  std::to_string(w) + "x" + std::to_string(h));
    }
  }
  if (config.holdout_fraction > 0.0) {
    auto [train, eval] = all.split_holdout(config.holdout_fraction);
    return RunDatasets{std::move(train), std::move(eval), h, w};
  }
  return RunDatasets{all, all, h, w};
}

namespace {

constexpr std::uint32_t kInitStream = 1;
constexpr std::uint32_t kTrainStream = 2;
constexpr std::uint32_t kEvalStream = 3;

nn::NetworkSpec head_spec(nn::NetworkSpec trunk, const std::string& head) {
  trunk.heads = {{head, kNumActions}};
  return trunk;
}

// Evaluation, metrics logging and checkpointing shared by the three loops.
class RunLog {
 public:
  RunLog(const TrainConfig& config, const TrainOptions& options, const RunDatasets& data)
      : config_(config), options_(options), data_(data),
        start_(std::chrono::steady_clock::now()) {
    if (!options_.out_dir.empty()) {
      std::filesystem::create_directories(options_.out_dir);
      write_text_file(options_.out_dir / "config.txt", serialize_config(config_));
      csv_.open(options_.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
      if (!csv_) throw std::runtime_error("cannot write metrics.csv in " + options_.out_dir.string());
      csv_ << kMetricsHeader << '\n';
      csv_.flush();
    }
  }

  // Greedy evaluation on a freshly seeded stream so every evaluation sees the
  // same sections and starts.
  template <typename SaveFn>
  void evaluate_now(Policy& policy, long env_steps, long episodes, long train_steps,
                    const Rng& train_rng, SaveFn save) {
    Rng eval_rng = derive_rng(config_.seed, kEvalStream);
    const auto res = evaluate(policy, data_.eval, config_.env_config(), config_.eval_episodes,
                              eval_rng);
    EvalRow row{env_steps, episodes, res.mean_score, res.score_std, res.mean_length, 0.0};
    if (config_.log_wall_clock) {
      row.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                             .count();
    }
    result_.record.rows.push_back(row);
    if (csv_.is_open()) {
      csv_ << format_metrics_row(row) << '\n';
      csv_.flush();
    }
    if (!has_best_ || row.mean_score > best_score_) {
      has_best_ = true;
      best_score_ = row.mean_score;
      result_.best_checkpoint = nn::Checkpoint{};
      save(result_.best_checkpoint);
      write_checkpoint("best.ckpt", result_.best_checkpoint, train_steps, train_rng);
    }
    if (options_.on_eval) options_.on_eval(row);
  }

  void finish(nn::Checkpoint final_ckpt, long env_steps, long episodes, long train_steps,
              const Rng& train_rng) {
    result_.final_checkpoint = std::move(final_ckpt);
    result_.env_steps = env_steps;
    result_.episodes = episodes;
    result_.train_steps = train_steps;
    write_checkpoint("final.ckpt", result_.final_checkpoint, train_steps, train_rng);
    if (!options_.out_dir.empty()) {
      CurveSeries s{to_string(config_.algorithm), result_.record, false};
      LearningCurveOptions opts;
      opts.title = to_string(config_.algorithm) + " (" + to_string(config_.reward_mode) +
                   " reward, seed " + std::to_string(config_.seed) + ")";
      write_text_file(options_.out_dir / "learning_curve.svg",
                      render_learning_curve_svg(std::span<const CurveSeries>(&s, 1), opts));
    }
  }

  void diverged(const std::exception& e, long env_steps) {
    if (options_.out_dir.empty()) return;
    write_text_file(options_.out_dir / "diverged.txt",
                    "env_steps = " + std::to_string(env_steps) + "\nerror = " + e.what() + "\n");
  }

  TrainResult take() { return std::move(result_); }
  long last_eval_steps() const {
    return result_.record.rows.empty() ? -1 : result_.record.rows.back().env_steps;
  }

 private:
  void write_checkpoint(const std::string& name, const nn::Checkpoint& ckpt, long train_steps,
                        const Rng& rng) {
    if (options_.out_dir.empty()) return;
    ckpt.save(options_.out_dir / name);
    std::vector<std::pair<std::string, std::string>> m = {
        {"algorithm", to_string(config_.algorithm)},
        {"config_hash", config_hash(config_)},
        {"train_steps", std::to_string(train_steps)},
        {"section_height", std::to_string(data_.height)},
        {"section_width", std::to_string(data_.width)},
        {"rng_state", rng_state(rng)},
    };
    for (const auto& [k, v] : parse_key_values(serialize_config(config_))) {
      m.emplace_back("config." + k, v);
    }
    write_text_file(options_.out_dir / (name + ".manifest"), format_key_values(m));
  }

  const TrainConfig& config_;
  const TrainOptions& options_;
  const RunDatasets& data_;
  std::chrono::steady_clock::time_point start_;
  std::ofstream csv_;
  TrainResult result_;
  bool has_best_ = false;
  double best_score_ = 0.0;
};

template <typename Agent>
nn::Checkpoint snapshot(const Agent& agent) {
  nn::Checkpoint c;
  agent.save(c);
  return c;
}

// DQN and SAC share the off-policy loop; only action selection differs.
template <typename Agent, typename ActFn>
void off_policy_loop(const TrainConfig& config, const RunDatasets& data, Agent& agent,
                     RunLog& log, Rng& rng, ActFn act, int train_every, long& train_steps,
                     long& env_steps, long& episodes) {
  GreedyPolicy greedy([&agent](const Observation& o) { return agent.greedy(o); });
  const auto save = [&agent](nn::Checkpoint& c) { agent.save(c); };
  log.evaluate_now(greedy, 0, 0, 0, rng, save);

  GridEnv env(config.env_config());
  env.reset(data.train.sample(rng), rng);
  Observation obs = env.observe();
  const long total = config.total_env_steps;
  for (long step = 1; step <= total; ++step) {
    const int a = act(obs, step - 1, total);
    const auto out = env.step(a);
    Observation next = env.observe();
    agent.remember(Transition{obs, a, out.reward, next, out.done});
    env_steps = step;
    if (out.done) {
      ++episodes;
      env.reset(data.train.sample(rng), rng);
      obs = env.observe();
    } else {
      obs = std::move(next);
    }
    if (agent.ready() && step % train_every == 0) {
      agent.train_step(rng);
      ++train_steps;
    }
    if (step % config.eval_interval_steps == 0) {
      log.evaluate_now(greedy, env_steps, episodes, train_steps, rng, save);
    }
  }
  if (log.last_eval_steps() != env_steps) {
    log.evaluate_now(greedy, env_steps, episodes, train_steps, rng, save);
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  tune_allocator();
  const RunDatasets data = load_datasets(config);
  const nn::NetworkSpec trunk = config.trunk_spec(data.height, data.width);
  Rng init_rng = derive_rng(config.seed, kInitStream);
  Rng rng = derive_rng(config.seed, kTrainStream);
  RunLog log(config, options, data);

  long env_steps = 0, episodes = 0, train_steps = 0;
  try {
    switch (config.algorithm) {
      case Algorithm::Dqn: {
        DqnAgent<float> agent(head_spec(trunk, kQHead), config.dqn, init_rng);
        const auto act = [&](const Observation& o, long step, long total) {
          return agent.act(o, linear_epsilon(config.dqn, step, total), rng);
        };
        off_policy_loop(config, data, agent, log, rng, act, config.dqn.train_every, train_steps,
                        env_steps, episodes);
        log.finish(snapshot(agent), env_steps, episodes, train_steps, rng);
        break;
      }
      case Algorithm::Sac: {
        SacAgent<float> agent(trunk, config.sac, init_rng);
        const auto act = [&](const Observation& o, long, long) { return agent.act(o, rng); };
        off_policy_loop(config, data, agent, log, rng, act, config.sac.train_every, train_steps,
                        env_steps, episodes);
        log.finish(snapshot(agent), env_steps, episodes, train_steps, rng);
        break;
      }
      case Algorithm::Ppo: {
        PpoAgent<float> agent(trunk, config.ppo, init_rng);
        GreedyPolicy greedy([&agent](const Observation& o) { return agent.greedy(o); });
        const auto save = [&agent](nn::Checkpoint& c) { agent.save(c); };
        log.evaluate_now(greedy, 0, 0, 0, rng, save);
        EnvStreams streams(data.train, config.env_config(), config.ppo.num_envs, rng);
        long iteration = 0;
        const auto budget_left = [&] {
          if (streams.total_steps() >= config.total_env_steps) return false;
          return config.total_episodes == 0 || streams.total_episodes() < config.total_episodes;
        };
        while (budget_left()) {
          RolloutBatch batch = agent.collect(streams, rng);
          compute_advantages(batch, config.ppo.gamma, config.ppo.gae_lambda,
                             config.ppo.normalize_advantages);
          agent.update(batch, rng);
          ++iteration;
          env_steps = streams.total_steps();
          episodes = streams.total_episodes();
          train_steps = agent.updates();
          if (iteration % config.eval_interval_iterations == 0) {
            log.evaluate_now(greedy, env_steps, episodes, train_steps, rng, save);
          }
        }
        if (log.last_eval_steps() != env_steps) {
          log.evaluate_now(greedy, env_steps, episodes, train_steps, rng, save);
        }
        log.finish(snapshot(agent), env_steps, episodes, train_steps, rng);
        break;
      }
    }
  } catch (const NonFiniteError& e) {
    log.diverged(e, env_steps);
    throw;
  }
  return log.take();
}

std::unique_ptr<Policy> make_greedy_policy(const TrainConfig& config,
                                           const nn::Checkpoint& checkpoint, int height,
                                           int width) {
  const nn::NetworkSpec trunk = config.trunk_spec(height, width);
  Rng init_rng = derive_rng(config.seed, kInitStream);
  switch (config.algorithm) {
    case Algorithm::Dqn: {
      auto agent = std::make_shared<DqnAgent<float>>(head_spec(trunk, kQHead), config.dqn, init_rng);
      agent->load(checkpoint);
      return std::make_unique<GreedyPolicy>([agent](const Observation& o) { return agent->greedy(o); });
    }
    case Algorithm::Ppo: {
      auto agent = std::make_shared<PpoAgent<float>>(trunk, config.ppo, init_rng);
      agent->load(checkpoint);
      return std::make_unique<GreedyPolicy>([agent](const Observation& o) { return agent->greedy(o); });
    }
    case Algorithm::Sac: {
      SacConfig sac = config.sac;
      sac.buffer_capacity = static_cast<std::size_t>(sac.batch_size);
      auto agent = std::make_shared<SacAgent<float>>(trunk, sac, init_rng);
      agent->load(checkpoint);
      return std::make_unique<GreedyPolicy>([agent](const Observation& o) { return agent->greedy(o); });
    }
  }
  throw std::logic_error("unknown algorithm");
}

LoadedAgent load_agent(const std::filesystem::path& checkpoint) {
  auto manifest_path = checkpoint;
  manifest_path += ".manifest";
  std::string config_text;
  LoadedAgent out;
  for (const auto& [k, v] : parse_key_values(read_text_file(manifest_path))) {
    if (k.rfind("config.", 0) == 0) {
      config_text += k.substr(7) + " = " + v + "\n";
    } else if (k == "section_height") {
      out.height = std::stoi(v);
    } else if (k == "section_width") {
      out.width = std::stoi(v);
    }
  }
  if (out.height <= 0 || out.width <= 0) {
    throw std::runtime_error(manifest_path.string() + " lacks the section size");
  }
  out.config = parse_config(config_text);
  out.policy = make_greedy_policy(out.config, nn::Checkpoint::load(checkpoint), out.height,
                                  out.width);
  return out;
}

}  // namespace amrl
