// amrl: train, evaluate and inspect toolpath agents from the shell.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "amrl/config.hpp"
#include "amrl/harness.hpp"
#include "amrl/svg.hpp"
#include "amrl/toolpath.hpp"

namespace fs = std::filesystem;
using namespace amrl;

namespace {

void print_eval(const std::string& what, const EvalResult& r) {
  std::printf("%s: mean_score=%s score_std=%s stderr=%s mean_ep_len=%s episodes=%zu\n",
              what.c_str(), format_double(r.mean_score).c_str(),
              format_double(r.score_std).c_str(), format_double(r.standard_error()).c_str(),
              format_double(r.mean_length).c_str(), r.scores.size());
}

// Replays the first episode of every distinct section and writes
// <section>_<tag>_<seed>.path.txt and .svg into dir.
void export_paths(Policy& policy, const SectionDataset& sections, const EnvConfig& env_config,
                  int episodes, std::uint64_t seed, const std::string& tag, const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng = derive_rng(seed, 3);
  GridEnv env(env_config);
  std::set<std::string> done;
  for (int e = 0; e < episodes; ++e) {
    const auto& section = sections.sample(rng);
    const Cell start{uniform_int(rng, 0, section->height() - 1),
                     uniform_int(rng, 0, section->width() - 1)};
    const auto ep = run_episode(policy, env, section, start);
    if (!done.insert(section->name()).second) continue;
    const Toolpath path = record_toolpath(section, start, ep.actions);
    const std::string stem = section->name() + "_" + tag + "_" + std::to_string(seed);
    write_text_file(dir / (stem + ".path.txt"), export_toolpath(path));
    write_text_file(dir / (stem + ".svg"), render_toolpath_svg(path, *section));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learning workbench for additive-manufacturing toolpaths"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an agent and log evaluations");
  std::string algo, reward, config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> overrides;
  train_cmd->add_option("--algo", algo, "dqn, ppo or sac")->check(CLI::IsMember({"dqn", "ppo", "sac"}));
  train_cmd->add_option("--reward", reward, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
  train_cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  auto* seed_opt = train_cmd->add_option("--seed", seed, "run seed");
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--set", overrides, "extra key=value override (repeatable)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a saved checkpoint");
  std::string checkpoint, sections_dir, export_dir;
  int episodes = 16;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--sections", sections_dir, "directory of .sect files")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--episodes", episodes, "episodes to run")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--export", export_dir, "write toolpath text and SVG files here");

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "Score a scripted strategy");
  std::string strategy = "zigzag";
  std::string base_sections, base_reward = "dense", base_export;
  int base_episodes = 100, base_horizon = 400;
  std::uint64_t base_seed = 0;
  base_cmd->add_option("--strategy", strategy, "zigzag or random")->check(CLI::IsMember({"zigzag", "random"}));
  base_cmd->add_option("--sections", base_sections, "directory of .sect files")->required()->check(CLI::ExistingDirectory);
  base_cmd->add_option("--episodes", base_episodes, "episodes to run")->check(CLI::PositiveNumber);
  base_cmd->add_option("--horizon", base_horizon, "episode step limit")->check(CLI::PositiveNumber);
  base_cmd->add_option("--reward", base_reward, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
  base_cmd->add_option("--seed", base_seed, "evaluation seed");
  base_cmd->add_option("--export", base_export, "write toolpath text and SVG files here");

  // gen-sections
  auto* gen_cmd = app.add_subcommand("gen-sections", "Write random rectangle/ellipse sections");
  int count = 10, size = 32, min_shapes = 1, max_shapes = 3;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen_cmd->add_option("--count", count, "number of sections")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--size", size, "grid side in pixels")->required()->check(CLI::Range(2, 4096));
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--min-shapes", min_shapes, "fewest shapes per section");
  gen_cmd->add_option("--max-shapes", max_shapes, "most shapes per section");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render metrics CSVs as a learning-curve SVG");
  std::vector<std::string> series_args, episode_axis;
  std::optional<double> baseline;
  std::string plot_out, title;
  plot_cmd->add_option("--series", series_args, "label=path/to/metrics.csv (repeatable)")->required();
  plot_cmd->add_option("--episode-axis", episode_axis, "labels plotted against episodes");
  plot_cmd->add_option("--baseline", baseline, "horizontal reference score");
  plot_cmd->add_option("--title", title, "chart title");
  plot_cmd->add_option("--out", plot_out, "output SVG path")->required();

  auto* keys_cmd = app.add_subcommand("config-keys", "List every config key with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      TrainConfig cfg;
      if (!config_path.empty()) cfg = load_config(config_path);
      std::string extra;
      if (!algo.empty()) extra += "algorithm = " + algo + "\n";
      if (!reward.empty()) extra += "reward_mode = " + reward + "\n";
      if (*seed_opt) extra += "seed = " + std::to_string(seed) + "\n";
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        extra += kv.substr(0, eq) + " = " + kv.substr(eq + 1) + "\n";
      }
      cfg = parse_config(extra, cfg);
      TrainOptions opts;
      opts.out_dir = out_dir;
      opts.on_eval = [](const EvalRow& r) {
        std::printf("steps=%ld episodes=%ld mean_score=%s score_std=%s mean_ep_len=%s\n",
                    r.env_steps, r.episodes, format_double(r.mean_score).c_str(),
                    format_double(r.score_std).c_str(), format_double(r.mean_ep_len).c_str());
        std::fflush(stdout);
      };
      const auto result = train(cfg, opts);
      std::printf("best_mean_score=%s\n", format_double(result.record.best_mean_score()).c_str());
    } else if (*eval_cmd) {
      LoadedAgent agent = load_agent(checkpoint);
      const auto sections = SectionDataset::from_directory(sections_dir);
      if (sections[0]->height() != agent.height || sections[0]->width() != agent.width) {
        throw std::invalid_argument("sections do not match the checkpoint's grid size");
      }
      const EnvConfig env = agent.config.env_config();
      Rng rng = derive_rng(eval_seed, 3);
      print_eval("eval", evaluate(*agent.policy, sections, env, episodes, rng));
      if (!export_dir.empty()) {
        export_paths(*agent.policy, sections, env, episodes, eval_seed,
                     to_string(agent.config.algorithm), export_dir);
      }
    } else if (*base_cmd) {
      const auto sections = SectionDataset::from_directory(base_sections);
      EnvConfig env;
      env.horizon = base_horizon;
      env.reward_mode = parse_reward_mode(base_reward);
      std::unique_ptr<Policy> policy;
      if (strategy == "zigzag") {
        policy = std::make_unique<ZigzagPolicy>();
      } else {
        policy = std::make_unique<RandomPolicy>(base_seed);
      }
      Rng rng = derive_rng(base_seed, 3);
      print_eval(strategy, evaluate(*policy, sections, env, base_episodes, rng));
      if (!base_export.empty()) {
        export_paths(*policy, sections, env, base_episodes, base_seed, strategy, base_export);
      }
    } else if (*gen_cmd) {
      GeneratorParams params;
      params.grid_size = size;
      params.min_shapes = min_shapes;
      params.max_shapes = max_shapes;
      SectionDataset::generated(count, params, gen_seed).write_directory(gen_out);
      std::printf("wrote %d sections to %s\n", count, gen_out.c_str());
    } else if (*plot_cmd) {
      std::vector<CurveSeries> series;
      const std::set<std::string> on_episodes(episode_axis.begin(), episode_axis.end());
      for (const auto& arg : series_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--series expects label=path");
        const std::string label = arg.substr(0, eq);
        series.push_back({label, load_metrics_csv(arg.substr(eq + 1)), on_episodes.count(label) > 0});
      }
      LearningCurveOptions opts;
      opts.title = title;
      opts.baseline = baseline;
      write_text_file(plot_out, render_learning_curve_svg(series, opts));
    } else if (*keys_cmd) {
      for (const auto& k : config_keys()) {
        std::printf("%-28s = %-14s # %s\n", k.key.c_str(), k.default_value.c_str(), k.help.c_str());
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "amrl: %s\n", e.what());
    return 1;
  }
  return 0;
}
