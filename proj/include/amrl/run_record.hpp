#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace amrl {

// One evaluation event of a training run.
struct EvalRow {
  long env_steps = 0;
  long episodes = 0;
  double mean_score = 0.0;
  double score_std = 0.0;
  double mean_ep_len = 0.0;
  double wall_clock_s = 0.0;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct RunRecord {
  std::vector<EvalRow> rows;

  // Highest mean score over all rows; throws on an empty record.
  double best_mean_score() const;
  const EvalRow& best_row() const;
};

inline constexpr std::string_view kMetricsHeader =
    "env_steps,episodes,mean_score,score_std,mean_ep_len,wall_clock_s";

std::string format_metrics_row(const EvalRow& row);
std::string format_metrics_csv(const RunRecord& record);
RunRecord parse_metrics_csv(std::string_view text);
RunRecord load_metrics_csv(const std::filesystem::path& path);

}  // namespace amrl
