#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amrl/geometry.hpp"
#include "amrl/run_record.hpp"
#include "amrl/toolpath.hpp"

namespace amrl {

struct ToolpathSvgOptions {
  int cell_size = 24;
  int margin = 12;
};

// Grey desired pixels, one line segment per position-changing move coloured
// from blue (first move) to pink (last move), dashed when deposition is off,
// a diamond at the start and an arrow head at the final position.
std::string render_toolpath_svg(const Toolpath& toolpath, const Section& section,
                                const ToolpathSvgOptions& options = {});

struct CurveSeries {
  std::string label;
  RunRecord record;
  // Plot against the episode count on the secondary (top) axis instead of
  // env steps; used for PPO curves drawn on a different scale.
  bool episode_axis = false;
};

struct LearningCurveOptions {
  std::string title;
  std::optional<double> baseline;
  std::string baseline_label = "zig-zag";
  int width = 720;
  int height = 440;
};

std::string render_learning_curve_svg(std::span<const CurveSeries> series,
                                      const LearningCurveOptions& options = {});
std::string render_learning_curve_svg(const std::vector<RunRecord>& records,
                                      const std::vector<std::string>& labels,
                                      const LearningCurveOptions& options = {});

std::string xml_escape(std::string_view text);

}  // namespace amrl
