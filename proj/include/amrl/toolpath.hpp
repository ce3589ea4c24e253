#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "amrl/grid_env.hpp"

namespace amrl {

struct ToolpathMove {
  Action action;
  Cell position;  // nozzle after the move; unchanged for blocked moves

  friend bool operator==(const ToolpathMove&, const ToolpathMove&) = default;
};

struct ToolpathSummary {
  int correct_deposits = 0;
  int wrong_deposits = 0;
  int idle_moves = 0;
  double dense_score = 0.0;

  friend bool operator==(const ToolpathSummary&, const ToolpathSummary&) = default;
};

struct Toolpath {
  std::string section_name;
  Cell start;
  std::vector<ToolpathMove> moves;
  ToolpathSummary summary;

  // Moves that changed the nozzle position.
  int segment_count() const;

  friend bool operator==(const Toolpath&, const Toolpath&) = default;
};

class ToolpathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replays the actions from start through a dense-reward environment with no
// horizon cut. Throws ToolpathError if the section completes before the last
// action.
Toolpath record_toolpath(const std::shared_ptr<const Section>& section, Cell start,
                         std::span<const Action> actions);

// SECTION/START header, one MOVE line per action, END <dense score>.
std::string export_toolpath(const Toolpath& toolpath);

// Inverse of export_toolpath. Positions and summary are rebuilt by replay on
// section, and the END score must agree with the replay.
Toolpath parse_toolpath(std::string_view text, const std::shared_ptr<const Section>& section);

}  // namespace amrl
