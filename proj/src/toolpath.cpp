#include "amrl/toolpath.hpp"

#include <charconv>
#include <limits>

#include "amrl/config.hpp"

namespace amrl {

int Toolpath::segment_count() const {
  int n = 0;
  Cell prev = start;
  for (const auto& m : moves) {
    if (!(m.position == prev)) ++n;
    prev = m.position;
  }
  return n;
}

Toolpath record_toolpath(const std::shared_ptr<const Section>& section, Cell start,
                         std::span<const Action> actions) {
  EnvConfig cfg;
  cfg.horizon = std::numeric_limits<int>::max();
  GridEnv env(cfg);
  env.reset_at(section, start);
  Toolpath path;
  path.section_name = section->name();
  path.start = start;
  path.moves.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (env.state().terminal()) {
      throw ToolpathError("section completed after move " + std::to_string(i) + " of " +
                          std::to_string(actions.size()));
    }
    const auto out = env.step(actions[i]);
    path.summary.dense_score += out.reward_dense;
    path.moves.push_back({actions[i], env.state().nozzle});
  }
  path.summary.correct_deposits = env.state().correct_deposits;
  path.summary.wrong_deposits = env.state().wrong_deposits;
  path.summary.idle_moves = env.state().idle_moves;
  return path;
}

std::string export_toolpath(const Toolpath& toolpath) {
  std::string out;
  out.reserve(32 + toolpath.moves.size() * 12);
  out += "SECTION " + toolpath.section_name + "\n";
  out += "START " + std::to_string(toolpath.start.row) + " " +
         std::to_string(toolpath.start.col) + "\n";
  for (const auto& m : toolpath.moves) {
    out += "MOVE ";
    out += direction_letter(m.action.direction);
    out += m.action.deposit ? " ON\n" : " OFF\n";
  }
  out += "END " + format_double(toolpath.summary.dense_score) + "\n";
  return out;
}

namespace {

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    const std::size_t begin = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    if (pos > begin) words.push_back(line.substr(begin, pos - begin));
  }
  return words;
}

template <typename V>
V number(std::string_view text, int line_no) {
  V v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ToolpathError("line " + std::to_string(line_no) + ": bad number '" +
                        std::string(text) + "'");
  }
  return v;
}

Direction parse_direction(std::string_view w, int line_no) {
  if (w == "U") return Direction::Up;
  if (w == "D") return Direction::Down;
  if (w == "L") return Direction::Left;
  if (w == "R") return Direction::Right;
  throw ToolpathError("line " + std::to_string(line_no) + ": bad direction '" + std::string(w) +
                      "'");
}

}  // namespace

Toolpath parse_toolpath(std::string_view text, const std::shared_ptr<const Section>& section) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 3) throw ToolpathError("toolpath needs SECTION, START and END lines");

  const auto header = split_words(lines[0]);
  if (header.size() != 2 || header[0] != "SECTION") {
    throw ToolpathError("line 1: expected 'SECTION <name>'");
  }
  const auto start_words = split_words(lines[1]);
  if (start_words.size() != 3 || start_words[0] != "START") {
    throw ToolpathError("line 2: expected 'START <row> <col>'");
  }
  const Cell start{number<int>(start_words[1], 2), number<int>(start_words[2], 2)};
  if (!section->in_bounds(start.row, start.col)) throw ToolpathError("line 2: start off grid");

  std::vector<Action> actions;
  for (std::size_t i = 2; i + 1 < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const auto w = split_words(lines[i]);
    if (w.size() != 3 || w[0] != "MOVE" || (w[2] != "ON" && w[2] != "OFF")) {
      throw ToolpathError("line " + std::to_string(line_no) + ": expected 'MOVE <U|D|L|R> <ON|OFF>'");
    }
    actions.push_back(Action{parse_direction(w[1], line_no), w[2] == "ON"});
  }
  const auto end_words = split_words(lines.back());
  if (end_words.size() != 2 || end_words[0] != "END") {
    throw ToolpathError("last line: expected 'END <score>'");
  }
  const double score = number<double>(end_words[1], static_cast<int>(lines.size()));

  Toolpath path = record_toolpath(section, start, actions);
  path.section_name = std::string(header[1]);
  if (path.summary.dense_score != score) {
    throw ToolpathError("END score " + std::string(end_words[1]) + " disagrees with replay (" +
                        format_double(path.summary.dense_score) + ")");
  }
  return path;
}

}  // namespace amrl
