#include "amrl/run_record.hpp"

#include <charconv>
#include <stdexcept>

#include "amrl/config.hpp"

namespace amrl {

const EvalRow& RunRecord::best_row() const {
  if (rows.empty()) throw std::logic_error("run record has no evaluations");
  const EvalRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.mean_score > best->mean_score) best = &r;
  }
  return *best;
}

double RunRecord::best_mean_score() const { return best_row().mean_score; }

std::string format_metrics_row(const EvalRow& row) {
  return std::to_string(row.env_steps) + "," + std::to_string(row.episodes) + "," +
         format_double(row.mean_score) + "," + format_double(row.score_std) + "," +
         format_double(row.mean_ep_len) + "," + format_double(row.wall_clock_s);
}

std::string format_metrics_csv(const RunRecord& record) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : record.rows) out += format_metrics_row(r) + "\n";
  return out;
}

namespace {
template <typename V>
V field(std::string_view s, int line) {
  V v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("metrics line " + std::to_string(line) + ": bad value '" +
                             std::string(s) + "'");
  }
  return v;
}
}  // namespace

RunRecord parse_metrics_csv(std::string_view text) {
  RunRecord record;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kMetricsHeader) throw std::runtime_error("unexpected metrics header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t p = 0;
    while (true) {
      const std::size_t c = line.find(',', p);
      cells.push_back(line.substr(p, c == std::string_view::npos ? line.npos : c - p));
      if (c == std::string_view::npos) break;
      p = c + 1;
    }
    if (cells.size() != 6) {
      throw std::runtime_error("metrics line " + std::to_string(line_no) + ": expected 6 columns");
    }
    record.rows.push_back(EvalRow{field<long>(cells[0], line_no), field<long>(cells[1], line_no),
                                  field<double>(cells[2], line_no), field<double>(cells[3], line_no),
                                  field<double>(cells[4], line_no),
                                  field<double>(cells[5], line_no)});
  }
  if (line_no == 0) throw std::runtime_error("empty metrics file");
  return record;
}

RunRecord load_metrics_csv(const std::filesystem::path& path) {
  return parse_metrics_csv(read_text_file(path));
}

}  // namespace amrl
