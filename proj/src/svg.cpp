#include "amrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace amrl {

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string rgb(double t) {
  // Blue to pink.
  constexpr double a[3] = {0, 0, 255};
  constexpr double b[3] = {255, 105, 180};
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(a[0] + (b[0] - a[0]) * t)),
                static_cast<int>(std::lround(a[1] + (b[1] - a[1]) * t)),
                static_cast<int>(std::lround(a[2] + (b[2] - a[2]) * t)));
  return buf;
}

std::string svg_open(int width, int height) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
         std::to_string(width) + " " + std::to_string(height) + "\">\n";
}

}  // namespace

std::string render_toolpath_svg(const Toolpath& toolpath, const Section& section,
                                const ToolpathSvgOptions& options) {
  const int cs = options.cell_size;
  const int m = options.margin;
  const int width = 2 * m + section.width() * cs;
  const int height = 2 * m + section.height() * cs;
  const auto cx = [&](int col) { return m + (col + 0.5) * cs; };
  const auto cy = [&](int row) { return m + (row + 0.5) * cs; };

  std::string out = svg_open(width, height);
  out += "<title>" + xml_escape(toolpath.section_name) + "</title>\n";
  out += "<rect class=\"frame\" x=\"" + std::to_string(m) + "\" y=\"" + std::to_string(m) +
         "\" width=\"" + std::to_string(section.width() * cs) + "\" height=\"" +
         std::to_string(section.height() * cs) + "\" fill=\"white\" stroke=\"#999999\"/>\n";
  out += "<g class=\"pixels\">\n";
  for (int r = 0; r < section.height(); ++r) {
    for (int c = 0; c < section.width(); ++c) {
      if (!section.desired(r, c)) continue;
      out += "<rect class=\"pixel\" x=\"" + std::to_string(m + c * cs) + "\" y=\"" +
             std::to_string(m + r * cs) + "\" width=\"" + std::to_string(cs) + "\" height=\"" +
             std::to_string(cs) + "\" fill=\"#d3d3d3\"/>\n";
    }
  }
  out += "</g>\n<g class=\"path\" stroke-width=\"3\" stroke-linecap=\"round\">\n";
  const std::size_t n = toolpath.moves.size();
  Cell prev = toolpath.start;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& mv = toolpath.moves[k];
    if (!(mv.position == prev)) {
      const double t = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0;
      out += "<line class=\"segment\" x1=\"" + num(cx(prev.col)) + "\" y1=\"" + num(cy(prev.row)) +
             "\" x2=\"" + num(cx(mv.position.col)) + "\" y2=\"" + num(cy(mv.position.row)) +
             "\" stroke=\"" + rgb(t) + "\"" +
             (mv.action.deposit ? "" : " stroke-dasharray=\"4 3\"") + "/>\n";
    }
    prev = mv.position;
  }
  out += "</g>\n";

  const double sx = cx(toolpath.start.col);
  const double sy = cy(toolpath.start.row);
  const double d = cs * 0.35;
  out += "<polygon class=\"start-marker\" points=\"" + num(sx) + "," + num(sy - d) + " " +
         num(sx + d) + "," + num(sy) + " " + num(sx) + "," + num(sy + d) + " " + num(sx - d) +
         "," + num(sy) + "\" fill=\"" + rgb(0.0) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  if (n > 0) {
    const auto& last = toolpath.moves.back();
    const Cell dir = offset(last.action.direction);
    const double ex = cx(last.position.col);
    const double ey = cy(last.position.row);
    const double len = cs * 0.4;
    const double half = cs * 0.25;
    // Tip along the last move direction, base perpendicular to it.
    const double tx = ex + dir.col * len, ty = ey + dir.row * len;
    const double px = -dir.row * half, py = dir.col * half;
    out += "<polygon class=\"end-marker\" points=\"" + num(tx) + "," + num(ty) + " " +
           num(ex + px) + "," + num(ey + py) + " " + num(ex - px) + "," + num(ey - py) +
           "\" fill=\"" + rgb(1.0) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

namespace {

// Round tick step of 1, 2 or 5 times a power of ten.
std::vector<double> nice_ticks(double lo, double hi, int target) {
  const double span = hi - lo;
  const double raw = span / std::max(target, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (const double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  }
  return ticks;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) >= 1e4) {
    std::snprintf(buf, sizeof(buf), "%.0fk", v / 1000.0);
  } else if (v == std::floor(v)) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%g", v);
  }
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string render_learning_curve_svg(std::span<const CurveSeries> series,
                                      const LearningCurveOptions& options) {
  if (series.empty()) throw std::invalid_argument("learning curve needs at least one series");
  for (const auto& s : series) {
    if (s.record.rows.empty()) {
      throw std::invalid_argument("series '" + s.label + "' has no evaluations");
    }
  }
  const bool secondary = std::any_of(series.begin(), series.end(),
                                     [](const CurveSeries& s) { return s.episode_axis; });
  const bool primary = std::any_of(series.begin(), series.end(),
                                   [](const CurveSeries& s) { return !s.episode_axis; });

  double x_max = 0.0, e_max = 0.0;
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (const auto& r : s.record.rows) {
      (s.episode_axis ? e_max : x_max) =
          std::max(s.episode_axis ? e_max : x_max,
                   static_cast<double>(s.episode_axis ? r.episodes : r.env_steps));
      y_lo = std::min(y_lo, r.mean_score);
      y_hi = std::max(y_hi, r.mean_score);
    }
  }
  if (options.baseline) {
    y_lo = std::min(y_lo, *options.baseline);
    y_hi = std::max(y_hi, *options.baseline);
  }
  if (x_max <= 0.0) x_max = 1.0;
  if (e_max <= 0.0) e_max = 1.0;
  if (y_hi - y_lo < 1e-12) {
    y_lo -= 1.0;
    y_hi += 1.0;
  } else {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }

  const double left = 70, right = 20, bottom = 50;
  const double top = 40 + (secondary ? 35 : 0);
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;
  const auto px = [&](double x, double max) { return left + x / max * pw; };
  const auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string out = svg_open(options.width, options.height);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    out += "<text class=\"title\" x=\"" + num(options.width / 2.0) +
           "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
           xml_escape(options.title) + "</text>\n";
  }

  out += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\" font-family=\"sans-serif\" "
         "font-size=\"11\">\n";
  out += "<line class=\"axis y-axis\" x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" +
         num(left) + "\" y2=\"" + num(top + ph) + "\"/>\n";
  out += "<line class=\"axis x-axis\" x1=\"" + num(left) + "\" y1=\"" + num(top + ph) +
         "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(top + ph) + "\"/>\n";
  for (const double t : nice_ticks(y_lo, y_hi, 6)) {
    out += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left) +
           "\" y2=\"" + num(py(t)) + "\"/>\n";
    out += "<text stroke=\"none\" x=\"" + num(left - 7) + "\" y=\"" + num(py(t) + 4) +
           "\" text-anchor=\"end\">" + tick_label(t) + "</text>\n";
  }
  if (primary || !secondary) {
    for (const double t : nice_ticks(0.0, x_max, 6)) {
      out += "<line x1=\"" + num(px(t, x_max)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" +
             num(px(t, x_max)) + "\" y2=\"" + num(top + ph + 4) + "\"/>\n";
      out += "<text stroke=\"none\" x=\"" + num(px(t, x_max)) + "\" y=\"" + num(top + ph + 17) +
             "\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
    }
    out += "<text stroke=\"none\" x=\"" + num(left + pw / 2) + "\" y=\"" +
           num(options.height - 10.0) + "\" text-anchor=\"middle\">environment steps</text>\n";
  }
  if (secondary) {
    out += "<line class=\"axis secondary-axis\" x1=\"" + num(left) + "\" y1=\"" + num(top) +
           "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(top) + "\"/>\n";
    for (const double t : nice_ticks(0.0, e_max, 6)) {
      out += "<line x1=\"" + num(px(t, e_max)) + "\" y1=\"" + num(top - 4) + "\" x2=\"" +
             num(px(t, e_max)) + "\" y2=\"" + num(top) + "\"/>\n";
      out += "<text stroke=\"none\" x=\"" + num(px(t, e_max)) + "\" y=\"" + num(top - 8) +
             "\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
    }
    out += "<text stroke=\"none\" x=\"" + num(left + pw / 2) + "\" y=\"" + num(top - 22) +
           "\" text-anchor=\"middle\">episodes</text>\n";
  }
  out += "<text stroke=\"none\" transform=\"translate(16," + num(top + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">mean score</text>\n";
  out += "</g>\n";

  if (options.baseline) {
    const double y = py(*options.baseline);
    out += "<line class=\"baseline\" x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" +
           num(left + pw) + "\" y2=\"" + num(y) +
           "\" stroke=\"#555555\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const double max = s.episode_axis ? e_max : x_max;
    out += "<polyline class=\"series\" fill=\"none\" stroke=\"" +
           std::string(kPalette[i % std::size(kPalette)]) + "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.record.rows.size(); ++k) {
      const auto& r = s.record.rows[k];
      const double x = static_cast<double>(s.episode_axis ? r.episodes : r.env_steps);
      if (k) out += ' ';
      out += num(px(x, max)) + "," + num(py(r.mean_score));
    }
    out += "\"/>\n";
  }

  out += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  double ly = top + 10;
  const double lx = left + pw - 150;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 20) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + kPalette[i % std::size(kPalette)] +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 26) + "\" y=\"" + num(ly + 4) + "\">" + xml_escape(s.label) +
           (s.episode_axis ? " (episodes)" : "") + "</text>\n";
    ly += 16;
  }
  if (options.baseline) {
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 20) +
           "\" y2=\"" + num(ly) + "\" stroke=\"#555555\" stroke-dasharray=\"6 4\"/>\n";
    out += "<text x=\"" + num(lx + 26) + "\" y=\"" + num(ly + 4) + "\">" +
           xml_escape(options.baseline_label) + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::string render_learning_curve_svg(const std::vector<RunRecord>& records,
                                      const std::vector<std::string>& labels,
                                      const LearningCurveOptions& options) {
  if (records.size() != labels.size()) {
    throw std::invalid_argument("learning curve needs one label per record");
  }
  std::vector<CurveSeries> series;
  for (std::size_t i = 0; i < records.size(); ++i) series.push_back({labels[i], records[i], false});
  return render_learning_curve_svg(series, options);
}

}  // namespace amrl
