#include "amrl/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace amrl {

Section::Section(int width, int height, std::vector<std::uint8_t> mask,
                 std::string name)
    : width_(width), height_(height), mask_(std::move(mask)),
      name_(std::move(name)) {
  if (width_ < 2 || height_ < 2) {
    throw std::invalid_argument("section dimensions must be at least 2x2, got " +
                                std::to_string(width_) + "x" +
                                std::to_string(height_));
  }
  if (mask_.size() != static_cast<std::size_t>(width_) * height_) {
    throw std::invalid_argument("section mask has " +
                                std::to_string(mask_.size()) +
                                " entries, expected " +
                                std::to_string(width_ * height_));
  }
  for (auto& m : mask_) m = m ? 1 : 0;
  desired_count_ = static_cast<int>(std::count(mask_.begin(), mask_.end(), 1));
}

SectionParseError::SectionParseError(SectionParseErrorKind kind, int line,
                                     const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what),
      kind_(kind),
      line_(line) {}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

bool parse_int(std::string_view token, int& out) {
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Section parse_section(std::string_view text, std::string name) {
  using Kind = SectionParseErrorKind;
  const auto lines = split_lines(text);
  if (lines.empty()) throw SectionParseError(Kind::BadHeader, 1, "empty input");

  std::vector<std::string_view> tokens;
  {
    std::string_view header = lines[0];
    std::size_t i = 0;
    while (i < header.size()) {
      while (i < header.size() && is_space(header[i])) ++i;
      std::size_t j = i;
      while (j < header.size() && !is_space(header[j])) ++j;
      if (j > i) tokens.push_back(header.substr(i, j - i));
      i = j;
    }
  }
  int width = 0;
  int height = 0;
  if (tokens.size() != 2 || !parse_int(tokens[0], width) ||
      !parse_int(tokens[1], height)) {
    throw SectionParseError(Kind::BadHeader, 1,
                            "expected '<width> <height>' header");
  }
  if (width < 2 || height < 2) {
    throw SectionParseError(Kind::BadHeader, 1,
                            "dimensions must be at least 2x2");
  }

  std::vector<std::uint8_t> mask;
  mask.reserve(static_cast<std::size_t>(width) * height);
  int rows = 0;
  std::size_t li = 1;
  for (; li < lines.size() && rows < height; ++li) {
    const int line_no = static_cast<int>(li) + 1;
    int count = 0;
    for (char c : lines[li]) {
      if (is_space(c)) continue;
      if (c != '0' && c != '1') {
        throw SectionParseError(Kind::InvalidCharacter, line_no,
                                std::string("invalid character '") + c + "'");
      }
      if (count < width) mask.push_back(c == '1' ? 1 : 0);
      ++count;
    }
    if (count != width) {
      throw SectionParseError(Kind::RowLengthMismatch, line_no,
                              "row has " + std::to_string(count) +
                                  " pixels, expected " + std::to_string(width));
    }
    ++rows;
  }
  if (rows < height) {
    throw SectionParseError(Kind::RowCountMismatch,
                            static_cast<int>(lines.size()) + 1,
                            "expected " + std::to_string(height) +
                                " rows, found " + std::to_string(rows));
  }
  for (; li < lines.size(); ++li) {
    for (char c : lines[li]) {
      if (!is_space(c)) {
        throw SectionParseError(Kind::RowCountMismatch,
                                static_cast<int>(li) + 1,
                                "unexpected data after " +
                                    std::to_string(height) + " rows");
      }
    }
  }
  if (std::find(mask.begin(), mask.end(), 1) == mask.end()) {
    throw SectionParseError(Kind::NoDesiredPixels, 1,
                            "section has no desired pixels");
  }
  return Section(width, height, std::move(mask), std::move(name));
}

std::string serialize_section(const Section& section) {
  std::string out = std::to_string(section.width()) + " " +
                    std::to_string(section.height()) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(section.width() + 1) *
                               section.height());
  for (int r = 0; r < section.height(); ++r) {
    for (int c = 0; c < section.width(); ++c) {
      out.push_back(section.desired(r, c) ? '1' : '0');
    }
    out.push_back('\n');
  }
  return out;
}

Section load_section(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open section file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_section(buffer.str(), path.stem().string());
  } catch (const SectionParseError& e) {
    throw SectionParseError(e.kind(), e.line(),
                            path.string() + ": " + e.what());
  }
}

void save_section(const Section& section, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write section file " + path.string());
  out << serialize_section(section);
}

Section generate_section(Rng& rng, const GeneratorParams& params,
                         std::string name) {
  const int n = params.grid_size;
  if (n < 4) throw std::invalid_argument("generator grid_size must be >= 4");
  if (!params.rectangles && !params.ellipses) {
    throw std::invalid_argument("generator needs at least one shape kind");
  }
  if (params.min_shapes < 1 || params.max_shapes < params.min_shapes) {
    throw std::invalid_argument("invalid generator shape count range");
  }
  const auto extent = [&](double fraction) {
    return std::clamp(static_cast<int>(std::ceil(fraction * n)), 1, n);
  };
  const int lo = extent(params.min_extent);
  const int hi = std::max(lo, extent(params.max_extent));

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
  while (true) {
    const int shapes = uniform_int(rng, params.min_shapes, params.max_shapes);
    for (int s = 0; s < shapes; ++s) {
      bool rectangle = params.rectangles;
      if (params.rectangles && params.ellipses) rectangle = uniform_int(rng, 0, 1) == 0;
      const int h = uniform_int(rng, lo, hi);
      const int w = uniform_int(rng, lo, hi);
      if (rectangle) {
        const int top = uniform_int(rng, 0, n - h);
        const int left = uniform_int(rng, 0, n - w);
        for (int r = top; r < top + h; ++r) {
          for (int c = left; c < left + w; ++c) mask[r * n + c] = 1;
        }
      } else {
        // Ellipse with the drawn extents as diameters; centre anywhere, clipped.
        const double cy = uniform_int(rng, 0, n - 1) + 0.5;
        const double cx = uniform_int(rng, 0, n - 1) + 0.5;
        const double ry = h / 2.0;
        const double rx = w / 2.0;
        for (int r = 0; r < n; ++r) {
          for (int c = 0; c < n; ++c) {
            const double dy = (r + 0.5 - cy) / ry;
            const double dx = (c + 0.5 - cx) / rx;
            if (dx * dx + dy * dy <= 1.0) mask[r * n + c] = 1;
          }
        }
      }
    }
    if (std::find(mask.begin(), mask.end(), 1) != mask.end()) break;
  }
  return Section(n, n, std::move(mask), std::move(name));
}

SectionDataset::SectionDataset(std::vector<Section> sections,
                               DatasetSource source)
    : source_(source) {
  sections_.reserve(sections.size());
  for (auto& s : sections) {
    sections_.push_back(std::make_shared<const Section>(std::move(s)));
  }
  if (sections_.empty()) throw std::invalid_argument("dataset is empty");
  std::set<std::string> names;
  for (const auto& s : sections_) {
    if (!names.insert(s->name()).second) {
      throw std::invalid_argument("duplicate section name '" + s->name() + "'");
    }
  }
}

SectionDataset::SectionDataset(
    std::vector<std::shared_ptr<const Section>> sections, DatasetSource source)
    : sections_(std::move(sections)), source_(source) {}

SectionDataset SectionDataset::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("section directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".sect") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  if (files.empty()) {
    throw std::runtime_error("no .sect files in " + dir.string());
  }
  std::vector<Section> sections;
  sections.reserve(files.size());
  for (const auto& f : files) sections.push_back(load_section(f));
  return SectionDataset(std::move(sections), DatasetSource::Files);
}

SectionDataset SectionDataset::generated(int count, const GeneratorParams& params,
                                         std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
  Rng rng(seed);
  std::vector<Section> sections;
  sections.reserve(count);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "section_%04d", i);
    sections.push_back(generate_section(rng, params, name));
  }
  return SectionDataset(std::move(sections), DatasetSource::Generated);
}

const std::shared_ptr<const Section>& SectionDataset::sample(Rng& rng) const {
  return sections_[uniform_int(rng, 0, static_cast<int>(sections_.size()) - 1)];
}

std::pair<SectionDataset, SectionDataset> SectionDataset::split_holdout(
    double fraction) const {
  if (fraction <= 0.0 || sections_.size() < 2) {
    throw std::invalid_argument("holdout split needs fraction > 0 and >= 2 sections");
  }
  const auto n = sections_.size();
  auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  held = std::clamp<std::size_t>(held, 1, n - 1);
  std::vector<std::shared_ptr<const Section>> train(sections_.begin(),
                                                    sections_.end() - held);
  std::vector<std::shared_ptr<const Section>> holdout(sections_.end() - held,
                                                      sections_.end());
  return {SectionDataset(std::move(train), source_),
          SectionDataset(std::move(holdout), source_)};
}

void SectionDataset::write_directory(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& s : sections_) {
    save_section(*s, dir / (s->name() + ".sect"));
  }
}

}  // namespace amrl
