#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "amrl/rng.hpp"

namespace amrl {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Binary raster of one part slice. mask is row-major, row 0 is the top of the
// grid, and a nonzero entry marks a pixel that must receive material.
class Section {
 public:
  Section(int width, int height, std::vector<std::uint8_t> mask,
          std::string name = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  bool desired(int row, int col) const {
    return mask_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  int desired_count() const { return desired_count_; }

  friend bool operator==(const Section& a, const Section& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.mask_ == b.mask_ && a.name_ == b.name_;
  }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> mask_;
  std::string name_;
  int desired_count_ = 0;
};

enum class SectionParseErrorKind {
  BadHeader,
  InvalidCharacter,
  RowLengthMismatch,
  RowCountMismatch,
  NoDesiredPixels,
};

class SectionParseError : public std::runtime_error {
 public:
  SectionParseError(SectionParseErrorKind kind, int line,
                    const std::string& what);
  SectionParseErrorKind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  SectionParseErrorKind kind_;
  int line_;
};

// SECT text: "<width> <height>" then <height> rows of '0'/'1'. Whitespace
// inside a row is ignored; blank lines after the last row are allowed.
Section parse_section(std::string_view text, std::string name = {});

// Canonical form: '1'/'0' rows, LF newlines, trailing newline.
std::string serialize_section(const Section& section);

Section load_section(const std::filesystem::path& path);
void save_section(const Section& section, const std::filesystem::path& path);

struct GeneratorParams {
  int grid_size = 32;
  int min_shapes = 1;
  int max_shapes = 3;
  bool rectangles = true;
  bool ellipses = true;
  // Shape extent as a fraction of grid_size.
  double min_extent = 0.25;
  double max_extent = 0.75;
};

// Union of random axis-aligned rectangles and ellipses; never empty.
Section generate_section(Rng& rng, const GeneratorParams& params,
                         std::string name = {});

enum class DatasetSource { Files, Generated };

class SectionDataset {
 public:
  SectionDataset(std::vector<Section> sections, DatasetSource source);

  // Every *.sect file in dir, sorted by filename; names are file stems.
  static SectionDataset from_directory(const std::filesystem::path& dir);
  static SectionDataset generated(int count, const GeneratorParams& params,
                                  std::uint64_t seed);

  std::size_t size() const { return sections_.size(); }
  DatasetSource source() const { return source_; }
  const std::shared_ptr<const Section>& operator[](std::size_t i) const {
    return sections_[i];
  }
  const std::vector<std::shared_ptr<const Section>>& sections() const {
    return sections_;
  }

  // Uniform choice.
  const std::shared_ptr<const Section>& sample(Rng& rng) const;

  // Moves the last floor(fraction * size) sections into a second dataset.
  // Both halves stay nonempty; returns {train, holdout}.
  std::pair<SectionDataset, SectionDataset> split_holdout(double fraction) const;

  void write_directory(const std::filesystem::path& dir) const;

 private:
  SectionDataset(std::vector<std::shared_ptr<const Section>> sections,
                 DatasetSource source);

  std::vector<std::shared_ptr<const Section>> sections_;
  DatasetSource source_;
};

}  // namespace amrl
