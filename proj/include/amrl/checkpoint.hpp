#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "amrl/network.hpp"

namespace amrl::nn {

// Self-describing binary container of named row-major tensors:
//   "AMRLCKPT" u32 version u32 count
//   per tensor: u32 name_len, name, u8 element_bytes (4|8), u32 ndim,
//               i64 dims[ndim], raw little-endian values
// Values are stored at the precision they were put with.
class Checkpoint {
 public:
  struct Entry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::uint8_t element_bytes = 4;
    std::vector<char> raw;
  };

  template <typename T>
  void put(const std::string& prefix, const NetworkParams<T>& params);

  // Fills params (already shaped) from entries under prefix; shapes and
  // element sizes must match exactly.
  template <typename T>
  void get(const std::string& prefix, NetworkParams<T>& params) const;

  void put_scalar(const std::string& name, double value);
  double get_scalar(const std::string& name) const;

  bool contains(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  std::string to_bytes() const;
  static Checkpoint from_bytes(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Entry& a, const Entry& b) {
    return a.name == b.name && a.shape == b.shape && a.element_bytes == b.element_bytes &&
           a.raw == b.raw;
  }

 private:
  const Entry& find(const std::string& name) const;
  std::vector<Entry> entries_;
};

}  // namespace amrl::nn
