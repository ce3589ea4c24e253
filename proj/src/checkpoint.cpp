#include "amrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace amrl::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'M', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void write_pod(std::string& out, V value) {
  char buf[sizeof(V)];
  std::memcpy(buf, &value, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename V>
  V pod() {
    V value;
    std::memcpy(&value, take(sizeof(V)), sizeof(V));
    return value;
  }
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
void Checkpoint::put(const std::string& prefix, const NetworkParams<T>& params) {
  for (const auto& t : tensors(params)) {
    Entry e;
    e.name = prefix + t.name;
    e.shape.assign(t.shape.begin(), t.shape.end());
    e.element_bytes = sizeof(T);
    e.raw.resize(t.size * sizeof(T));
    std::memcpy(e.raw.data(), t.data, e.raw.size());
    entries_.push_back(std::move(e));
  }
}

template <typename T>
void Checkpoint::get(const std::string& prefix, NetworkParams<T>& params) const {
  for (auto& t : tensors(params)) {
    const Entry& e = find(prefix + t.name);
    if (e.element_bytes != sizeof(T)) {
      throw std::runtime_error("checkpoint tensor " + e.name + " stored with " +
                               std::to_string(e.element_bytes) + "-byte values");
    }
    if (!std::equal(e.shape.begin(), e.shape.end(), t.shape.begin(), t.shape.end())) {
      throw std::runtime_error("checkpoint tensor " + e.name + " has a different shape");
    }
    std::memcpy(t.data, e.raw.data(), e.raw.size());
  }
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  Entry e;
  e.name = name;
  e.element_bytes = 8;
  e.raw.resize(8);
  std::memcpy(e.raw.data(), &value, 8);
  entries_.push_back(std::move(e));
}

double Checkpoint::get_scalar(const std::string& name) const {
  const Entry& e = find(name);
  if (e.element_bytes != 8 || e.raw.size() != 8) {
    throw std::runtime_error("checkpoint entry " + name + " is not a scalar");
  }
  double v;
  std::memcpy(&v, e.raw.data(), 8);
  return v;
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const Checkpoint::Entry& Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::runtime_error("checkpoint has no tensor named " + name);
}

std::string Checkpoint::to_bytes() const {
  std::string out(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    write_pod<std::uint8_t>(out, e.element_bytes);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) write_pod<std::int64_t>(out, d);
    out.append(e.raw.data(), e.raw.size());
  }
  return out;
}

Checkpoint Checkpoint::from_bytes(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not an amrl checkpoint (bad magic)");
  }
  if (r.pod<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto count = r.pod<std::uint32_t>();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto len = r.pod<std::uint32_t>();
    e.name.assign(r.take(len), len);
    e.element_bytes = r.pod<std::uint8_t>();
    if (e.element_bytes != 4 && e.element_bytes != 8) {
      throw std::runtime_error("checkpoint tensor " + e.name + " has bad element size");
    }
    const auto ndim = r.pod<std::uint32_t>();
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(r.pod<std::int64_t>());
      if (e.shape.back() < 0) throw std::runtime_error("negative dimension in checkpoint");
      n *= e.shape.back();
    }
    const auto size = static_cast<std::size_t>(n) * e.element_bytes;
    const char* raw = r.take(size);
    e.raw.assign(raw, raw + size);
    ckpt.entries_.push_back(std::move(e));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in checkpoint");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const auto bytes = to_bytes();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_bytes(buffer.str());
}

template void Checkpoint::put(const std::string&, const NetworkParams<float>&);
template void Checkpoint::put(const std::string&, const NetworkParams<double>&);
template void Checkpoint::get(const std::string&, NetworkParams<float>&) const;
template void Checkpoint::get(const std::string&, NetworkParams<double>&) const;

}  // namespace amrl::nn
