#pragma once

#include "surprise_rl/common.hpp"
#include "surprise_rl/nn_core.hpp"

#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace srl {

/// Ordered list of named tensors; the checkpoint wire format.
using NamedTensors = std::vector<std::pair<std::string, Mat>>;

namespace detail {

constexpr char kCkptMagic[8] = {'S', 'R', 'L', 'T', '0', '0', '0', '1'};

template <typename T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("checkpoint: truncated data");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

/// Binary encoding: magic, tensor count, then per tensor a name, a shape
/// header and raw row-major doubles. Round-trips bit-exactly.
inline std::string serialize_tensors(const NamedTensors& tensors) {
  std::string out;
  out.append(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  detail::put_raw<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    detail::put_raw<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    detail::put_raw<uint64_t>(out, static_cast<uint64_t>(m.rows()));
    detail::put_raw<uint64_t>(out, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_raw<double>(out, m(r, c));
  }
  return out;
}

inline NamedTensors parse_tensors(const std::string& data) {
  size_t pos = 0;
  if (data.size() < sizeof(detail::kCkptMagic) ||
      std::memcmp(data.data(), detail::kCkptMagic, sizeof(detail::kCkptMagic)) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  pos = sizeof(detail::kCkptMagic);
  const uint32_t count = detail::get_raw<uint32_t>(data, pos);
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = detail::get_raw<uint32_t>(data, pos);
    if (pos + name_len > data.size()) throw IoError("checkpoint: truncated name");
    std::string name(data.data() + pos, name_len);
    pos += name_len;
    const auto rows = static_cast<Eigen::Index>(detail::get_raw<uint64_t>(data, pos));
    const auto cols = static_cast<Eigen::Index>(detail::get_raw<uint64_t>(data, pos));
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = detail::get_raw<double>(data, pos);
    out.emplace_back(std::move(name), std::move(m));
  }
  if (pos != data.size()) throw IoError("checkpoint: trailing bytes");
  return out;
}

inline void save_tensors(const std::string& path, const NamedTensors& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open for write: " + path);
  const std::string data = serialize_tensors(tensors);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("checkpoint: write failed: " + path);
}

inline NamedTensors load_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_tensors(data);
}

/// Appends the layers of an MLP as "<prefix>.layer<i>.W" / ".b" entries.
inline void pack_mlp(NamedTensors& out, const std::string& prefix, const MlpParams& p) {
  for (size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = prefix + ".layer" + std::to_string(i);
    out.emplace_back(base + ".W", p.layers[i].W);
    out.emplace_back(base + ".b", Mat(p.layers[i].b));
  }
}

/// Rebuilds an MLP from packed tensors. Layer count is inferred from the
/// names; activations are supplied by the caller (they are architecture,
/// not weights).
inline MlpParams unpack_mlp(const NamedTensors& tensors, const std::string& prefix,
                            Activation hidden, Activation head) {
  MlpParams p;
  for (size_t i = 0;; ++i) {
    const std::string base = prefix + ".layer" + std::to_string(i);
    const Mat* W = nullptr;
    const Mat* b = nullptr;
    for (const auto& [name, m] : tensors) {
      if (name == base + ".W") W = &m;
      if (name == base + ".b") b = &m;
    }
    if (!W && !b) break;
    if (!W || !b) throw IoError("checkpoint: incomplete layer " + base);
    Layer l;
    l.W = *W;
    l.b = b->col(0);
    l.act = hidden;
    p.layers.push_back(std::move(l));
  }
  if (p.layers.empty()) throw IoError("checkpoint: no layers found for prefix " + prefix);
  p.layers.back().act = head;
  return p;
}

}  // namespace srl
