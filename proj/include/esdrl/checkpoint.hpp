#pragma once

// Self-describing binary container for network parameters:
//
//   "ESDRLCKP"            8 bytes magic
//   u32 format_version
//   u64 header_length, header (JSON text)
//   u32 array_count
//   per array: u32 name_length, name, u64 element_count, float64[count]
//   u32 crc32 of every preceding byte
//
// All integers and floats are little-endian.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esdrl/nnet.hpp"

namespace esdrl::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'E', 'S', 'D', 'R', 'L', 'C', 'K', 'P'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::map<std::string, std::vector<double>> arrays;
};

namespace detail {

template <class T>
void put(std::string& buf, T v) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping here");
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  template <class T>
  T get() {
    if (pos + sizeof(T) > buf.size()) throw CheckpointError("checkpoint: truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    if (pos + n > buf.size()) throw CheckpointError("checkpoint: truncated");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline std::uint32_t crc(const std::string& data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(n)));
}

}  // namespace detail

inline std::string serialize(const Checkpoint& ck) {
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(buf, kCheckpointVersion);
  const std::string header = ck.header.dump();
  detail::put<std::uint64_t>(buf, header.size());
  buf += header;
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.arrays.size()));
  for (const auto& [name, values] : ck.arrays) {
    detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    detail::put<std::uint64_t>(buf, values.size());
    for (double v : values) detail::put<double>(buf, v);
  }
  detail::put<std::uint32_t>(buf, detail::crc(buf, buf.size()));
  return buf;
}

inline Checkpoint deserialize(const std::string& buf) {
  if (buf.size() < sizeof(kCheckpointMagic) + 8 ||
      std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw CheckpointError("checkpoint: bad magic");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (stored_crc != detail::crc(buf, buf.size() - 4)) throw CheckpointError("checkpoint: checksum mismatch");

  detail::Reader r{buf, sizeof(kCheckpointMagic)};
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint ck;
  const auto header_len = r.get<std::uint64_t>();
  ck.header = nlohmann::json::parse(r.bytes(header_len));
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.bytes(name_len);
    const auto n = r.get<std::uint64_t>();
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>();
    ck.arrays.emplace(std::move(name), std::move(values));
  }
  if (r.pos != buf.size() - 4) throw CheckpointError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
  const std::string buf = serialize(ck);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(buf);
}

inline nlohmann::json spec_to_json(const MlpSpec& spec) {
  return {{"layer_sizes", spec.layer_sizes},
          {"output_activation", spec.output_activation == OutputActivation::tanh_scaled ? "tanh_scaled" : "identity"},
          {"output_scale", spec.output_scale},
          {"layer_norm", spec.layer_norm}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  spec.output_activation =
      j.at("output_activation").get<std::string>() == "tanh_scaled" ? OutputActivation::tanh_scaled : OutputActivation::identity;
  spec.output_scale = j.at("output_scale").get<std::vector<double>>();
  spec.layer_norm = j.at("layer_norm").get<bool>();
  return spec;
}

/// Stores `net` under `prefix` (its spec goes into header["networks"][prefix]).
inline void put_network(Checkpoint& ck, const std::string& prefix, const Mlp& net) {
  ck.header["networks"][prefix] = spec_to_json(net.spec());
  net.params().for_each([&](const std::string& name, Eigen::Map<const Vector> v) {
    ck.arrays[prefix + "." + name] = std::vector<double>(v.data(), v.data() + v.size());
  });
}

/// Rebuilds a network stored under `prefix`. If `expected` is given, the
/// stored layer sizes must match it.
inline Mlp get_network(const Checkpoint& ck, const std::string& prefix, const std::vector<int>* expected = nullptr) {
  if (!ck.header.contains("networks") || !ck.header["networks"].contains(prefix))
    throw CheckpointError("checkpoint: no network named '" + prefix + "'");
  const MlpSpec spec = spec_from_json(ck.header["networks"][prefix]);
  if (expected && *expected != spec.layer_sizes) throw CheckpointError("checkpoint: layer sizes of '" + prefix + "' do not match");
  Mlp net(spec);
  net.params().for_each([&](const std::string& name, Eigen::Map<Vector> v) {
    const auto it = ck.arrays.find(prefix + "." + name);
    if (it == ck.arrays.end()) throw CheckpointError("checkpoint: missing array " + prefix + "." + name);
    if (it->second.size() != static_cast<std::size_t>(v.size()))
      throw CheckpointError("checkpoint: shape mismatch for " + prefix + "." + name);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = it->second[static_cast<std::size_t>(i)];
  });
  return net;
}

}  // namespace esdrl::nn
