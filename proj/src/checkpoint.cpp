#include "odegs/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace odegs {

namespace {

template <class T>
void put(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw CheckpointError("checkpoint truncated: " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::string get_bytes(std::istream& is, std::size_t n, const std::filesystem::path& path) {
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("checkpoint truncated: " + path.string());
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParamStore& store, const std::string& metadata,
                      Payload payload) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  os.write("ODGS", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(store.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  for (const auto& [name, t] : store.entries()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw CheckpointError("parameter name too long");
    put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(payload));
    for (double v : t.data()) {
      if (payload == Payload::kF64)
        put<double>(os, v);
      else
        put<float>(os, static_cast<float>(v));
    }
  }
  if (!os) throw CheckpointError("failed writing checkpoint: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("missing checkpoint: " + path.string());
  if (get_bytes(is, 4, path) != "ODGS") throw CheckpointError("bad checkpoint magic: " + path.string());
  CheckpointData out;
  out.version = get<std::uint32_t>(is, path);
  if (out.version < 1 || out.version > kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(out.version));
  const auto count = get<std::uint32_t>(is, path);
  if (out.version >= 2) out.metadata = get_bytes(is, get<std::uint32_t>(is, path), path);
  for (std::uint32_t p = 0; p < count; ++p) {
    std::string name = get_bytes(is, get<std::uint16_t>(is, path), path);
    const auto rank = get<std::uint8_t>(is, path);
    Shape shape(rank);
    for (auto& e : shape) e = get<std::uint32_t>(is, path);
    const auto flag = get<std::uint8_t>(is, path);
    if (flag > 1) throw CheckpointError("bad payload flag for " + name);
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = flag == 1 ? get<double>(is, path) : static_cast<double>(get<float>(is, path));
    out.params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void load_into(const CheckpointData& ckpt, ParamStore& store) {
  for (auto& [name, t] : store.entries()) {
    const Tensor* src = nullptr;
    for (const auto& [n, v] : ckpt.params)
      if (n == name) src = &v;
    if (src == nullptr) throw CheckpointError("checkpoint lacks parameter " + name);
    if (src->shape() != t.shape())
      throw CheckpointError("checkpoint shape mismatch for " + name + ": " + shape_str(src->shape()) + " vs " +
                            shape_str(t.shape()));
    std::copy(src->data().begin(), src->data().end(), t.mutable_data().begin());
  }
}

}  // namespace odegs
