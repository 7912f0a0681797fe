#include "sean/diff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace sean::diff {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <class T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

// Returns false on clean EOF before the first byte.
template <class T>
auto get(std::istream& in, T& value, bool eof_ok = false) -> bool {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (in.gcount() == 0 && eof_ok && in.eof()) {
    return false;
  }
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw CheckpointError("checkpoint: truncated record");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

}  // namespace

void write_checkpoint(std::ostream& out,
                      const std::vector<NamedTensor>& records) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint16_t>(out, kCheckpointVersion);
  for (const auto& [name, tensor] : records) {
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, tensor.rank());
    for (auto d : tensor.shape()) put<std::uint64_t>(out, d);
    for (double v : tensor.data()) put<double>(out, v);
  }
  if (!out) {
    throw CheckpointError("checkpoint: write failed");
  }
}

auto read_checkpoint(std::istream& in) -> std::vector<NamedTensor> {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("checkpoint: bad magic");
  }
  std::uint16_t version = 0;
  get(in, version);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " +
                          std::to_string(version));
  }
  std::vector<NamedTensor> records;
  std::uint64_t name_len = 0;
  while (get(in, name_len, /*eof_ok=*/true)) {
    if (name_len > (1u << 20)) {
      throw CheckpointError("checkpoint: implausible name length");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw CheckpointError("checkpoint: truncated name");
    }
    std::uint64_t rank = 0;
    get(in, rank);
    if (rank > 8) {
      throw CheckpointError("checkpoint: implausible rank for " + name);
    }
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      get(in, v);
      d = static_cast<std::size_t>(v);
    }
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) get(in, v);
    records.push_back({std::move(name), Tensor::from(shape, std::move(values))});
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("checkpoint: cannot open " + path.string());
  }
  write_checkpoint(out, records);
}

auto load_checkpoint(const std::filesystem::path& path)
    -> std::vector<NamedTensor> {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("checkpoint: cannot open " + path.string());
  }
  return read_checkpoint(in);
}

void assign_checkpoint(const std::vector<NamedTensor>& src,
                       const std::vector<NamedTensor>& dst) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& r : src) by_name[r.name] = &r.tensor;
  for (const auto& [name, tensor] : dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointError("checkpoint: missing record " + name);
    }
    if (it->second->shape() != tensor.shape()) {
      throw CheckpointError("checkpoint: shape mismatch for " + name + ": " +
                            shape_str(it->second->shape()) + " vs " +
                            shape_str(tensor.shape()));
    }
    auto out = Tensor(tensor).mutable_data();
    const auto in = it->second->data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

}  // namespace sean::diff
