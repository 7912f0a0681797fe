#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "sean/diff/nn.hpp"

namespace sean::diff {

// Binary layout, all integers little-endian:
//   "SEANCKPT" u16 version
//   repeated until EOF:
//     u64 name_len, name bytes (UTF-8), u64 rank, rank x u64 dims,
//     numel x f64 values (row-major)
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'A', 'N',
                                             'C', 'K', 'P', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& records);
auto read_checkpoint(std::istream& in) -> std::vector<NamedTensor>;

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& records);
auto load_checkpoint(const std::filesystem::path& path)
    -> std::vector<NamedTensor>;

// Copies values into the matching tensors of `dst` by name. Every name in
// `dst` must be present in `src` with the same shape.
void assign_checkpoint(const std::vector<NamedTensor>& src,
                       const std::vector<NamedTensor>& dst);

}  // namespace sean::diff
