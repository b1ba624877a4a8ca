#pragma once

// Parameter checkpoint file:
//   magic "SDCK", version byte 1,
//   u32 metadata length, metadata bytes (UTF-8 text),
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u64 extent per dim,
//     numel little-endian IEEE-754 float64 values.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seqdn/adam.hpp"

namespace seqdn {

struct StoredTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string metadata;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(std::string_view name) const;
};

inline constexpr char kCheckpointMagic[4] = {'S', 'D', 'C', 'K'};
inline constexpr unsigned char kCheckpointVersion = 1;

std::string encode_checkpoint(std::string_view metadata, std::span<const NamedParameter> params);
Checkpoint decode_checkpoint(std::string_view bytes);

// Written to a temporary sibling and renamed into place.
void write_checkpoint(const std::filesystem::path& path, std::string_view metadata,
                      std::span<const NamedParameter> params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies stored values into params by name; every param must be present
// with an identical shape.
void restore_parameters(const Checkpoint& checkpoint, std::span<NamedParameter> params);

}  // namespace seqdn
