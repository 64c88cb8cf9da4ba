#pragma once

// Checkpoint files.
//
// Layout: "VEBM", u32 version, u64 header length, UTF-8 JSON header holding
// the run config, the data mean and the trainer's counters and real vectors,
// then u32 tensor count and per tensor: u32 name length, name, u32 rank,
// u64 extents, little-endian f32 values.

#include <filesystem>
#include <string>
#include <string_view>

#include "vebm/config.hpp"
#include "vebm/training.hpp"

namespace vebm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  double data_mean = 0.0;  // mean subtracted during preprocessing
  TrainerSnapshot state;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// FormatError on bad magic, version, truncation or a malformed header.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vebm
