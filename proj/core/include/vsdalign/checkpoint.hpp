#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vsdalign/trainer.hpp"

namespace vsdalign {

// Layout (little-endian throughout):
//   "VSDCKPT\0" | u32 version | u64 config hash | str config json | u32 epoch
//   | u32 d | f64[4d+2] params | u64 adam step | f64[4d+2] m | f64[4d+2] v
//   | u32 k | u32 bank dim | f64[k*dim] centroids | f64 inertia | u64 bank seed
//   | u64 bank iterations | u8 normalized | str rng state | u64 FNV-1a of all preceding bytes
// where str is u32 length + bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Throws CorruptCheckpoint on bad magic, version, checksum or a config
/// hash that does not match the embedded config.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vsdalign
