#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "icvae/tensor.hpp"

namespace icvae {

/// Checkpoint file layout (all integers little-endian):
///
///   magic        8 bytes  "ICVAE1\0\0"
///   version      u32      kCheckpointVersion
///   entry count  u32
///   entries:     name length u32, name bytes, rank u32, dims u32 x rank,
///                width u8 (4 = f32, 8 = f64), payload (numel x width bytes)
///   crc32        u32      over every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
  /// Bytes per stored value: 8 (f64, exact) or 4 (f32, rounded on save).
  std::uint8_t width = 8;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries);

/// Throws VersionError, TruncatedError, ChecksumError or FormatError.
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace icvae
