#ifndef USWIM_CHECKPOINT_HPP
#define USWIM_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uswim/network.hpp"

namespace uswim {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  double accuracy = 0.0;
};

struct Checkpoint {
  Network<double> net;
  TrainingMetadata meta;
};

/// Binary layout, little-endian:
///   "USWM" | u32 version | u64 payload bytes | payload | u64 FNV-1a(payload)
/// The payload holds the architecture, every layer's weights and biases as
/// row-major float32, each layer's quantization range, M and the metadata.
/// Weights are stored as float32, so values that are exactly representable
/// in float32 round-trip bit-exactly.
std::vector<std::uint8_t> encode_checkpoint(const Network<double>& net, const TrainingMetadata& meta);

/// Throws FormatError: BadMagic, UnsupportedVersion, Truncated,
/// ChecksumMismatch or Malformed.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network<double>& net, const TrainingMetadata& meta, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter and quantization range to float32 precision.
void round_to_float(Network<double>& net);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace uswim

#endif  // USWIM_CHECKPOINT_HPP
