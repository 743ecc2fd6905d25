#ifndef USWIM_DATAIO_HPP
#define USWIM_DATAIO_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uswim/backprop.hpp"

namespace uswim {

/// Labelled examples plus the image shape of one column.
struct Dataset {
  Batch<double> data;
  Shape3 shape;
  std::string split;  // "train", "test" or "calibration"

  Index size() const { return data.size(); }
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Parses an IDX image/label pair held in memory. Pixels are scaled by 1/255.
/// Throws FormatError (BadMagic, Truncated or CountMismatch).
Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

/// Reads and parses an IDX image/label file pair. Missing files raise IoError.
Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Serializes a dataset back to IDX bytes (pixels rounded to 0..255).
std::vector<std::uint8_t> encode_idx_images(const Dataset& d);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& d);

/// Two interleaved half circles with Gaussian jitter, labels 0/1. A third
/// feature carries pure noise so the toy model has a 3-wide input.
/// Deterministic for a given seed.
Dataset two_moons(Index n, double noise, std::uint64_t seed);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace uswim

#endif  // USWIM_DATAIO_HPP
