#include "uswim/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

void require(std::span<const std::uint8_t> bytes, std::size_t needed, const char* what) {
  if (bytes.size() < needed)
    throw FormatError(FormatError::Kind::Truncated, std::string(what) + ": truncated, need " +
                                                        std::to_string(needed) + " bytes, have " +
                                                        std::to_string(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  require(images, 4, "images");
  if (const auto m = read_be32(images, 0); m != kIdxImagesMagic)
    throw FormatError(FormatError::Kind::BadMagic, "images: bad magic " + hex32(m) + ", expected " + hex32(kIdxImagesMagic));
  require(labels, 4, "labels");
  if (const auto m = read_be32(labels, 0); m != kIdxLabelsMagic)
    throw FormatError(FormatError::Kind::BadMagic, "labels: bad magic " + hex32(m) + ", expected " + hex32(kIdxLabelsMagic));
  require(images, 16, "images");
  require(labels, 8, "labels");
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count)
    throw FormatError(FormatError::Kind::CountMismatch, "images file holds " + std::to_string(count) +
                                                            " items but labels file holds " +
                                                            std::to_string(label_count));
  const std::size_t pixels = rows * cols;
  require(images, 16 + count * pixels, "images");
  require(labels, 8 + count, "labels");

  Dataset d;
  d.shape = {1, static_cast<Index>(rows), static_cast<Index>(cols)};
  d.data.inputs.resize(static_cast<Index>(pixels), static_cast<Index>(count));
  d.data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* px = images.data() + 16 + i * pixels;
    for (std::size_t k = 0; k < pixels; ++k)
      d.data.inputs(static_cast<Index>(k), static_cast<Index>(i)) = static_cast<double>(px[k]) / 255.0;
    d.data.labels[i] = labels[8 + i];
  }
  return d;
}

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_mnist_idx(images, labels);
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& d) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(d.size()));
  put_be32(out, static_cast<std::uint32_t>(d.shape.height));
  put_be32(out, static_cast<std::uint32_t>(d.shape.width));
  for (Index i = 0; i < d.size(); ++i)
    for (Index k = 0; k < d.data.inputs.rows(); ++k)
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(d.data.inputs(k, i), 0.0, 1.0) * 255.0)));
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& d) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(d.size()));
  for (int label : d.data.labels) out.push_back(static_cast<std::uint8_t>(label));
  return out;
}

Dataset two_moons(Index n, double noise, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("two_moons needs at least 2 samples");
  if (!(noise >= 0.0)) throw ArgumentError("noise must be >= 0");
  CounterRng rng(seed, 0x300F5);
  Dataset d;
  d.shape = {3, 1, 1};
  d.split = "train";
  d.data.inputs.resize(3, n);
  d.data.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = std::numbers::pi * rng.uniform();
    double x = std::cos(t), y = std::sin(t);
    if (label == 1) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    d.data.inputs(0, i) = x + noise * rng.normal();
    d.data.inputs(1, i) = y + noise * rng.normal();
    d.data.inputs(2, i) = rng.normal();
    d.data.labels[static_cast<std::size_t>(i)] = label;
  }
  return d;
}

}  // namespace uswim
