#include "uswim/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "uswim/dataio.hpp"
#include "uswim/errors.hpp"
#include "uswim/reports.hpp"

namespace uswim {

namespace {

constexpr std::uint8_t kMagic[4] = {'U', 'S', 'W', 'M'};
constexpr std::size_t kHeader = 16;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError(FormatError::Kind::Malformed, "checkpoint payload ends early");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_matrix(Writer& w, const Matrix<double>& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) w.f32(m(r, c));
}

Matrix<double> read_matrix(Reader& r) {
  const std::uint64_t rows = r.u64(), cols = r.u64();
  if (rows > (1u << 24) || cols > (1u << 24)) throw FormatError(FormatError::Kind::Malformed, "implausible matrix size");
  Matrix<double> m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = r.f32();
  return m;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const Network<double>& net, const TrainingMetadata& meta) {
  Writer p;
  p.u64(static_cast<std::uint64_t>(net.input_shape().channels));
  p.u64(static_cast<std::uint64_t>(net.input_shape().height));
  p.u64(static_cast<std::uint64_t>(net.input_shape().width));
  p.u32(static_cast<std::uint32_t>(net.loss_kind()));
  p.u32(static_cast<std::uint32_t>(net.quant_bits()));
  p.u32(static_cast<std::uint32_t>(net.layer_count()));
  for (const auto& l : net.layers()) {
    p.u32(static_cast<std::uint32_t>(l.kind));
    p.i64(l.out_features);
    p.i64(l.kernel);
    p.i64(l.stride);
    p.i64(l.padding);
    p.i64(l.source);
    write_matrix(p, l.weight);
    write_matrix(p, l.bias);
    p.f32(l.quant_range);
  }
  p.u64(meta.seed);
  p.u32(meta.epochs);
  p.f64(meta.accuracy);

  Writer out;
  out.bytes.assign(std::begin(kMagic), std::end(kMagic));
  out.u32(kCheckpointVersion);
  out.u64(p.bytes.size());
  out.bytes.insert(out.bytes.end(), p.bytes.begin(), p.bytes.end());
  out.u64(fnv1a64(p.bytes));
  return std::move(out.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(FormatError::Kind::BadMagic, "not a checkpoint: magic bytes are not \"USWM\"");
  if (bytes.size() < kHeader) throw FormatError(FormatError::Kind::Truncated, "checkpoint header truncated");
  Reader header(bytes.subspan(4, 12));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw FormatError(FormatError::Kind::UnsupportedVersion,
                      "checkpoint version " + std::to_string(version) + " is not supported (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t length = header.u64();
  if (bytes.size() < kHeader + 8 || length > bytes.size() - kHeader - 8)
    throw FormatError(FormatError::Kind::Truncated, "checkpoint payload truncated");
  if (bytes.size() != kHeader + length + 8)
    throw FormatError(FormatError::Kind::Malformed, "checkpoint has trailing bytes");
  const auto payload = bytes.subspan(kHeader, length);
  Reader tail(bytes.subspan(kHeader + length, 8));
  if (tail.u64() != fnv1a64(payload))
    throw FormatError(FormatError::Kind::ChecksumMismatch, "checkpoint checksum mismatch");

  Reader r(payload);
  Shape3 input;
  input.channels = static_cast<Index>(r.u64());
  input.height = static_cast<Index>(r.u64());
  input.width = static_cast<Index>(r.u64());
  const auto loss = r.u32();
  if (loss > static_cast<std::uint32_t>(LossKind::L2)) throw FormatError(FormatError::Kind::Malformed, "unknown loss kind");
  const auto bits = r.u32();
  const auto count = r.u32();
  Checkpoint ck;
  try {
    ck.net = Network<double>(input, static_cast<LossKind>(loss), static_cast<int>(bits));
    for (std::uint32_t i = 0; i < count; ++i) {
      Layer<double> l;
      const auto kind = r.u32();
      if (kind > static_cast<std::uint32_t>(LayerKind::BatchNormAffine))
        throw FormatError(FormatError::Kind::Malformed, "unknown layer kind " + std::to_string(kind));
      l.kind = static_cast<LayerKind>(kind);
      l.out_features = r.i64();
      l.kernel = r.i64();
      l.stride = r.i64();
      l.padding = r.i64();
      l.source = r.i64();
      l.weight = read_matrix(r);
      const Matrix<double> bias = read_matrix(r);
      l.bias = Eigen::Map<const Vector<double>>(bias.data(), bias.size());
      l.quant_range = r.f32();
      ck.net.add(std::move(l));
    }
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::Malformed, std::string("checkpoint architecture invalid: ") + e.what());
  }
  ck.meta.seed = r.u64();
  ck.meta.epochs = r.u32();
  ck.meta.accuracy = r.f64();
  if (!r.done()) throw FormatError(FormatError::Kind::Malformed, "checkpoint payload has unread bytes");
  return ck;
}

void save_checkpoint(const Network<double>& net, const TrainingMetadata& meta, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(net, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void round_to_float(Network<double>& net) {
  for (Index li = 0; li < net.layer_count(); ++li) {
    auto& l = net.mutable_layer(li);
    l.weight = l.weight.cast<float>().cast<double>();
    l.bias = l.bias.cast<float>().cast<double>();
    l.quant_range = static_cast<double>(static_cast<float>(l.quant_range));
  }
}

}  // namespace uswim
