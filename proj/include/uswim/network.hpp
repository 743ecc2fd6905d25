#ifndef USWIM_NETWORK_HPP
#define USWIM_NETWORK_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Activation shape of a single example, stored row-major as (c, h, w).
struct Shape3 {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
         std::to_string(s.width) + ")";
}

enum class LayerKind : std::uint32_t {
  Dense = 0,
  Conv2D = 1,
  ReLU = 2,
  MaxPool2D = 3,
  AvgPool2D = 4,
  Flatten = 5,
  ResidualAdd = 6,
  BatchNormAffine = 7,
};

enum class LossKind : std::uint32_t { SoftmaxCrossEntropy = 0, L2 = 1 };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::AvgPool2D: return "AvgPool2D";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::ResidualAdd: return "ResidualAdd";
    case LayerKind::BatchNormAffine: return "BatchNormAffine";
  }
  return "?";
}

/// One layer of a feed-forward network.
///
/// Dense: `weight` is (out x in), `bias` has `out` entries.
/// Conv2D: `weight` is (out_channels x in_channels*k*k), rows ordered (c, ky, kx).
/// BatchNormAffine: frozen per-channel `weight` (scale, C x 1) and `bias` (shift).
/// Only Dense and Conv2D parameters are device-programmable weights.
template <typename Scalar>
struct Layer {
  LayerKind kind = LayerKind::ReLU;
  Shape3 in;
  Shape3 out;
  Index out_features = 0;  // Dense units or Conv2D output channels
  Index kernel = 0;
  Index stride = 1;
  Index padding = 0;
  Index source = -1;  // ResidualAdd: index of the layer whose output is added
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  /// max|w| over weights and biases at quantization time; 0 until quantized.
  Scalar quant_range = Scalar(0);

  bool programmable() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2D; }
  Index parameter_count() const { return programmable() ? weight.size() + bias.size() : 0; }
};

template <typename Scalar = double>
Layer<Scalar> dense(Index units) {
  Layer<Scalar> l;
  l.kind = LayerKind::Dense;
  l.out_features = units;
  return l;
}

template <typename Scalar = double>
Layer<Scalar> conv2d(Index out_channels, Index kernel, Index stride = 1, Index padding = 0) {
  Layer<Scalar> l;
  l.kind = LayerKind::Conv2D;
  l.out_features = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

template <typename Scalar = double>
Layer<Scalar> relu() {
  return Layer<Scalar>{};
}

template <typename Scalar = double>
Layer<Scalar> max_pool(Index kernel) {
  Layer<Scalar> l;
  l.kind = LayerKind::MaxPool2D;
  l.kernel = kernel;
  l.stride = kernel;
  return l;
}

template <typename Scalar = double>
Layer<Scalar> avg_pool(Index kernel) {
  Layer<Scalar> l;
  l.kind = LayerKind::AvgPool2D;
  l.kernel = kernel;
  l.stride = kernel;
  return l;
}

template <typename Scalar = double>
Layer<Scalar> flatten() {
  Layer<Scalar> l;
  l.kind = LayerKind::Flatten;
  return l;
}

template <typename Scalar = double>
Layer<Scalar> residual_add(Index source) {
  Layer<Scalar> l;
  l.kind = LayerKind::ResidualAdd;
  l.source = source;
  return l;
}

/// Frozen batch-norm folded to y = scale * x + shift per channel.
template <typename Scalar = double>
Layer<Scalar> batch_norm_affine(Vector<Scalar> scale, Vector<Scalar> shift) {
  Layer<Scalar> l;
  l.kind = LayerKind::BatchNormAffine;
  l.weight = std::move(scale);
  l.bias = std::move(shift);
  return l;
}

/// Location of a flat weight id inside the network.
struct WeightLocation {
  Index layer = 0;
  Index row = 0;
  Index col = 0;
  bool is_bias = false;
};

/// Ordered feed-forward graph. Weight ids run layer by layer over the
/// programmable layers: row-major weights first, then biases.
///
/// Every mutation of parameters bumps `version()`, which invalidates
/// backward tapes recorded earlier.
template <typename Scalar>
class Network {
 public:
  using scalar_type = Scalar;

  Network() = default;
  Network(Shape3 input, LossKind loss, int quant_bits = 4)
      : input_(input), loss_(loss), quant_bits_(quant_bits) {
    if (quant_bits < 2) throw ConfigError("quant_bits must be >= 2");
  }

  /// Appends a layer, inferring its input shape and allocating zeroed
  /// parameters. Throws ConfigError naming the layer if shapes do not chain.
  Network& add(Layer<Scalar> layer) {
    const Index idx = static_cast<Index>(layers_.size());
    layer.in = layers_.empty() ? input_ : layers_.back().out;
    auto fail = [&](const std::string& why) {
      throw ConfigError("layer " + std::to_string(idx) + " (" + to_string(layer.kind) +
                        "): " + why);
    };
    const Shape3 in = layer.in;
    switch (layer.kind) {
      case LayerKind::Dense: {
        if (layer.out_features < 1) fail("units must be positive");
        if (layer.weight.size() == 0) layer.weight = Matrix<Scalar>::Zero(layer.out_features, in.size());
        if (layer.bias.size() == 0) layer.bias = Vector<Scalar>::Zero(layer.out_features);
        if (layer.weight.rows() != layer.out_features || layer.weight.cols() != in.size())
          fail("weight shape does not match input " + to_string(in));
        layer.out = {layer.out_features, 1, 1};
        break;
      }
      case LayerKind::Conv2D: {
        if (layer.kernel < 1 || layer.stride < 1 || layer.padding < 0) fail("bad hyperparameters");
        const Index oh = (in.height + 2 * layer.padding - layer.kernel) / layer.stride + 1;
        const Index ow = (in.width + 2 * layer.padding - layer.kernel) / layer.stride + 1;
        if (in.height + 2 * layer.padding < layer.kernel || in.width + 2 * layer.padding < layer.kernel)
          fail("kernel larger than input " + to_string(in));
        const Index fan_in = in.channels * layer.kernel * layer.kernel;
        if (layer.weight.size() == 0) layer.weight = Matrix<Scalar>::Zero(layer.out_features, fan_in);
        if (layer.bias.size() == 0) layer.bias = Vector<Scalar>::Zero(layer.out_features);
        if (layer.weight.rows() != layer.out_features || layer.weight.cols() != fan_in)
          fail("weight shape does not match input " + to_string(in));
        layer.out = {layer.out_features, oh, ow};
        break;
      }
      case LayerKind::ReLU:
        layer.out = in;
        break;
      case LayerKind::MaxPool2D:
      case LayerKind::AvgPool2D:
        if (layer.kernel < 1 || in.height < layer.kernel || in.width < layer.kernel)
          fail("pool kernel does not fit input " + to_string(in));
        layer.stride = layer.kernel;
        layer.out = {in.channels, in.height / layer.kernel, in.width / layer.kernel};
        break;
      case LayerKind::Flatten:
        layer.out = {in.size(), 1, 1};
        break;
      case LayerKind::ResidualAdd:
        if (layer.source < 0 || layer.source >= idx) fail("source must be a strictly earlier layer");
        if (!(layers_[layer.source].out == in))
          fail("source shape " + to_string(layers_[layer.source].out) + " differs from input " +
               to_string(in));
        layer.out = in;
        break;
      case LayerKind::BatchNormAffine:
        if (layer.weight.size() != in.channels || layer.bias.size() != in.channels)
          fail("scale/shift must have one entry per channel");
        layer.weight.resize(in.channels, 1);
        layer.out = in;
        break;
    }
    layers_.push_back(std::move(layer));
    ++version_;
    return *this;
  }

  const Shape3& input_shape() const { return input_; }
  Shape3 output_shape() const { return layers_.empty() ? input_ : layers_.back().out; }
  LossKind loss_kind() const { return loss_; }
  int quant_bits() const { return quant_bits_; }
  void set_quant_bits(int bits) {
    if (bits < 2) throw ConfigError("quant_bits must be >= 2");
    quant_bits_ = bits;
  }

  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  const Layer<Scalar>& layer(Index i) const { return layers_.at(static_cast<std::size_t>(i)); }
  Index layer_count() const { return static_cast<Index>(layers_.size()); }

  /// Mutable access; counts as a mutation.
  Layer<Scalar>& mutable_layer(Index i) {
    ++version_;
    return layers_.at(static_cast<std::size_t>(i));
  }

  std::uint64_t version() const { return version_; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
  }

  Vector<Scalar> parameters() const {
    Vector<Scalar> flat(parameter_count());
    Index k = 0;
    for (const auto& l : layers_) {
      if (!l.programmable()) continue;
      for (Index r = 0; r < l.weight.rows(); ++r)
        for (Index c = 0; c < l.weight.cols(); ++c) flat[k++] = l.weight(r, c);
      for (Index r = 0; r < l.bias.size(); ++r) flat[k++] = l.bias[r];
    }
    return flat;
  }

  void set_parameters(const Vector<Scalar>& flat) {
    if (flat.size() != parameter_count())
      throw ArgumentError("parameter vector has " + std::to_string(flat.size()) +
                          " entries, network has " + std::to_string(parameter_count()));
    Index k = 0;
    for (auto& l : layers_) {
      if (!l.programmable()) continue;
      for (Index r = 0; r < l.weight.rows(); ++r)
        for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
    }
    ++version_;
  }

  Scalar parameter(Index id) const {
    const auto loc = locate(id);
    const auto& l = layers_[static_cast<std::size_t>(loc.layer)];
    return loc.is_bias ? l.bias[loc.row] : l.weight(loc.row, loc.col);
  }

  void set_parameter(Index id, Scalar value) {
    const auto loc = locate(id);
    auto& l = layers_[static_cast<std::size_t>(loc.layer)];
    (loc.is_bias ? l.bias[loc.row] : l.weight(loc.row, loc.col)) = value;
    ++version_;
  }

  WeightLocation locate(Index id) const {
    if (id < 0) throw ArgumentError("negative weight id");
    Index base = 0;
    for (Index li = 0; li < layer_count(); ++li) {
      const auto& l = layers_[static_cast<std::size_t>(li)];
      const Index n = l.parameter_count();
      if (id < base + n) {
        const Index off = id - base;
        if (off < l.weight.size()) return {li, off / l.weight.cols(), off % l.weight.cols(), false};
        return {li, off - l.weight.size(), 0, true};
      }
      base += n;
    }
    throw ArgumentError("weight id " + std::to_string(id) + " out of range (" +
                        std::to_string(base) + " weights)");
  }

  /// Layer index of every flat weight id.
  std::vector<Index> weight_layers() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(parameter_count()));
    for (Index li = 0; li < layer_count(); ++li)
      out.insert(out.end(), static_cast<std::size_t>(layers_[static_cast<std::size_t>(li)].parameter_count()), li);
    return out;
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(input_, loss_, quant_bits_);
    for (const auto& l : layers_) {
      Layer<Other> c;
      c.kind = l.kind;
      c.out_features = l.out_features;
      c.kernel = l.kernel;
      c.stride = l.stride;
      c.padding = l.padding;
      c.source = l.source;
      c.weight = l.weight.template cast<Other>();
      c.bias = l.bias.template cast<Other>();
      c.quant_range = static_cast<Other>(l.quant_range);
      out.add(std::move(c));
    }
    return out;
  }

 private:
  Shape3 input_;
  LossKind loss_ = LossKind::SoftmaxCrossEntropy;
  int quant_bits_ = 4;
  std::vector<Layer<Scalar>> layers_;
  std::uint64_t version_ = 0;
};

/// He-uniform initialization of Dense/Conv2D weights, zero biases.
template <typename Scalar>
void initialize_weights(Network<Scalar>& net, std::uint64_t seed) {
  CounterRng rng(seed, 0x1417);
  for (Index li = 0; li < net.layer_count(); ++li) {
    if (!net.layer(li).programmable()) continue;
    auto& l = net.mutable_layer(li);
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.cols()));
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c)
        l.weight(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
    l.bias.setZero();
  }
}

/// Largest |w| over a layer's weights and biases.
template <typename Scalar>
Scalar max_abs_parameter(const Layer<Scalar>& l) {
  Scalar m = l.weight.size() ? l.weight.cwiseAbs().maxCoeff() : Scalar(0);
  if (l.bias.size()) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
  return m;
}

/// Symmetric M-bit rounding of one value against a layer range.
/// An all-zero layer (range 0) uses range 1 so the step stays finite.
template <typename Scalar>
Scalar quantize_value(Scalar w, Scalar range, int bits) {
  const Scalar levels = static_cast<Scalar>((std::int64_t{1} << bits) - 1);
  const Scalar step = (range > Scalar(0) ? range : Scalar(1)) / levels;
  const Scalar q = std::min(levels, std::round(std::abs(w) / step));
  return (w < Scalar(0) ? -q : q) * step;
}

/// Copy of `net` with every programmable parameter rounded to the M-bit grid
/// of its layer (range = current max|w|). Used by quantization-aware training.
template <typename Scalar>
Network<Scalar> fake_quantized(const Network<Scalar>& net) {
  Network<Scalar> out = net;
  for (Index li = 0; li < out.layer_count(); ++li) {
    if (!out.layer(li).programmable()) continue;
    auto& l = out.mutable_layer(li);
    const Scalar range = max_abs_parameter(l);
    l.weight = l.weight.unaryExpr([&](Scalar w) { return quantize_value(w, range, net.quant_bits()); });
    l.bias = l.bias.unaryExpr([&](Scalar w) { return quantize_value(w, range, net.quant_bits()); });
  }
  return out;
}

}  // namespace uswim

#endif  // USWIM_NETWORK_HPP
