#ifndef USWIM_BACKPROP_HPP
#define USWIM_BACKPROP_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uswim/network.hpp"

namespace uswim {

/// A set of examples stored column-wise (features x examples). Classification
/// losses read `labels`; the L2 loss reads `targets` (outputs x examples).
template <typename Scalar>
struct Batch {
  Matrix<Scalar> inputs;
  std::vector<int> labels;
  Matrix<Scalar> targets;

  Index size() const { return inputs.cols(); }

  Batch slice(Index begin, Index count) const {
    Batch out;
    out.inputs = inputs.middleCols(begin, count);
    if (!labels.empty())
      out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
    if (targets.size()) out.targets = targets.middleCols(begin, count);
    return out;
  }
};

/// Multiply-accumulate counter for cost comparisons between backward passes.
struct OpCount {
  std::uint64_t macs = 0;
};

/// Everything a backward pass needs from the forward pass that produced it.
template <typename Scalar>
struct BackwardTape {
  const Network<Scalar>* owner = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix<Scalar>> inputs;          // input of every layer
  std::vector<std::vector<Index>> argmax;      // MaxPool2D: winning input index per output
  Matrix<Scalar> output;

  bool valid_for(const Network<Scalar>& net) const {
    return owner == &net && version == net.version() &&
           inputs.size() == static_cast<std::size_t>(net.layer_count());
  }
};

/// Per-layer tensors shaped like the network's parameters. Empty entries for
/// layers without programmable weights.
template <typename Scalar>
struct ParameterSet {
  std::vector<Matrix<Scalar>> weight;
  std::vector<Vector<Scalar>> bias;

  static ParameterSet zeros_like(const Network<Scalar>& net) {
    ParameterSet p;
    for (const auto& l : net.layers()) {
      if (l.programmable()) {
        p.weight.push_back(Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
        p.bias.push_back(Vector<Scalar>::Zero(l.bias.size()));
      } else {
        p.weight.emplace_back();
        p.bias.emplace_back();
      }
    }
    return p;
  }

  /// Flat vector in weight-id order (row-major weights, then biases).
  Vector<Scalar> flatten() const {
    Index n = 0;
    for (std::size_t i = 0; i < weight.size(); ++i) n += weight[i].size() + bias[i].size();
    Vector<Scalar> out(n);
    Index k = 0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      for (Index r = 0; r < weight[i].rows(); ++r)
        for (Index c = 0; c < weight[i].cols(); ++c) out[k++] = weight[i](r, c);
      for (Index r = 0; r < bias[i].size(); ++r) out[k++] = bias[i][r];
    }
    return out;
  }

  ParameterSet& operator+=(const ParameterSet& o) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += o.weight[i];
      bias[i] += o.bias[i];
    }
    return *this;
  }

  ParameterSet& operator*=(Scalar s) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] *= s;
      bias[i] *= s;
    }
    return *this;
  }
};

template <typename Scalar>
using Gradient = ParameterSet<Scalar>;

/// Diagonal second derivatives d2f/dw2, same layout as the parameters.
template <typename Scalar>
using DiagHessian = ParameterSet<Scalar>;

namespace detail {

inline Index conv_out_extent(Index in, Index k, Index s, Index p) { return (in + 2 * p - k) / s + 1; }

/// Unfolds one (c, h, w) example into (c*k*k) x (oh*ow) patches.
template <typename Scalar>
Matrix<Scalar> im2col(const Scalar* x, const Layer<Scalar>& l) {
  const Index k = l.kernel, s = l.stride, p = l.padding;
  const Index oh = l.out.height, ow = l.out.width;
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(l.in.channels * k * k, oh * ow);
  for (Index c = 0; c < l.in.channels; ++c)
    for (Index ky = 0; ky < k; ++ky)
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * s + ky - p;
          if (iy < 0 || iy >= l.in.height) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * s + kx - p;
            if (ix < 0 || ix >= l.in.width) continue;
            cols(row, oy * ow + ox) = x[(c * l.in.height + iy) * l.in.width + ix];
          }
        }
      }
  return cols;
}

/// Adjoint of im2col: scatters patch values back, summing overlaps.
template <typename Scalar>
void col2im_add(const Matrix<Scalar>& cols, const Layer<Scalar>& l, Scalar* dx) {
  const Index k = l.kernel, s = l.stride, p = l.padding;
  const Index oh = l.out.height, ow = l.out.width;
  for (Index c = 0; c < l.in.channels; ++c)
    for (Index ky = 0; ky < k; ++ky)
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * s + ky - p;
          if (iy < 0 || iy >= l.in.height) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * s + kx - p;
            if (ix < 0 || ix >= l.in.width) continue;
            dx[(c * l.in.height + iy) * l.in.width + ix] += cols(row, oy * ow + ox);
          }
        }
      }
}

template <typename Scalar>
Matrix<Scalar> layer_forward(const Layer<Scalar>& l, const Matrix<Scalar>& x,
                             const std::vector<Matrix<Scalar>>& outputs,
                             std::vector<Index>* argmax, OpCount* ops) {
  const Index batch = x.cols();
  switch (l.kind) {
    case LayerKind::Dense: {
      if (ops) ops->macs += static_cast<std::uint64_t>(l.weight.size() * batch);
      Matrix<Scalar> y = l.weight * x;
      y.colwise() += l.bias;
      return y;
    }
    case LayerKind::Conv2D: {
      const Index hw = l.out.height * l.out.width;
      Matrix<Scalar> y(l.out.size(), batch);
      for (Index b = 0; b < batch; ++b) {
        const Matrix<Scalar> cols = im2col(x.col(b).data(), l);
        RowMajorMatrix<Scalar> yb = l.weight * cols;
        yb.colwise() += l.bias;
        Eigen::Map<RowMajorMatrix<Scalar>>(y.col(b).data(), l.out.channels, hw) = yb;
      }
      if (ops) ops->macs += static_cast<std::uint64_t>(l.weight.size() * hw * batch);
      return y;
    }
    case LayerKind::ReLU:
      return x.cwiseMax(Scalar(0));
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      const bool is_max = l.kind == LayerKind::MaxPool2D;
      const Index k = l.kernel;
      Matrix<Scalar> y(l.out.size(), batch);
      if (is_max) argmax->assign(static_cast<std::size_t>(l.out.size() * batch), 0);
      const Scalar inv_area = Scalar(1) / static_cast<Scalar>(k * k);
      for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < l.out.channels; ++c)
          for (Index oy = 0; oy < l.out.height; ++oy)
            for (Index ox = 0; ox < l.out.width; ++ox) {
              Scalar acc = is_max ? -std::numeric_limits<Scalar>::infinity() : Scalar(0);
              Index best = -1;
              for (Index ky = 0; ky < k; ++ky)
                for (Index kx = 0; kx < k; ++kx) {
                  const Index idx = (c * l.in.height + oy * k + ky) * l.in.width + ox * k + kx;
                  const Scalar v = x(idx, b);
                  if (is_max) {
                    if (v > acc || best < 0) {
                      acc = v;
                      best = idx;
                    }
                  } else {
                    acc += v;
                  }
                }
              const Index o = (c * l.out.height + oy) * l.out.width + ox;
              if (is_max) {
                y(o, b) = acc;
                (*argmax)[static_cast<std::size_t>(b * l.out.size() + o)] = best;
              } else {
                y(o, b) = acc * inv_area;
              }
            }
      return y;
    }
    case LayerKind::Flatten:
      return x;
    case LayerKind::ResidualAdd:
      return x + outputs[static_cast<std::size_t>(l.source)];
    case LayerKind::BatchNormAffine: {
      Matrix<Scalar> y = x;
      const Index plane = l.in.height * l.in.width;
      for (Index c = 0; c < l.in.channels; ++c)
        y.middleRows(c * plane, plane) =
            (x.middleRows(c * plane, plane).array() * l.weight(c, 0) + l.bias[c]).matrix();
      return y;
    }
  }
  throw ConfigError(std::string("unsupported layer kind ") + to_string(l.kind));
}

/// Shared reverse sweep. With `squared == false` this is ordinary
/// backpropagation of df/d(.). With `squared == true` every linear
/// coefficient is replaced by its square, which propagates the diagonal
/// second derivatives d2f/d(.)2 in the Gauss-Newton / OBD approximation.
/// ReLU masks, max-pool routing and residual sums are identical in both modes.
template <typename Scalar>
ParameterSet<Scalar> reverse_sweep(const Network<Scalar>& net, const BackwardTape<Scalar>& tape,
                                   Matrix<Scalar> upstream, bool squared, OpCount* ops,
                                   Matrix<Scalar>* input_result = nullptr) {
  const Index count = net.layer_count();
  auto params = ParameterSet<Scalar>::zeros_like(net);
  std::vector<Matrix<Scalar>> pending(static_cast<std::size_t>(count));
  Matrix<Scalar> g = std::move(upstream);
  for (Index li = count - 1; li >= 0; --li) {
    const auto& l = net.layer(li);
    const auto ul = static_cast<std::size_t>(li);
    if (pending[ul].size()) g += pending[ul];
    const Matrix<Scalar>& x = tape.inputs[ul];
    const Index batch = x.cols();
    const bool need_input = li > 0 || input_result != nullptr;
    Matrix<Scalar> gx;
    switch (l.kind) {
      case LayerKind::Dense: {
        if (squared) {
          params.weight[ul] = g * x.cwiseAbs2().transpose();
          if (ops) ops->macs += static_cast<std::uint64_t>(x.size());
        } else {
          params.weight[ul] = g * x.transpose();
        }
        params.bias[ul] = g.rowwise().sum();
        if (ops) ops->macs += static_cast<std::uint64_t>(l.weight.size() * batch);
        if (need_input) {
          if (squared) {
            gx = l.weight.cwiseAbs2().transpose() * g;
            if (ops) ops->macs += static_cast<std::uint64_t>(l.weight.size());
          } else {
            gx = l.weight.transpose() * g;
          }
          if (ops) ops->macs += static_cast<std::uint64_t>(l.weight.size() * batch);
        }
        break;
      }
      case LayerKind::Conv2D: {
        const Index hw = l.out.height * l.out.width;
        const Matrix<Scalar> wt = squared ? Matrix<Scalar>(l.weight.cwiseAbs2().transpose())
                                          : Matrix<Scalar>(l.weight.transpose());
        if (need_input) gx = Matrix<Scalar>::Zero(l.in.size(), batch);
        for (Index b = 0; b < batch; ++b) {
          Matrix<Scalar> cols = im2col(x.col(b).data(), l);
          if (squared) cols = cols.cwiseAbs2();
          const Matrix<Scalar> gb = Eigen::Map<const RowMajorMatrix<Scalar>>(g.col(b).data(), l.out.channels, hw);
          params.weight[ul].noalias() += gb * cols.transpose();
          params.bias[ul] += gb.rowwise().sum();
          if (need_input) col2im_add<Scalar>(wt * gb, l, gx.col(b).data());
        }
        const auto per_pass = static_cast<std::uint64_t>(l.weight.size() * hw * batch);
        if (ops) {
          ops->macs += per_pass * (need_input ? 2 : 1);
          if (squared) ops->macs += static_cast<std::uint64_t>(l.weight.size() + l.weight.cols() * hw * batch);
        }
        break;
      }
      case LayerKind::ReLU:
        // Derivative and curvature coefficient are both 1[x > 0]; x == 0 gives 0.
        gx = (x.array() > Scalar(0)).select(g.array(), Scalar(0)).matrix();
        break;
      case LayerKind::MaxPool2D: {
        gx = Matrix<Scalar>::Zero(l.in.size(), batch);
        const auto& winners = tape.argmax[ul];
        for (Index b = 0; b < batch; ++b)
          for (Index o = 0; o < l.out.size(); ++o)
            gx(winners[static_cast<std::size_t>(b * l.out.size() + o)], b) += g(o, b);
        break;
      }
      case LayerKind::AvgPool2D: {
        const Index k = l.kernel;
        Scalar coeff = Scalar(1) / static_cast<Scalar>(k * k);
        if (squared) coeff *= coeff;
        gx = Matrix<Scalar>::Zero(l.in.size(), batch);
        for (Index b = 0; b < batch; ++b)
          for (Index c = 0; c < l.out.channels; ++c)
            for (Index oy = 0; oy < l.out.height; ++oy)
              for (Index ox = 0; ox < l.out.width; ++ox) {
                const Scalar v = coeff * g((c * l.out.height + oy) * l.out.width + ox, b);
                for (Index ky = 0; ky < k; ++ky)
                  for (Index kx = 0; kx < k; ++kx)
                    gx((c * l.in.height + oy * k + ky) * l.in.width + ox * k + kx, b) += v;
              }
        break;
      }
      case LayerKind::Flatten:
        gx = std::move(g);
        break;
      case LayerKind::ResidualAdd: {
        auto& slot = pending[static_cast<std::size_t>(l.source)];
        if (slot.size()) slot += g;
        else slot = g;
        gx = std::move(g);
        break;
      }
      case LayerKind::BatchNormAffine: {
        gx = g;
        const Index plane = l.in.height * l.in.width;
        for (Index c = 0; c < l.in.channels; ++c) {
          const Scalar s = squared ? l.weight(c, 0) * l.weight(c, 0) : l.weight(c, 0);
          gx.middleRows(c * plane, plane) *= s;
        }
        break;
      }
      default:
        throw ConfigError(std::string("unsupported layer kind ") + to_string(l.kind));
    }
    g = std::move(gx);
  }
  if (input_result) *input_result = std::move(g);
  return params;
}

}  // namespace detail

/// Runs the network on column-major `inputs` (features x examples) and
/// returns the final-layer logits. When `tape` is given it is filled with
/// everything the backward passes need.
template <typename Scalar>
Matrix<Scalar> forward(const Network<Scalar>& net, const Matrix<Scalar>& inputs,
                       BackwardTape<Scalar>* tape = nullptr, OpCount* ops = nullptr) {
  if (inputs.rows() != net.input_shape().size())
    throw ConfigError("layer 0 (" +
                      std::string(net.layer_count() ? to_string(net.layer(0).kind) : "input") +
                      "): expected " + std::to_string(net.input_shape().size()) +
                      " input features, got " + std::to_string(inputs.rows()));
  const auto count = static_cast<std::size_t>(net.layer_count());
  std::vector<Matrix<Scalar>> outputs(count);
  std::vector<std::vector<Index>> argmax(count);
  const Matrix<Scalar>* x = &inputs;
  for (std::size_t i = 0; i < count; ++i) {
    outputs[i] = detail::layer_forward(net.layers()[i], *x, outputs, &argmax[i], ops);
    x = &outputs[i];
  }
  Matrix<Scalar> result = count ? outputs.back() : inputs;
  if (tape) {
    tape->owner = &net;
    tape->version = net.version();
    tape->inputs.resize(count);
    if (count) tape->inputs[0] = inputs;
    for (std::size_t i = 1; i < count; ++i) tape->inputs[i] = std::move(outputs[i - 1]);
    tape->argmax = std::move(argmax);
    tape->output = result;
  }
  return result;
}

/// Runs layers [first, end) starting from `x`, the input of layer `first`.
/// Outputs of earlier layers that a residual connection reads come from
/// `tape`, which must have been recorded on a network with the same layout.
template <typename Scalar>
Matrix<Scalar> forward_tail(const Network<Scalar>& net, const BackwardTape<Scalar>& tape, Index first,
                            Matrix<Scalar> x) {
  const Index count = net.layer_count();
  if (first < 0 || first > count) throw ArgumentError("forward_tail: bad start layer");
  std::vector<Matrix<Scalar>> outputs(static_cast<std::size_t>(count));
  for (Index i = first; i < count; ++i) {
    const auto& l = net.layer(i);
    if (l.kind == LayerKind::ResidualAdd && l.source < first - 1 && outputs[static_cast<std::size_t>(l.source)].size() == 0)
      outputs[static_cast<std::size_t>(l.source)] = tape.inputs.at(static_cast<std::size_t>(l.source + 1));
  }
  if (first > 0) outputs[static_cast<std::size_t>(first - 1)] = x;
  std::vector<Index> argmax;
  for (Index i = first; i < count; ++i) {
    outputs[static_cast<std::size_t>(i)] = detail::layer_forward(net.layer(i), x, outputs, &argmax, nullptr);
    x = outputs[static_cast<std::size_t>(i)];
  }
  return x;
}

/// Loss value plus its first and (diagonal) second derivative with respect
/// to the logits, all already divided by the batch size.
template <typename Scalar>
struct LossSeed {
  Scalar loss = Scalar(0);
  Matrix<Scalar> gradient;
  Matrix<Scalar> curvature;
};

template <typename Scalar>
Matrix<Scalar> softmax_columns(const Matrix<Scalar>& logits) {
  Matrix<Scalar> p(logits.rows(), logits.cols());
  for (Index b = 0; b < logits.cols(); ++b) {
    const Scalar m = logits.col(b).maxCoeff();
    p.col(b) = (logits.col(b).array() - m).exp().matrix();
    p.col(b) /= p.col(b).sum();
  }
  return p;
}

template <typename Scalar>
LossSeed<Scalar> loss_seed(LossKind kind, const Matrix<Scalar>& logits, const Batch<Scalar>& batch) {
  const Index n = logits.cols();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  LossSeed<Scalar> seed;
  if (kind == LossKind::SoftmaxCrossEntropy) {
    if (static_cast<Index>(batch.labels.size()) != n) throw ArgumentError("label count differs from batch size");
    const Matrix<Scalar> p = softmax_columns(logits);
    seed.gradient = p;
    for (Index b = 0; b < n; ++b) {
      const int y = batch.labels[static_cast<std::size_t>(b)];
      if (y < 0 || y >= logits.rows()) throw ArgumentError("label " + std::to_string(y) + " out of range");
      const Scalar m = logits.col(b).maxCoeff();
      const Scalar lse = m + std::log((logits.col(b).array() - m).exp().sum());
      seed.loss += lse - logits(y, b);
      seed.gradient(y, b) -= Scalar(1);
    }
    seed.loss *= inv_n;
    seed.gradient *= inv_n;
    seed.curvature = (p.array() * (Scalar(1) - p.array())).matrix() * inv_n;
  } else {
    if (batch.targets.rows() != logits.rows() || batch.targets.cols() != n)
      throw ArgumentError("target shape differs from network output");
    const Matrix<Scalar> diff = logits - batch.targets;
    seed.loss = diff.squaredNorm() * inv_n;
    seed.gradient = Scalar(2) * inv_n * diff;
    seed.curvature = Matrix<Scalar>::Constant(logits.rows(), n, Scalar(2) * inv_n);
  }
  return seed;
}

template <typename Scalar>
Scalar compute_loss(const Network<Scalar>& net, const Batch<Scalar>& batch) {
  if (batch.size() == 0) throw ArgumentError("empty batch");
  return loss_seed(net.loss_kind(), forward(net, batch.inputs), batch).loss;
}

/// Gradient from a recorded forward pass. Rejects tapes that do not belong
/// to the current state of `net`.
template <typename Scalar>
Gradient<Scalar> backward_gradient(const Network<Scalar>& net, const BackwardTape<Scalar>& tape,
                                   const Batch<Scalar>& batch, Scalar* loss = nullptr,
                                   OpCount* ops = nullptr) {
  if (!tape.valid_for(net)) throw StaleTapeError("backward pass called with a stale tape");
  auto seed = loss_seed(net.loss_kind(), tape.output, batch);
  if (loss) *loss = seed.loss;
  return detail::reverse_sweep(net, tape, std::move(seed.gradient), false, ops);
}

/// Diagonal second derivatives from a recorded forward pass.
template <typename Scalar>
DiagHessian<Scalar> backward_diag_hessian(const Network<Scalar>& net, const BackwardTape<Scalar>& tape,
                                          const Batch<Scalar>& batch, OpCount* ops = nullptr) {
  if (!tape.valid_for(net)) throw StaleTapeError("backward pass called with a stale tape");
  auto seed = loss_seed(net.loss_kind(), tape.output, batch);
  return detail::reverse_sweep(net, tape, std::move(seed.curvature), true, ops);
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss = Scalar(0);
  Gradient<Scalar> gradient;
};

/// Mean loss over the batch and its gradient with respect to every parameter.
template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const Network<Scalar>& net, const Batch<Scalar>& batch,
                                          OpCount* ops = nullptr) {
  if (batch.size() == 0) throw ArgumentError("empty batch");
  BackwardTape<Scalar> tape;
  forward(net, batch.inputs, &tape, ops);
  LossAndGradient<Scalar> out;
  out.gradient = backward_gradient(net, tape, batch, &out.loss, ops);
  return out;
}

/// One forward and one backward sweep giving batch-averaged d2f/dw2 for every
/// weight. Output seed is p(1-p) for softmax cross-entropy and 2 for L2.
template <typename Scalar>
DiagHessian<Scalar> diag_hessian(const Network<Scalar>& net, const Batch<Scalar>& batch,
                                 OpCount* ops = nullptr) {
  if (batch.size() == 0) throw ArgumentError("empty batch");
  BackwardTape<Scalar> tape;
  forward(net, batch.inputs, &tape, ops);
  return backward_diag_hessian(net, tape, batch, ops);
}

template <typename Scalar>
struct SecondDifference {
  Scalar value = Scalar(0);
  /// Set when f(x +- step) was indistinguishable from f(x) in working precision.
  bool underflow = false;
};

/// Central second difference (f(x+h) - 2 f(x) + f(x-h)) / h^2.
template <typename Scalar, typename F>
SecondDifference<Scalar> second_difference(F&& f, Scalar x, Scalar step) {
  if (!(step > Scalar(0))) throw ArgumentError("step must be positive");
  const Scalar up = f(x + step);
  const Scalar mid = f(x);
  const Scalar down = f(x - step);
  return {(up - Scalar(2) * mid + down) / (step * step), up == mid && down == mid};
}

/// Finite-difference oracle for one diagonal entry of the loss Hessian.
/// The weight is restored to its exact original value before returning.
template <typename Scalar>
SecondDifference<Scalar> fd_second_derivative(Network<Scalar>& net, const Batch<Scalar>& batch,
                                              Index weight_id, Scalar step) {
  const Scalar original = net.parameter(weight_id);
  auto f = [&](Scalar w) {
    net.set_parameter(weight_id, w);
    return compute_loss(net, batch);
  };
  SecondDifference<Scalar> r;
  try {
    r = second_difference(f, original, step);
  } catch (...) {
    net.set_parameter(weight_id, original);
    throw;
  }
  net.set_parameter(weight_id, original);
  return r;
}

/// Indices of the largest logit per column.
template <typename Scalar>
std::vector<int> predict(const Network<Scalar>& net, const Matrix<Scalar>& inputs) {
  const Matrix<Scalar> logits = forward(net, inputs);
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Index b = 0; b < logits.cols(); ++b) {
    Index best = 0;
    logits.col(b).maxCoeff(&best);
    out[static_cast<std::size_t>(b)] = static_cast<int>(best);
  }
  return out;
}

/// Fraction of correctly classified examples (0..1).
template <typename Scalar>
double accuracy(const Network<Scalar>& net, const Batch<Scalar>& batch) {
  if (batch.size() == 0) throw ArgumentError("empty batch");
  const auto pred = predict(net, batch.inputs);
  Index hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == batch.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace uswim

#endif  // USWIM_BACKPROP_HPP
