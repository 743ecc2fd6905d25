#ifndef USWIM_TRAIN_HPP
#define USWIM_TRAIN_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "uswim/backprop.hpp"

namespace uswim {

struct TrainOptions {
  int epochs = 50;
  double learning_rate = 0.1;
  Index batch_size = 32;
  /// Forward/backward on M-bit rounded weights, updates on latent weights.
  bool quant_aware = true;
  std::uint64_t seed = 1;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

/// Minibatch SGD. Deterministic for a fixed seed: the example order of every
/// epoch is a Fisher-Yates shuffle drawn from a counter-based stream.
/// Throws DivergenceError when the loss becomes non-finite.
template <typename Scalar>
TrainLog train_sgd(Network<Scalar>& net, const Batch<Scalar>& data, const TrainOptions& opt) {
  if (data.size() == 0) throw ArgumentError("training set is empty");
  if (!(opt.learning_rate >= 0.0)) throw ArgumentError("learning rate must be >= 0");
  if (opt.batch_size < 1) throw ArgumentError("batch size must be >= 1");
  const Index n = data.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  TrainLog log;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    CounterRng rng(opt.seed, 0x5E1F0000ull + static_cast<std::uint64_t>(epoch));
    for (Index i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);

    double loss_sum = 0.0;
    for (Index start = 0; start < n; start += opt.batch_size) {
      const Index count = std::min(opt.batch_size, n - start);
      Batch<Scalar> mb;
      mb.inputs.resize(data.inputs.rows(), count);
      if (data.targets.size()) mb.targets.resize(data.targets.rows(), count);
      for (Index j = 0; j < count; ++j) {
        const Index src = order[static_cast<std::size_t>(start + j)];
        mb.inputs.col(j) = data.inputs.col(src);
        if (!data.labels.empty()) mb.labels.push_back(data.labels[static_cast<std::size_t>(src)]);
        if (data.targets.size()) mb.targets.col(j) = data.targets.col(src);
      }
      LossAndGradient<Scalar> lg;
      if (opt.quant_aware) {
        const Network<Scalar> q = fake_quantized(net);
        lg = loss_and_gradient(q, mb);
      } else {
        lg = loss_and_gradient(net, mb);
      }
      if (!std::isfinite(static_cast<double>(lg.loss)))
        throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch) +
                              " (lr=" + std::to_string(opt.learning_rate) + ")");
      loss_sum += static_cast<double>(lg.loss) * static_cast<double>(count);
      if (opt.learning_rate == 0.0) continue;
      const auto lr = static_cast<Scalar>(opt.learning_rate);
      for (Index li = 0; li < net.layer_count(); ++li) {
        if (!net.layer(li).programmable()) continue;
        auto& l = net.mutable_layer(li);
        const auto ul = static_cast<std::size_t>(li);
        l.weight -= lr * lg.gradient.weight[ul];
        l.bias -= lr * lg.gradient.bias[ul];
      }
    }
    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(n);
    if (!data.labels.empty())
      stats.accuracy = opt.quant_aware ? accuracy(fake_quantized(net), data) : accuracy(net, data);
    log.epochs.push_back(stats);
  }
  return log;
}

}  // namespace uswim

#endif  // USWIM_TRAIN_HPP
