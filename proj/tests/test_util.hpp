#ifndef USWIM_TESTS_TEST_UTIL_HPP
#define USWIM_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>

#include "uswim/backprop.hpp"

namespace uswim::testing {

inline Network<double> make_mlp(Index in, Index hidden, Index out, std::uint64_t seed,
                                LossKind loss = LossKind::SoftmaxCrossEntropy) {
  Network<double> net({in, 1, 1}, loss);
  net.add(dense(hidden)).add(relu()).add(dense(out));
  initialize_weights(net, seed);
  // nonzero biases so they take part in every check
  CounterRng rng(seed, 99);
  for (Index li : {Index{0}, Index{2}}) {
    auto& l = net.mutable_layer(li);
    for (Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.uniform(-0.3, 0.3);
  }
  return net;
}

inline Network<double> make_conv_net(std::uint64_t seed) {
  Network<double> net({1, 6, 6}, LossKind::SoftmaxCrossEntropy);
  net.add(conv2d(2, 3, 1, 1)).add(relu()).add(max_pool(2)).add(flatten()).add(dense(3));
  initialize_weights(net, seed);
  return net;
}

inline Batch<double> random_batch(Index features, Index examples, int classes, std::uint64_t seed) {
  CounterRng rng(seed, 7);
  Batch<double> b;
  b.inputs.resize(features, examples);
  for (Index j = 0; j < examples; ++j)
    for (Index i = 0; i < features; ++i) b.inputs(i, j) = rng.normal();
  for (Index j = 0; j < examples; ++j) b.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  return b;
}

inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central first difference of the loss with respect to one weight.
inline double fd_gradient(Network<double>& net, const Batch<double>& batch, Index id, double step) {
  const double w = net.parameter(id);
  net.set_parameter(id, w + step);
  const double up = compute_loss(net, batch);
  net.set_parameter(id, w - step);
  const double down = compute_loss(net, batch);
  net.set_parameter(id, w);
  return (up - down) / (2 * step);
}

}  // namespace uswim::testing

#endif  // USWIM_TESTS_TEST_UTIL_HPP
