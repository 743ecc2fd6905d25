#include "uswim/sensitivity.hpp"

#include <algorithm>
#include <numeric>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

std::vector<Index> rank_descending(std::span<const double> metric, std::span<const double> magnitude) {
  if (metric.size() != magnitude.size()) throw ArgumentError("metric and magnitude lengths differ");
  std::vector<Index> order(metric.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    if (metric[ua] != metric[ub]) return metric[ua] > metric[ub];
    if (magnitude[ua] != magnitude[ub]) return magnitude[ua] > magnitude[ub];
    return a < b;
  });
  return order;
}

double weight_variance(const QuantizedWeight& qw, const DeviceSpec& spec) {
  const double s = noise_std_integer_units(qw, spec) * qw.scale;
  return s * s;
}

Vector<double> averaged_diag_hessian(const Network<double>& net, std::span<const Batch<double>> calibration) {
  Vector<double> h = Vector<double>::Zero(net.parameter_count());
  Index total = 0;
  for (const auto& batch : calibration) {
    if (batch.size() == 0) continue;
    h += static_cast<double>(batch.size()) * diag_hessian(net, batch).flatten();
    total += batch.size();
  }
  if (total == 0) throw ArgumentError("calibration data is empty");
  return h / static_cast<double>(total);
}

SensitivityReport make_report(std::string kind, std::vector<double> metric, std::vector<double> h,
                              std::vector<double> var, std::vector<double> magnitude,
                              std::vector<Index> layers) {
  const std::size_t n = metric.size();
  if (magnitude.size() != n || (!h.empty() && h.size() != n) || (!var.empty() && var.size() != n) ||
      (!layers.empty() && layers.size() != n))
    throw ArgumentError("report columns have different lengths");
  SensitivityReport r;
  r.kind = std::move(kind);
  r.order = rank_descending(metric, magnitude);
  r.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = r.entries[i];
    e.weight_id = static_cast<Index>(i);
    e.layer = layers.empty() ? 0 : layers[i];
    e.metric = metric[i];
    e.h = h.empty() ? 0.0 : h[i];
    e.var = var.empty() ? 0.0 : var[i];
    e.magnitude = magnitude[i];
  }
  for (std::size_t rank = 0; rank < n; ++rank)
    r.entries[static_cast<std::size_t>(r.order[rank])].rank = static_cast<Index>(rank);
  return r;
}

namespace {

std::vector<double> magnitudes(const QuantizedNetwork& qnet) {
  std::vector<double> m(qnet.latent.size());
  std::transform(qnet.latent.begin(), qnet.latent.end(), m.begin(), [](double w) { return std::abs(w); });
  return m;
}

std::vector<double> hessian_column(const Network<double>& net, const QuantizedNetwork& qnet,
                                   std::span<const Batch<double>> calibration) {
  const Vector<double> h = averaged_diag_hessian(dequantized_network(net, qnet), calibration);
  return {h.data(), h.data() + h.size()};
}

}  // namespace

SensitivityReport uswim_metric(const Network<double>& net, const QuantizedNetwork& qnet,
                               std::span<const Batch<double>> calibration, const DeviceSpec& spec) {
  std::vector<double> h = hessian_column(net, qnet, calibration);
  std::vector<double> var(h.size()), metric(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    var[i] = weight_variance(qnet.weights[i], spec);
    metric[i] = h[i] * var[i];
  }
  return make_report("USWIM", std::move(metric), std::move(h), std::move(var), magnitudes(qnet), qnet.layer_of);
}

SensitivityReport swim_metric(const Network<double>& net, const QuantizedNetwork& qnet,
                              std::span<const Batch<double>> calibration) {
  std::vector<double> h = hessian_column(net, qnet, calibration);
  std::vector<double> metric = h;
  return make_report("SWIM", std::move(metric), std::move(h), {}, magnitudes(qnet), qnet.layer_of);
}

SensitivityReport magnitude_metric(const QuantizedNetwork& qnet) {
  auto m = magnitudes(qnet);
  auto metric = m;
  return make_report("Magnitude", std::move(metric), {}, {}, std::move(m), qnet.layer_of);
}

SensitivityReport random_order(Index n, std::uint64_t seed) {
  if (n < 0) throw ArgumentError("n must be >= 0");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  CounterRng rng(seed, 0x7A9D0);
  for (Index i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
  SensitivityReport r;
  r.kind = "Random";
  r.order = perm;
  r.entries.resize(static_cast<std::size_t>(n));
  for (Index rank = 0; rank < n; ++rank) {
    auto& e = r.entries[static_cast<std::size_t>(perm[static_cast<std::size_t>(rank)])];
    e.weight_id = perm[static_cast<std::size_t>(rank)];
    e.rank = rank;
    e.metric = static_cast<double>(n - rank);
  }
  return r;
}

}  // namespace uswim
