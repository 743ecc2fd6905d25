#ifndef USWIM_SENSITIVITY_HPP
#define USWIM_SENSITIVITY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uswim/backprop.hpp"
#include "uswim/device_model.hpp"

namespace uswim {

struct SensitivityEntry {
  Index weight_id = 0;
  Index layer = 0;
  double metric = 0.0;
  double h = 0.0;          // diagonal second derivative of the loss
  double var = 0.0;        // E[(dw)^2] before write-verify, real weight units^2
  double magnitude = 0.0;  // |w|
  Index rank = 0;
};

/// One global ranking of all weights. `entries` is indexed by weight id and
/// `order[r]` is the weight id at rank r (rank 0 = most sensitive).
struct SensitivityReport {
  std::string kind;
  std::vector<SensitivityEntry> entries;
  std::vector<Index> order;

  Index size() const { return static_cast<Index>(order.size()); }
};

/// Descending by metric; ties by descending magnitude, then ascending id.
std::vector<Index> rank_descending(std::span<const double> metric, std::span<const double> magnitude);

/// Pre-write-verify variance of a weight: scale^2 * noise_std_integer_units^2.
double weight_variance(const QuantizedWeight& qw, const DeviceSpec& spec);

/// Batch-size weighted mean of diag_hessian over calibration batches.
Vector<double> averaged_diag_hessian(const Network<double>& net, std::span<const Batch<double>> calibration);

/// h * E[(dw)^2] with h measured on the dequantized (deployed) network.
SensitivityReport uswim_metric(const Network<double>& net, const QuantizedNetwork& qnet,
                               std::span<const Batch<double>> calibration, const DeviceSpec& spec);

/// h alone (device-agnostic ranking).
SensitivityReport swim_metric(const Network<double>& net, const QuantizedNetwork& qnet,
                              std::span<const Batch<double>> calibration);

/// |w| of the trained real-valued weights.
SensitivityReport magnitude_metric(const QuantizedNetwork& qnet);

/// Uniformly random permutation, reproducible per seed.
SensitivityReport random_order(Index n, std::uint64_t seed);

/// Assembles a report from precomputed columns (h / var may be empty).
SensitivityReport make_report(std::string kind, std::vector<double> metric, std::vector<double> h,
                              std::vector<double> var, std::vector<double> magnitude,
                              std::vector<Index> layers);

}  // namespace uswim

#endif  // USWIM_SENSITIVITY_HPP
