#ifndef USWIM_DEVICE_MODEL_HPP
#define USWIM_DEVICE_MODEL_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uswim/network.hpp"

namespace uswim {

/// Programming-noise profile of a K-bit NVM device.
///
/// A device targeted at level g gets Gaussian noise with standard deviation
/// sigma * beta * dm_table[g], in device-level units.
struct DeviceSpec {
  std::string name = "Uniform";
  int bits_per_device = 2;
  double sigma = 0.1;
  double beta = 1.0;
  std::vector<double> dm_table{1.0, 1.0, 1.0, 1.0};

  int levels() const { return 1 << bits_per_device; }
  double level_std(int level) const { return sigma * beta * dm_table.at(static_cast<std::size_t>(level)); }

  /// Throws ConfigError if the table size or any factor is invalid.
  /// sigma == 0 is accepted as the noise-free device.
  void validate() const;
};

/// Uniform, F2, R4 or F6 with the given base sigma. Names are case-insensitive.
DeviceSpec builtin_device(std::string_view name, double sigma = 0.1);
std::vector<std::string> builtin_device_names();

/// Sign-magnitude M-bit weight split over M/K devices.
struct QuantizedWeight {
  int sign = 1;
  std::int64_t q = 0;          // magnitude code, sum of levels[i] * 2^(i*K)
  std::vector<int> levels;     // least-significant device first
  double scale = 1.0;          // real weight units per unit of q
};

/// Base-2^K digits of q, least significant first.
std::vector<int> split_levels(std::int64_t q, int quant_bits, int bits_per_device);
std::int64_t merge_levels(const std::vector<int>& levels, int bits_per_device);

/// Quantizes one real weight against a layer range (max|w|).
QuantizedWeight quantize_weight(double w, double layer_range, int quant_bits, int bits_per_device);

inline double dequantize(const QuantizedWeight& qw) {
  return static_cast<double>(qw.sign) * static_cast<double>(qw.q) * qw.scale;
}

/// Every programmable weight of a network in weight-id order.
struct QuantizedNetwork {
  int quant_bits = 4;
  int bits_per_device = 2;
  std::vector<QuantizedWeight> weights;
  std::vector<Index> layer_of;       // layer index per weight id
  std::vector<double> latent;        // the real-valued weight that was quantized
  std::vector<double> layer_range;   // per layer max|w| (0 for non-programmable)

  Index size() const { return static_cast<Index>(weights.size()); }
};

/// Per-layer symmetric quantization: scale = range / (2^M - 1), where range
/// is the layer's recorded quant_range or, if none is recorded yet, max|w|.
/// An all-zero layer uses range 1. The non-const overload records the range
/// on each layer of `net`.
QuantizedNetwork quantize_network(Network<double>& net, int quant_bits, int bits_per_device);
QuantizedNetwork quantize_network(const Network<double>& net, int quant_bits, int bits_per_device);

/// Copy of `net` with every programmable weight replaced by its dequantized value.
Network<double> dequantized_network(const Network<double>& net, const QuantizedNetwork& qnet);

/// Std of the combined deviation sum_i noise_i * 2^(i*K), in units of q.
double noise_std_integer_units(const QuantizedWeight& qw, const DeviceSpec& spec);

/// Addresses one programming attempt of one weight in one run.
struct SeedLineage {
  std::uint64_t run_seed = 0;
  std::uint64_t weight_id = 0;
  std::uint32_t attempt = 0;
};

struct NoiseDraw {
  std::vector<double> perturbations;  // per device, device-level units
  double combined = 0.0;              // sum_i perturbation_i * 2^(i*K)
  SeedLineage lineage;
};

/// Draws fresh programming noise for every device of a weight. The noise
/// std of each device depends on its target level. Pure function of
/// (qw, spec, lineage).
NoiseDraw sample_programmed_value(const QuantizedWeight& qw, const DeviceSpec& spec,
                                  const SeedLineage& lineage);

/// Combined deviation only; same stream as sample_programmed_value.
double sample_combined_deviation(const QuantizedWeight& qw, const DeviceSpec& spec,
                                 const SeedLineage& lineage);

}  // namespace uswim

#endif  // USWIM_DEVICE_MODEL_HPP
