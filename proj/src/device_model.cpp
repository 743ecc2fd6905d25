#include "uswim/device_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <utility>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

/// Standard normals for device `index` of one attempt: two per Philox block.
double lineage_normal(const SeedLineage& lin, std::uint32_t index) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(lin.run_seed),
                            static_cast<std::uint32_t>(lin.run_seed >> 32)};
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(lin.weight_id),
                                static_cast<std::uint32_t>(lin.weight_id >> 32), lin.attempt,
                                index / 2};
  const auto out = Philox4x32::generate(ctr, key);
  const double u1 = to_unit_open((std::uint64_t{out[1]} << 32) | out[0]);
  const double u2 = to_unit_open((std::uint64_t{out[3]} << 32) | out[2]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return (index % 2 == 0) ? r * std::cos(theta) : r * std::sin(theta);
}

}  // namespace

void DeviceSpec::validate() const {
  if (bits_per_device < 1 || bits_per_device > 8)
    throw ConfigError("device '" + name + "': bits per device must be in [1, 8]");
  if (static_cast<int>(dm_table.size()) != levels())
    throw ConfigError("device '" + name + "': dm table needs " + std::to_string(levels()) +
                      " entries, got " + std::to_string(dm_table.size()));
  for (double d : dm_table)
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("device '" + name + "': dm entries must be > 0");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("device '" + name + "': sigma must be >= 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("device '" + name + "': beta must be > 0");
}

DeviceSpec builtin_device(std::string_view name, double sigma) {
  const std::string key = lower(name);
  DeviceSpec spec;
  spec.sigma = sigma;
  spec.bits_per_device = 2;
  if (key == "uniform") {
    spec.name = "Uniform";
    spec.beta = 1.0;
    spec.dm_table = {1, 1, 1, 1};
  } else if (key == "f2") {
    spec.name = "F2";
    spec.beta = 0.8;
    spec.dm_table = {1, 2, 2, 1};
  } else if (key == "r4") {
    spec.name = "R4";
    spec.beta = 0.57;
    spec.dm_table = {1, 4, 4, 1};
  } else if (key == "f6") {
    spec.name = "F6";
    spec.beta = 0.43;
    spec.dm_table = {1, 6, 6, 1};
  } else {
    throw ConfigError("unknown device '" + std::string(name) + "' (built-ins: Uniform, F2, R4, F6)");
  }
  return spec;
}

std::vector<std::string> builtin_device_names() { return {"Uniform", "F2", "R4", "F6"}; }

std::vector<int> split_levels(std::int64_t q, int quant_bits, int bits_per_device) {
  if (bits_per_device < 1 || quant_bits % bits_per_device != 0)
    throw ConfigError("quantization bits (" + std::to_string(quant_bits) +
                      ") must be a multiple of bits per device (" + std::to_string(bits_per_device) + ")");
  const int devices = quant_bits / bits_per_device;
  const std::int64_t mask = (std::int64_t{1} << bits_per_device) - 1;
  std::vector<int> levels(static_cast<std::size_t>(devices));
  for (int i = 0; i < devices; ++i) levels[static_cast<std::size_t>(i)] = static_cast<int>((q >> (i * bits_per_device)) & mask);
  return levels;
}

std::int64_t merge_levels(const std::vector<int>& levels, int bits_per_device) {
  std::int64_t q = 0;
  for (std::size_t i = 0; i < levels.size(); ++i)
    q += static_cast<std::int64_t>(levels[i]) << (static_cast<int>(i) * bits_per_device);
  return q;
}

QuantizedWeight quantize_weight(double w, double layer_range, int quant_bits, int bits_per_device) {
  if (quant_bits < 2) throw ConfigError("quantization bits must be >= 2");
  const std::int64_t max_code = (std::int64_t{1} << quant_bits) - 1;
  QuantizedWeight qw;
  qw.scale = (layer_range > 0.0 ? layer_range : 1.0) / static_cast<double>(max_code);
  qw.q = std::min<std::int64_t>(max_code, std::llround(std::abs(w) / qw.scale));
  qw.sign = (w < 0.0 && qw.q != 0) ? -1 : 1;
  qw.levels = split_levels(qw.q, quant_bits, bits_per_device);
  return qw;
}

QuantizedNetwork quantize_network(const Network<double>& net, int quant_bits, int bits_per_device) {
  if (quant_bits < 2) throw ConfigError("quantization bits must be >= 2");
  if (bits_per_device < 1 || quant_bits % bits_per_device != 0)
    throw ConfigError("quantization bits (" + std::to_string(quant_bits) +
                      ") must be a multiple of bits per device (" + std::to_string(bits_per_device) + ")");
  QuantizedNetwork out;
  out.quant_bits = quant_bits;
  out.bits_per_device = bits_per_device;
  out.layer_range.assign(static_cast<std::size_t>(net.layer_count()), 0.0);
  const Vector<double> flat = net.parameters();
  out.weights.reserve(static_cast<std::size_t>(flat.size()));
  Index k = 0;
  for (Index li = 0; li < net.layer_count(); ++li) {
    const auto& l = net.layer(li);
    if (!l.programmable()) continue;
    const double range = l.quant_range > 0.0 ? l.quant_range : max_abs_parameter(l);
    out.layer_range[static_cast<std::size_t>(li)] = range;
    for (Index j = 0; j < l.parameter_count(); ++j, ++k) {
      out.weights.push_back(quantize_weight(flat[k], range, quant_bits, bits_per_device));
      out.layer_of.push_back(li);
      out.latent.push_back(flat[k]);
    }
  }
  return out;
}

QuantizedNetwork quantize_network(Network<double>& net, int quant_bits, int bits_per_device) {
  QuantizedNetwork out = quantize_network(std::as_const(net), quant_bits, bits_per_device);
  net.set_quant_bits(quant_bits);
  for (Index li = 0; li < net.layer_count(); ++li)
    if (net.layer(li).programmable()) net.mutable_layer(li).quant_range = out.layer_range[static_cast<std::size_t>(li)];
  return out;
}

Network<double> dequantized_network(const Network<double>& net, const QuantizedNetwork& qnet) {
  if (qnet.size() != net.parameter_count())
    throw ArgumentError("quantized network does not match the network's weight count");
  Vector<double> flat(qnet.size());
  for (Index i = 0; i < qnet.size(); ++i) flat[i] = dequantize(qnet.weights[static_cast<std::size_t>(i)]);
  Network<double> out = net;
  out.set_parameters(flat);
  return out;
}

double noise_std_integer_units(const QuantizedWeight& qw, const DeviceSpec& spec) {
  double var = 0.0;
  for (std::size_t i = 0; i < qw.levels.size(); ++i) {
    const double s = spec.level_std(qw.levels[i]);
    const double weight = std::ldexp(1.0, static_cast<int>(i) * spec.bits_per_device);
    var += s * s * weight * weight;
  }
  return std::sqrt(var);
}

NoiseDraw sample_programmed_value(const QuantizedWeight& qw, const DeviceSpec& spec,
                                  const SeedLineage& lineage) {
  NoiseDraw draw;
  draw.lineage = lineage;
  draw.perturbations.resize(qw.levels.size());
  for (std::size_t i = 0; i < qw.levels.size(); ++i) {
    const double s = spec.level_std(qw.levels[i]);
    const double e = s == 0.0 ? 0.0 : s * lineage_normal(lineage, static_cast<std::uint32_t>(i));
    draw.perturbations[i] = e;
    draw.combined += e * std::ldexp(1.0, static_cast<int>(i) * spec.bits_per_device);
  }
  return draw;
}

double sample_combined_deviation(const QuantizedWeight& qw, const DeviceSpec& spec,
                                 const SeedLineage& lineage) {
  double combined = 0.0;
  for (std::size_t i = 0; i < qw.levels.size(); ++i) {
    const double s = spec.level_std(qw.levels[i]);
    if (s == 0.0) continue;
    combined += s * lineage_normal(lineage, static_cast<std::uint32_t>(i)) *
                std::ldexp(1.0, static_cast<int>(i) * spec.bits_per_device);
  }
  return combined;
}

}  // namespace uswim
