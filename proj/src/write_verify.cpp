#include "uswim/write_verify.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

void WriteVerifyConfig::validate() const {
  if (!(tolerance > 0.0)) throw ConfigError("tau must be > 0");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

ProgrammedState::ProgrammedState(const QuantizedNetwork& qnet, std::uint64_t run_seed)
    : run_seed_(run_seed) {
  weights_.reserve(qnet.weights.size());
  for (const auto& qw : qnet.weights) {
    ProgrammedWeight pw;
    pw.target = qw;
    weights_.push_back(std::move(pw));
  }
}

const ProgrammedWeight& ProgrammedState::weight(Index id) const {
  if (id < 0 || id >= size()) throw ArgumentError("unknown weight id " + std::to_string(id));
  return weights_[static_cast<std::size_t>(id)];
}

ProgrammedWeight& ProgrammedState::weight(Index id) {
  if (id < 0 || id >= size()) throw ArgumentError("unknown weight id " + std::to_string(id));
  return weights_[static_cast<std::size_t>(id)];
}

void ProgrammedState::retarget(Index id, const QuantizedWeight& target) {
  auto& w = weight(id);
  w.target = target;
  w.verified = false;
}

void program_once(ProgrammedState& state, Index weight_id, const DeviceSpec& spec) {
  auto& w = state.weight(weight_id);
  const SeedLineage lineage{state.run_seed(), static_cast<std::uint64_t>(weight_id), w.attempts};
  w.realized = static_cast<double>(w.target.q) + sample_combined_deviation(w.target, spec, lineage);
  w.programmed = true;
  w.verified = false;
  ++w.attempts;
  state.add_cycles(1);
}

WriteVerifyOutcome write_verify(ProgrammedState& state, std::span<const Index> weight_ids,
                                const WriteVerifyConfig& config, const DeviceSpec& spec) {
  config.validate();
  WriteVerifyOutcome out;
  const std::uint64_t before = state.total_cycles();
  for (const Index id : weight_ids) {
    auto& w = state.weight(id);
    const double target = static_cast<double>(w.target.q);
    bool ok = false;
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
      program_once(state, id, spec);
      if (std::abs(w.realized - target) <= config.tolerance) {
        ok = true;
        break;
      }
    }
    w.verified = ok;
    if (ok) ++out.verified;
    else ++out.unverified;
  }
  out.cycles = state.total_cycles() - before;
  return out;
}

void program_all_unverified(ProgrammedState& state, const DeviceSpec& spec) {
  for (Index id = 0; id < state.size(); ++id) program_once(state, id, spec);
}

Vector<double> realized_parameters(const ProgrammedState& state) {
  Vector<double> flat(state.size());
  for (Index id = 0; id < state.size(); ++id) {
    const auto& w = state.weights()[static_cast<std::size_t>(id)];
    if (!w.programmed) throw ArgumentError("weight " + std::to_string(id) + " was never programmed");
    flat[id] = static_cast<double>(w.target.sign) * w.realized * w.target.scale;
  }
  return flat;
}

Network<double> realized_network(const ProgrammedState& state, const Network<double>& net) {
  if (state.size() != net.parameter_count())
    throw ArgumentError("programmed state covers " + std::to_string(state.size()) + " weights, network has " +
                        std::to_string(net.parameter_count()));
  Network<double> out = net;
  out.set_parameters(realized_parameters(state));
  return out;
}

double attempt_success_probability(double noise_std, double tolerance) {
  if (noise_std <= 0.0) return 1.0;
  return std::erf(tolerance / (noise_std * std::numbers::sqrt2));
}

double expected_attempts(double noise_std, const WriteVerifyConfig& config) {
  const double p = attempt_success_probability(noise_std, config.tolerance);
  if (p >= 1.0) return 1.0;
  if (p <= 0.0) return config.max_attempts;
  // E[min(Geometric(p), cap)] = (1 - (1-p)^cap) / p
  return -std::expm1(config.max_attempts * std::log1p(-p)) / p;
}

double full_write_verify_cycles(const QuantizedNetwork& qnet, const DeviceSpec& spec,
                                const WriteVerifyConfig& config) {
  double total = 0.0;
  for (const auto& qw : qnet.weights) total += expected_attempts(noise_std_integer_units(qw, spec), config);
  return total;
}

namespace {

/// Variance of N(0, s^2) conditioned on |x| <= t.
double truncated_variance(double s, double t) {
  if (s <= 0.0) return 0.0;
  const double a = t / s;
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  const double mass = std::erf(a / std::numbers::sqrt2);
  return s * s * (1.0 - 2.0 * a * pdf / mass);
}

}  // namespace

CalibrationReport calibrate_write_verify(const DeviceSpec& spec, int quant_bits,
                                         const WriteVerifyConfig& config, Index weights,
                                         std::uint64_t seed) {
  spec.validate();
  config.validate();
  if (weights < 1) throw ArgumentError("calibration needs at least one weight");
  QuantizedNetwork qnet;
  qnet.quant_bits = quant_bits;
  qnet.bits_per_device = spec.bits_per_device;
  CounterRng codes(seed, 0xCA11B);
  const auto max_code = static_cast<std::uint64_t>((std::int64_t{1} << quant_bits) - 1);
  for (Index i = 0; i < weights; ++i) {
    QuantizedWeight qw;
    qw.q = static_cast<std::int64_t>(codes.below(max_code + 1));
    qw.levels = split_levels(qw.q, quant_bits, spec.bits_per_device);
    qw.scale = 1.0;
    qnet.weights.push_back(std::move(qw));
  }
  ProgrammedState state(qnet, seed);
  std::vector<Index> ids(static_cast<std::size_t>(weights));
  for (Index i = 0; i < weights; ++i) ids[static_cast<std::size_t>(i)] = i;
  const auto outcome = write_verify(state, ids, config, spec);

  CalibrationReport r;
  r.weights = weights;
  r.unverified = outcome.unverified;
  r.mean_attempts = static_cast<double>(state.total_cycles()) / static_cast<double>(weights);
  double sq = 0.0, expected_var = 0.0, attempts = 0.0;
  Index verified = 0;
  for (const auto& w : state.weights()) {
    const double s = noise_std_integer_units(w.target, spec);
    attempts += expected_attempts(s, config);
    expected_var += truncated_variance(s, config.tolerance);
    if (!w.verified) continue;
    const double d = w.realized - static_cast<double>(w.target.q);
    sq += d * d;
    ++verified;
  }
  r.residual_std = verified ? std::sqrt(sq / static_cast<double>(verified)) : 0.0;
  r.expected_attempts = attempts / static_cast<double>(weights);
  r.expected_residual_std = std::sqrt(expected_var / static_cast<double>(weights));
  return r;
}

}  // namespace uswim
