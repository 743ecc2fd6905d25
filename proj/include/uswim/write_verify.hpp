#ifndef USWIM_WRITE_VERIFY_HPP
#define USWIM_WRITE_VERIFY_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "uswim/device_model.hpp"

namespace uswim {

struct WriteVerifyConfig {
  /// Accepted |realized - q|, in units of q (integer-weight units).
  double tolerance = 0.06;
  int max_attempts = 1000;

  void validate() const;
};

struct ProgrammedWeight {
  QuantizedWeight target;
  double realized = 0.0;   // in units of q, sign excluded
  bool programmed = false;
  bool verified = false;
  std::uint32_t attempts = 0;
};

/// Device contents of a whole network during programming.
///
/// Invariant: total_cycles() == sum of per-weight attempts.
class ProgrammedState {
 public:
  ProgrammedState() = default;
  ProgrammedState(const QuantizedNetwork& qnet, std::uint64_t run_seed);

  Index size() const { return static_cast<Index>(weights_.size()); }
  std::uint64_t run_seed() const { return run_seed_; }
  std::uint64_t total_cycles() const { return total_cycles_; }

  const ProgrammedWeight& weight(Index id) const;
  ProgrammedWeight& weight(Index id);
  const std::vector<ProgrammedWeight>& weights() const { return weights_; }

  /// Replaces the desired value of a weight (in-situ updates). The weight
  /// keeps its attempt counter and becomes unverified.
  void retarget(Index id, const QuantizedWeight& target);

  void add_cycles(std::uint64_t n) { total_cycles_ += n; }

 private:
  std::vector<ProgrammedWeight> weights_;
  std::uint64_t run_seed_ = 0;
  std::uint64_t total_cycles_ = 0;
};

/// One programming pulse sequence on every device of one weight: fresh noise,
/// one write cycle, result not yet verified.
void program_once(ProgrammedState& state, Index weight_id, const DeviceSpec& spec);

struct WriteVerifyOutcome {
  std::uint64_t cycles = 0;
  Index verified = 0;
  Index unverified = 0;  // hit max_attempts; keep their last realized value
};

/// Program-then-verify loop for each listed weight until
/// |realized - q| <= tolerance or max_attempts is reached.
WriteVerifyOutcome write_verify(ProgrammedState& state, std::span<const Index> weight_ids,
                                const WriteVerifyConfig& config, const DeviceSpec& spec);

/// Initial bulk write: every weight programmed once without verification.
void program_all_unverified(ProgrammedState& state, const DeviceSpec& spec);

/// Real-valued weights sign * realized * scale in weight-id order.
Vector<double> realized_parameters(const ProgrammedState& state);

/// `net` with its programmable weights replaced by the realized values.
/// Throws ArgumentError if any weight has never been programmed.
Network<double> realized_network(const ProgrammedState& state, const Network<double>& net);

/// P(|N(0, std^2)| <= tolerance) for one attempt.
double attempt_success_probability(double noise_std, double tolerance);

/// Expected attempts until success, capped at max_attempts.
double expected_attempts(double noise_std, const WriteVerifyConfig& config);

/// Expected cycles to write-verify every weight of a network once from scratch.
/// This is the NWC denominator.
double full_write_verify_cycles(const QuantizedNetwork& qnet, const DeviceSpec& spec,
                                const WriteVerifyConfig& config);

struct CalibrationReport {
  Index weights = 0;
  double mean_attempts = 0.0;
  double residual_std = 0.0;       // of realized - q over verified weights
  double expected_attempts = 0.0;  // analytic, averaged over the sampled codes
  double expected_residual_std = 0.0;
  Index unverified = 0;
};

/// Write-verifies `weights` synthetic weights with codes drawn uniformly from
/// [0, 2^M - 1] and compares attempt counts and residuals with the analytic
/// geometric and truncated-normal predictions.
CalibrationReport calibrate_write_verify(const DeviceSpec& spec, int quant_bits,
                                         const WriteVerifyConfig& config, Index weights,
                                         std::uint64_t seed);

}  // namespace uswim

#endif  // USWIM_WRITE_VERIFY_HPP
