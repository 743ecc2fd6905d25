#ifndef USWIM_EVAL_HARNESS_HPP
#define USWIM_EVAL_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uswim/stats.hpp"
#include "uswim/strategy.hpp"

namespace uswim {

/// One (strategy, device, sigma) combination of a sweep.
struct SweepCell {
  Strategy strategy = Strategy::USWIM;
  DeviceSpec device;

  /// "USWIM/Uniform/0.1"
  std::string label() const;
};

struct ExperimentPlan {
  std::vector<SweepCell> cells;
  std::vector<double> nwc_grid{0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  int runs = 200;
  std::uint64_t base_seed = 1;
  int workers = 1;
  double granularity = 0.05;
  WriteVerifyConfig write_verify;
  InSituConfig insitu;
  Index calibration_chunk = 256;

  void validate() const;
};

struct SweepPoint {
  double nwc = 0.0;
  Summary summary;
  std::size_t failed = 0;
  bool single_sample = false;
};

struct CellResult {
  SweepCell cell;
  double denominator = 0.0;
  std::vector<SweepPoint> points;                 // one per grid value
  std::vector<std::vector<double>> accuracy;      // [run][grid], NaN for a failed run
  std::vector<std::vector<double>> realized_nwc;  // [run][grid]
  std::vector<std::vector<std::uint64_t>> cycles;  // [run][grid], bulk write included
  std::vector<std::vector<Index>> verified;        // [run][grid]; in-situ: iterations
  std::vector<std::uint64_t> run_seeds;
  std::vector<std::string> run_errors;            // empty string for a successful run
};

struct InvariantFailure {
  std::string cell;
  std::string invariant;
  std::string detail;
};

struct SweepResult {
  std::vector<double> nwc_grid;
  std::uint64_t base_seed = 0;
  int runs = 0;
  double granularity = 0.0;
  std::vector<CellResult> cells;
  std::vector<InvariantFailure> failures;

  /// Nullptr when no cell matches.
  const CellResult* find(Strategy s, const std::string& device, double sigma) const;
};

/// Seed of Monte Carlo run `run` in the noise cell (device, sigma). Every
/// strategy evaluated on the same device and sigma shares these seeds, so
/// strategy comparisons are paired.
std::uint64_t sweep_run_seed(std::uint64_t base_seed, const DeviceSpec& device, int run);

/// Runs every cell for plan.runs Monte Carlo runs and evaluates `eval`
/// accuracy at every NWC budget. `train` feeds the Hessian calibration and
/// in-situ updates. Results do not depend on plan.workers or cell order.
/// Invariant checks are run and stored in `failures`.
SweepResult run_sweep(const ExperimentPlan& plan, const Deployment& d, const Batch<double>& train,
                      const Batch<double>& eval);

/// Budget respect, std >= 0, monotone trend (one-sided paired test at
/// alpha = 0.01) and USWIM variance shrinkage.
std::vector<InvariantFailure> check_sweep_invariants(const SweepResult& result);

struct CorrelationOptions {
  int samples_per_weight = 100;
  std::vector<Index> weight_subset;  // empty: every weight
  std::uint64_t seed = 1;
};

struct CorrelationRow {
  Index weight_id = 0;
  Index layer = 0;
  double metric = 0.0;
  double magnitude = 0.0;
  double mean_drop = 0.0;  // percentage points
};

struct CorrelationResult {
  std::optional<double> pcc_uswim;      // empty when a column is constant
  std::optional<double> pcc_magnitude;
  double baseline_accuracy = 0.0;
  int samples_per_weight = 0;
  bool high_variance = false;           // fewer than 10 draws per weight
  std::vector<CorrelationRow> rows;
};

/// Perturbs one weight at a time with its device noise (all other weights
/// at their quantized values) and correlates the mean accuracy drop on
/// `eval` with the USWIM metric and with |w|.
CorrelationResult correlation_study(const Deployment& d, const DeviceSpec& device,
                                    std::span<const Batch<double>> calibration, const Batch<double>& eval,
                                    const CorrelationOptions& options);

/// `count` distinct weight ids drawn uniformly, sorted ascending.
std::vector<Index> sample_weight_subset(Index n, Index count, std::uint64_t seed);

}  // namespace uswim

#endif  // USWIM_EVAL_HARNESS_HPP
