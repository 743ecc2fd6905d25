#ifndef USWIM_STRATEGY_HPP
#define USWIM_STRATEGY_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uswim/backprop.hpp"
#include "uswim/device_model.hpp"
#include "uswim/sensitivity.hpp"
#include "uswim/write_verify.hpp"

namespace uswim {

enum class Strategy { USWIM, SWIM, Magnitude, Random, InSitu };

std::string to_string(Strategy s);
/// Case-insensitive; throws ConfigError for unknown names.
Strategy parse_strategy(std::string_view name);

struct InSituConfig {
  double learning_rate = 0.01;
  Index batch_size = 64;
  int max_iterations = 100;
};

struct DriverConfig {
  double granularity = 0.05;  // fraction of all weights per write-verify batch
  double max_accuracy_drop = 0.0;  // percentage points
  Strategy strategy = Strategy::USWIM;
  DeviceSpec device;
  WriteVerifyConfig write_verify;
  std::uint64_t seed = 1;
  InSituConfig insitu;

  void validate() const;
};

/// A trained network together with its quantized image.
struct Deployment {
  Network<double> net;         // trained latent weights
  QuantizedNetwork quantized;
  Network<double> deployed;    // dequantized, noise-free

  Index weight_count() const { return quantized.size(); }
};

Deployment make_deployment(Network<double> net, int quant_bits, int bits_per_device);

/// cycles / denominator. Throws ConfigError for a non-positive denominator.
double nwc(double cycles, double denominator);

struct TrajectoryRecord {
  Index batch = 0;
  Index verified = 0;
  std::uint64_t cycles = 0;  // all write cycles including the bulk write
  double nwc = 0.0;          // write-verify (or in-situ) cycles / denominator
  double acc_train = std::numeric_limits<double>::quiet_NaN();
  double acc_eval = std::numeric_limits<double>::quiet_NaN();
};

enum class Termination { StoppedByDrop, Exhausted, Diverged };
std::string to_string(Termination t);

struct Trajectory {
  Strategy strategy = Strategy::USWIM;
  std::uint64_t run = 0;
  double baseline_accuracy = 0.0;  // noise-free quantized accuracy on the training set
  double denominator = 0.0;        // expected cycles to write-verify every weight
  std::vector<TrajectoryRecord> records;
  Termination termination = Termination::Exhausted;
  std::string diagnostic;
};

/// Builds the ranking a selective strategy uses. InSitu has no ranking.
SensitivityReport strategy_ranking(Strategy s, const Deployment& d, std::span<const Batch<double>> calibration,
                                   const DeviceSpec& device, std::uint64_t seed);

/// Splits a training set into calibration chunks of at most `chunk` examples.
std::vector<Batch<double>> split_batches(const Batch<double>& data, Index chunk);

/// Selective write-verify: bulk write, rank, then write-verify batches of
/// ceil(p * n) weights in rank order until the training-set accuracy is
/// within max_accuracy_drop of the noise-free quantized accuracy.
/// `eval` accuracy is recorded but never used for stopping.
Trajectory run_selective(const Deployment& d, const DriverConfig& cfg, const Batch<double>& train,
                         const Batch<double>* eval = nullptr,
                         const SensitivityReport* ranking = nullptr);

/// On-chip retraining baseline: gradients on the noisy realized weights,
/// every weight re-written once per iteration without verification.
Trajectory run_insitu(const Deployment& d, const DriverConfig& cfg, const Batch<double>& train,
                      const Batch<double>* eval = nullptr);

/// Accuracy at a series of cycle budgets for one Monte Carlo run.
struct BudgetedRun {
  std::vector<double> accuracy;     // per budget
  std::vector<double> nwc;          // realized NWC at the evaluated boundary
  std::vector<std::uint64_t> cycles;
  std::vector<Index> verified;      // weights verified (or in-situ iterations)
  bool failed = false;
  std::string diagnostic;
};

/// Walks the write-verify batches in rank order and, for every NWC budget,
/// evaluates the state at the last batch boundary whose cumulative
/// write-verify cycles stay within the budget.
BudgetedRun run_selective_budgeted(const Deployment& d, const SensitivityReport& ranking,
                                   const DeviceSpec& device, const WriteVerifyConfig& wv,
                                   double granularity, std::span<const double> nwc_budgets,
                                   double denominator, const Batch<double>& eval,
                                   std::uint64_t run_seed);

/// In-situ counterpart: for every budget runs floor(budget * denominator / n)
/// full-update iterations.
BudgetedRun run_insitu_budgeted(const Deployment& d, const DeviceSpec& device, const InSituConfig& cfg,
                                std::span<const double> nwc_budgets, double denominator,
                                const Batch<double>& train, const Batch<double>& eval,
                                std::uint64_t run_seed);

}  // namespace uswim

#endif  // USWIM_STRATEGY_HPP
