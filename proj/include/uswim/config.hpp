#ifndef USWIM_CONFIG_HPP
#define USWIM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uswim/dataio.hpp"
#include "uswim/eval_harness.hpp"

namespace uswim {

/// Everything a CLI invocation needs, with defaults applied.
struct RunConfig {
  std::filesystem::path model = "model.uswm";
  std::string dataset = "moons";     // "moons" or "mnist"
  std::filesystem::path data_dir;    // IDX files for dataset = mnist
  Index moons_samples = 1000;
  double moons_noise = 0.1;
  std::string architecture = "mlp";  // "mlp" or "lenet"
  Index channels = 6;
  Index hidden = 24;

  int epochs = 30;
  double learning_rate = 0.1;
  Index batch_size = 32;
  bool quant_aware = true;
  std::uint64_t train_seed = 1;

  int quant_bits = 4;
  int bits_per_device = 2;
  std::vector<std::string> devices{"Uniform"};
  std::vector<double> sigmas{0.1};
  std::vector<double> dm_table;  // non-empty: devices are custom specs with this table
  double beta = 1.0;

  WriteVerifyConfig write_verify;
  double granularity = 0.05;
  double max_accuracy_drop = 0.1;
  Strategy strategy = Strategy::USWIM;
  std::vector<Strategy> strategies{Strategy::USWIM, Strategy::SWIM, Strategy::Magnitude, Strategy::Random};
  std::vector<double> nwc_grid{0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  int runs = 200;
  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path out = "out";
  InSituConfig insitu{0.01, 64, 10};
  Index calibration_chunk = 256;

  int samples_per_weight = 100;
  double correlation_sigma = 1.0;
  Index weight_subset = -1;   // -1: every weight
  Index full_study_limit = 5000;
  Index calibration_weights = 10000;

  /// Cross product of devices and sigmas, in config order.
  std::vector<DeviceSpec> device_specs() const;
  /// First device at the first sigma.
  DeviceSpec primary_device() const;
  /// First device at correlation_sigma.
  DeviceSpec correlation_device() const;
  DriverConfig driver_config() const;
  ExperimentPlan experiment_plan() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every accepted key with its default and meaning, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Applies one `key = value` assignment. Relative paths resolve against
/// `base_dir`. Throws ConfigError naming the key and the violated constraint.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir);

/// Parses the flat key-value format: one `key = value` per line, `#` starts
/// a comment, blank lines ignored. Unknown or repeated keys are errors.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Reads and parses a config file; relative paths resolve against its directory.
RunConfig load_config(const std::filesystem::path& path);

/// Cross-field checks, including that configured input paths exist.
void validate(const RunConfig& cfg);

/// Canonical `key = value` rendering of every key, used for the config hash.
std::string canonical_text(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

struct DataSplits {
  Dataset train;
  Dataset test;
};

/// Loads the configured dataset: deterministic two-moons splits or the IDX
/// files train-{images-idx3,labels-idx1}-ubyte and test-... in data_dir.
DataSplits load_splits(const RunConfig& cfg);

/// Untrained network for the configured dataset. "mlp" is a one-hidden-layer
/// MLP (28x28 images are average-pooled to 7x7 first); "lenet" pools 28x28
/// images to 14x14, then applies a 5x5 convolution, ReLU, 2x2 max-pool and a
/// dense classifier.
Network<double> build_model(const RunConfig& cfg, const Shape3& input, int classes);

}  // namespace uswim

#endif  // USWIM_CONFIG_HPP
