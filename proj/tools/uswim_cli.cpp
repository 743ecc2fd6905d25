// uswim: train, quantize, rank, and simulate selective write-verify of
// DNN weights on noisy non-volatile memory devices.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uswim/checkpoint.hpp"
#include "uswim/config.hpp"
#include "uswim/errors.hpp"
#include "uswim/eval_harness.hpp"
#include "uswim/reports.hpp"
#include "uswim/train.hpp"

namespace fs = std::filesystem;
using namespace uswim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> epochs;
};

RunConfig resolve_config(const CommonOptions& o, bool seed_is_training) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
  }
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed) (seed_is_training ? cfg.train_seed : cfg.seed) = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers must be >= 1");
    cfg.workers = *o.workers;
  }
  if (o.epochs) {
    if (*o.epochs < 0) throw ConfigError("--epochs must be >= 0");
    cfg.epochs = *o.epochs;
  }
  validate(cfg);
  return cfg;
}

Deployment load_deployment(const RunConfig& cfg) {
  Checkpoint ck = load_checkpoint(cfg.model);
  return make_deployment(std::move(ck.net), cfg.quant_bits, cfg.bits_per_device);
}

ReportBundle base_bundle(const std::string& command, const RunConfig& cfg) {
  ReportBundle b;
  b.command = command;
  b.config_text = canonical_text(cfg);
  b.config_hash = config_hash(cfg);
  b.seeds = {cfg.seed, cfg.train_seed};
  return b;
}

void print_written(const fs::path& out) { std::cout << "reports written to " << out.string() << "\n"; }

int cmd_train(const RunConfig& cfg) {
  const DataSplits data = load_splits(cfg);
  const int classes = cfg.dataset == "moons" ? 2 : 10;
  Network<double> net = build_model(cfg, data.train.shape, classes);
  initialize_weights(net, cfg.train_seed);
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.learning_rate = cfg.learning_rate;
  opt.batch_size = cfg.batch_size;
  opt.quant_aware = cfg.quant_aware;
  opt.seed = cfg.train_seed;
  const TrainLog log = train_sgd(net, data.train.data, opt);
  round_to_float(net);
  (void)quantize_network(net, cfg.quant_bits, cfg.bits_per_device);
  const Deployment d = make_deployment(net, cfg.quant_bits, cfg.bits_per_device);
  const double train_acc = accuracy(d.deployed, data.train.data);
  const double test_acc = accuracy(d.deployed, data.test.data);
  if (cfg.model.has_parent_path()) fs::create_directories(cfg.model.parent_path());
  save_checkpoint(net, {cfg.train_seed, static_cast<std::uint32_t>(cfg.epochs), test_acc}, cfg.model);
  std::printf("weights: %lld\n", static_cast<long long>(net.parameter_count()));
  if (!log.epochs.empty()) std::printf("final training loss: %.6f\n", log.epochs.back().loss);
  std::printf("quantized accuracy: train %.4f test %.4f\n", train_acc, test_acc);
  std::printf("checkpoint: %s\n", cfg.model.string().c_str());
  return 0;
}

int cmd_quantize(const RunConfig& cfg) {
  const Deployment d = load_deployment(cfg);
  const DataSplits data = load_splits(cfg);
  std::string csv = "weight_id,layer,latent,sign,q,levels,scale\n";
  for (Index id = 0; id < d.weight_count(); ++id) {
    const auto& qw = d.quantized.weights[static_cast<std::size_t>(id)];
    std::string levels;
    for (std::size_t i = 0; i < qw.levels.size(); ++i) levels += (i ? " " : "") + std::to_string(qw.levels[i]);
    csv += std::to_string(id) + ',' + std::to_string(d.quantized.layer_of[static_cast<std::size_t>(id)]) + ',' +
           format_real(d.quantized.latent[static_cast<std::size_t>(id)]) + ',' + std::to_string(qw.sign) + ',' +
           std::to_string(qw.q) + ',' + levels + ',' + format_real(qw.scale) + '\n';
  }
  for (std::size_t li = 0; li < d.quantized.layer_range.size(); ++li)
    if (d.quantized.layer_range[li] > 0.0)
      std::printf("layer %zu: range %.6g scale %.6g\n", li, d.quantized.layer_range[li],
                  d.quantized.layer_range[li] / static_cast<double>((1 << cfg.quant_bits) - 1));
  std::printf("quantized accuracy: train %.4f test %.4f\n", accuracy(d.deployed, data.train.data),
              accuracy(d.deployed, data.test.data));
  auto bundle = base_bundle("quantize", cfg);
  bundle.extra_files.emplace_back("quantized.csv", csv);
  write_reports(bundle, cfg.out);
  print_written(cfg.out);
  return 0;
}

int cmd_sensitivity(const RunConfig& cfg) {
  const Deployment d = load_deployment(cfg);
  const DataSplits data = load_splits(cfg);
  const auto calibration = split_batches(data.train.data, cfg.calibration_chunk);
  const SensitivityReport report = strategy_ranking(cfg.strategy, d, calibration, cfg.primary_device(), cfg.seed);
  std::printf("%s ranking of %lld weights on %s sigma=%g\n", report.kind.c_str(), static_cast<long long>(report.size()),
              cfg.primary_device().name.c_str(), cfg.primary_device().sigma);
  for (Index r = 0; r < std::min<Index>(5, report.size()); ++r) {
    const auto& e = report.entries[static_cast<std::size_t>(report.order[static_cast<std::size_t>(r)])];
    std::printf("  rank %lld: weight %lld (layer %lld) metric %.6g\n", static_cast<long long>(r),
                static_cast<long long>(e.weight_id), static_cast<long long>(e.layer), e.metric);
  }
  auto bundle = base_bundle("sensitivity", cfg);
  bundle.sensitivity = &report;
  write_reports(bundle, cfg.out);
  print_written(cfg.out);
  return 0;
}

int cmd_calibrate(const RunConfig& cfg) {
  const DeviceSpec device = cfg.primary_device();
  const CalibrationReport r =
      calibrate_write_verify(device, cfg.quant_bits, cfg.write_verify, cfg.calibration_weights, cfg.seed);
  std::printf("device %s sigma=%g M=%d K=%d tau=%g over %lld weights\n", device.name.c_str(), device.sigma,
              cfg.quant_bits, cfg.bits_per_device, cfg.write_verify.tolerance, static_cast<long long>(r.weights));
  std::printf("mean attempts: %.4f (analytic %.4f)\n", r.mean_attempts, r.expected_attempts);
  std::printf("residual std: %.5f (analytic %.5f)\n", r.residual_std, r.expected_residual_std);
  if (r.unverified) std::printf("unverified weights: %lld\n", static_cast<long long>(r.unverified));
  nlohmann::ordered_json j;
  j["device"] = device.name;
  j["sigma"] = device.sigma;
  j["weights"] = r.weights;
  j["mean_attempts"] = r.mean_attempts;
  j["expected_attempts"] = r.expected_attempts;
  j["residual_std"] = r.residual_std;
  j["expected_residual_std"] = r.expected_residual_std;
  j["unverified"] = r.unverified;
  auto bundle = base_bundle("writeverify-calibrate", cfg);
  bundle.extra_files.emplace_back("calibration.json", j.dump(2) + "\n");
  write_reports(bundle, cfg.out);
  print_written(cfg.out);
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  const Deployment d = load_deployment(cfg);
  const DataSplits data = load_splits(cfg);
  const DriverConfig driver = cfg.driver_config();
  std::vector<Trajectory> trajectories;
  if (cfg.strategy == Strategy::InSitu) {
    trajectories.push_back(run_insitu(d, driver, data.train.data, &data.test.data));
  } else {
    trajectories.push_back(run_selective(d, driver, data.train.data, &data.test.data));
  }
  const Trajectory& t = trajectories.front();
  const auto& last = t.records.back();
  std::printf("%s on %s sigma=%g: %s after %zu records\n", to_string(t.strategy).c_str(), driver.device.name.c_str(),
              driver.device.sigma, to_string(t.termination).c_str(), t.records.size());
  std::printf("baseline %.4f, final train %.4f eval %.4f, NWC %.4f\n", t.baseline_accuracy, last.acc_train,
              last.acc_eval, last.nwc);
  if (!t.diagnostic.empty()) std::printf("diagnostic: %s\n", t.diagnostic.c_str());
  auto bundle = base_bundle("simulate", cfg);
  bundle.trajectories = trajectories_jsonl(trajectories);
  write_reports(bundle, cfg.out);
  print_written(cfg.out);
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const Deployment d = load_deployment(cfg);
  const DataSplits data = load_splits(cfg);
  const ExperimentPlan plan = cfg.experiment_plan();
  const SweepResult result = run_sweep(plan, d, data.train.data, data.test.data);
  for (const auto& c : result.cells) {
    std::printf("%s", c.cell.label().c_str());
    for (const auto& p : c.points) std::printf("  %.1f:%.4f+-%.4f", p.nwc, p.summary.mean, p.summary.std);
    std::printf("%s\n", c.points.front().single_sample ? "  (single sample)" : "");
  }
  auto bundle = base_bundle("sweep", cfg);
  bundle.sweep = &result;
  bundle.trajectories = sweep_trajectories_jsonl(result);
  bundle.failures = result.failures;
  write_reports(bundle, cfg.out);
  print_written(cfg.out);
  if (!result.failures.empty()) {
    for (const auto& f : result.failures)
      std::fprintf(stderr, "invariant %s failed for %s: %s\n", f.invariant.c_str(), f.cell.c_str(), f.detail.c_str());
    return kExitInvariant;
  }
  return 0;
}

int cmd_correlate(const RunConfig& cfg) {
  const Deployment d = load_deployment(cfg);
  if (cfg.weight_subset < 0 && d.weight_count() > cfg.full_study_limit)
    throw ConfigError("model has " + std::to_string(d.weight_count()) + " weights, more than full_study_limit = " +
                      std::to_string(cfg.full_study_limit) + "; set weight_subset to study a sample");
  const DataSplits data = load_splits(cfg);
  const auto calibration = split_batches(data.train.data, cfg.calibration_chunk);
  CorrelationOptions opt;
  opt.samples_per_weight = cfg.samples_per_weight;
  opt.seed = cfg.seed;
  if (cfg.weight_subset > 0) opt.weight_subset = sample_weight_subset(d.weight_count(), cfg.weight_subset, cfg.seed);
  const CorrelationResult r = correlation_study(d, cfg.correlation_device(), calibration, data.test.data, opt);
  auto show = [](const std::optional<double>& v) {
    return v ? format_real(*v) : std::string("undefined (constant column)");
  };
  std::printf("weights studied: %zu, draws per weight: %d, sigma %g\n", r.rows.size(), r.samples_per_weight,
              cfg.correlation_sigma);
  std::printf("pcc_uswim: %s\n", show(r.pcc_uswim).c_str());
  std::printf("pcc_magnitude: %s\n", show(r.pcc_magnitude).c_str());
  if (r.high_variance) std::printf("warning: fewer than 10 draws per weight, drops are high-variance\n");
  nlohmann::ordered_json j;
  j["pcc_uswim"] = r.pcc_uswim ? nlohmann::ordered_json(*r.pcc_uswim) : nlohmann::ordered_json(nullptr);
  j["pcc_magnitude"] = r.pcc_magnitude ? nlohmann::ordered_json(*r.pcc_magnitude) : nlohmann::ordered_json(nullptr);
  j["baseline_accuracy"] = r.baseline_accuracy;
  j["samples_per_weight"] = r.samples_per_weight;
  j["sigma"] = cfg.correlation_sigma;
  j["high_variance"] = r.high_variance;
  auto bundle = base_bundle("correlate", cfg);
  bundle.extra_files.emplace_back("correlation.csv", correlation_csv(r));
  bundle.extra_files.emplace_back("correlation.json", j.dump(2) + "\n");
  write_reports(bundle, cfg.out);
  print_written(cfg.out);
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const auto bad = verify_manifest(cfg.out);
  const auto csv = read_file(cfg.out / "sweep.csv");
  std::cout << std::string(csv.begin(), csv.end());
  if (!bad.empty()) {
    for (const auto& f : bad) std::fprintf(stderr, "manifest mismatch: %s\n", f.c_str());
    return kExitInvariant;
  }
  std::printf("manifest verified\n");
  return 0;
}

std::string key_listing() {
  std::ostringstream os;
  os << "Config keys (file: one `key = value` per line, `#` comments):\n";
  for (const auto& k : config_keys())
    os << "  " << k.name << " = " << (k.default_value.empty() ? "\"\"" : k.default_value) << "\n      " << k.help
       << "\n";
  os << "\nExit codes: 0 success, 2 configuration or input error, 3 invariant failure.\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective write-verify simulator for DNN weights on noisy NVM devices"};
  app.footer(key_listing());
  app.require_subcommand(1, 1);

  CommonOptions opts;
  struct Command {
    std::string name;
    std::string help;
    int (*run)(const RunConfig&);
    bool seed_is_training = false;
  };
  const std::vector<Command> commands{
      {"train", "train the configured model and save a checkpoint", cmd_train, true},
      {"quantize", "quantize a checkpoint and report per-layer scales", cmd_quantize},
      {"sensitivity", "rank weights with the configured strategy", cmd_sensitivity},
      {"writeverify-calibrate", "simulate write-verify on synthetic weights", cmd_calibrate},
      {"simulate", "run one selective write-verify or in-situ trajectory", cmd_simulate},
      {"sweep", "Monte Carlo NWC sweep over strategies and devices", cmd_sweep},
      {"correlate", "per-weight perturbation study against the sensitivity metric", cmd_correlate},
      {"report", "verify an output directory's manifest and print its sweep table", cmd_report},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opts.config, "config file")->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "override a config key (KEY=VALUE, repeatable)");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--seed", opts.seed, c.seed_is_training ? "training seed" : "base seed");
    sub->add_option("--workers", opts.workers, "worker threads");
    if (c.name == "train") sub->add_option("--epochs", opts.epochs, "training epochs");
    sub->footer(key_listing());
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(resolve_config(opts, cmd->seed_is_training));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "input/output error: %s\n", e.what());
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "argument error: %s\n", e.what());
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return kExitInvariant;
  }
  return kExitConfig;
}
