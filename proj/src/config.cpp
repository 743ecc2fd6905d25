#include "uswim/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "uswim/checkpoint.hpp"
#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError("key '" + key + "': " + why);
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    bad(key, "expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, "expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

void require_range(const std::string& key, bool ok, const std::string& constraint) {
  if (!ok) bad(key, "must be " + constraint);
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  const fs::path p(v);
  return (v.empty() || p.is_absolute() || base.empty() || base == ".") ? p : base / p;
}

std::vector<double> real_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(to_real(key, item));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&, const fs::path&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeyEntry {
  ConfigKey meta;
  Setter set;
  Getter get;
};

const std::vector<KeyEntry>& entries() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    auto add = [&](std::string name, std::string help, Setter set, Getter get) {
      const RunConfig defaults;
      std::string def = get(defaults);
      t.push_back({{std::move(name), std::move(def), std::move(help)}, std::move(set), std::move(get)});
    };

    add("model", "checkpoint path written by train and read by every other command",
        [](RunConfig& c, const std::string&, const std::string& v, const fs::path& b) { c.model = resolve(b, v); },
        [](const RunConfig& c) { return c.model.string(); });
    add("dataset", "moons (bundled synthetic) or mnist (IDX files in data_dir)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          require_range(k, v == "moons" || v == "mnist", "one of moons, mnist");
          c.dataset = v;
        },
        [](const RunConfig& c) { return c.dataset; });
    add("data_dir", "directory holding train-/test- IDX image and label files",
        [](RunConfig& c, const std::string&, const std::string& v, const fs::path& b) { c.data_dir = resolve(b, v); },
        [](const RunConfig& c) { return c.data_dir.string(); });
    add("moons_samples", "two-moons training examples (the test split has half as many)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.moons_samples = to_int(k, v);
          require_range(k, c.moons_samples >= 4, ">= 4");
        },
        [](const RunConfig& c) { return std::to_string(c.moons_samples); });
    add("moons_noise", "two-moons jitter std",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.moons_noise = to_real(k, v);
          require_range(k, c.moons_noise >= 0.0, ">= 0");
        },
        [](const RunConfig& c) { return fmt(c.moons_noise); });
    add("architecture", "mlp (pooled input, one hidden layer) or lenet (pooled input, 5x5 conv, max-pool, dense)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          require_range(k, v == "mlp" || v == "lenet", "one of mlp, lenet");
          c.architecture = v;
        },
        [](const RunConfig& c) { return c.architecture; });
    add("channels", "convolution channels of the lenet architecture",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.channels = to_int(k, v);
          require_range(k, c.channels >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.channels); });
    add("hidden", "hidden units of the mlp architecture",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.hidden = to_int(k, v);
          require_range(k, c.hidden >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.hidden); });
    add("epochs", "training epochs (0 saves the initialized weights)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.epochs = static_cast<int>(to_int(k, v));
          require_range(k, c.epochs >= 0, ">= 0");
        },
        [](const RunConfig& c) { return std::to_string(c.epochs); });
    add("learning_rate", "training SGD step size",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.learning_rate = to_real(k, v);
          require_range(k, c.learning_rate >= 0.0, ">= 0");
        },
        [](const RunConfig& c) { return fmt(c.learning_rate); });
    add("batch_size", "training minibatch size",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.batch_size = to_int(k, v);
          require_range(k, c.batch_size >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.batch_size); });
    add("quant_aware", "train on M-bit rounded weights (straight-through updates)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.quant_aware = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.quant_aware ? "true" : "false"); });
    add("train_seed", "weight initialization and shuffling seed",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.train_seed = to_uint(k, v); },
        [](const RunConfig& c) { return std::to_string(c.train_seed); });
    add("M", "weight magnitude bits (sign stored separately)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.quant_bits = static_cast<int>(to_int(k, v));
          require_range(k, c.quant_bits >= 2 && c.quant_bits <= 16, "in [2, 16]");
        },
        [](const RunConfig& c) { return std::to_string(c.quant_bits); });
    add("K", "bits per device; M must be a multiple of K",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.bits_per_device = static_cast<int>(to_int(k, v));
          require_range(k, c.bits_per_device >= 1 && c.bits_per_device <= 8, "in [1, 8]");
        },
        [](const RunConfig& c) { return std::to_string(c.bits_per_device); });
    add("device", "comma list of devices: Uniform, F2, R4, F6, or custom names with dm_table",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.devices = split_list(v);
          require_range(k, !c.devices.empty(), "a non-empty list");
        },
        [](const RunConfig& c) { return join(c.devices, [](const std::string& s) { return s; }); });
    add("sigma", "comma list of base device noise std values",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.sigmas = real_list(k, v);
          require_range(k, !c.sigmas.empty(), "a non-empty list");
          for (double s : c.sigmas) require_range(k, s >= 0.0 && std::isfinite(s), "finite and >= 0");
        },
        [](const RunConfig& c) { return join(c.sigmas, fmt); });
    add("dm_table", "inline device: per-level noise multipliers (2^K entries); empty uses built-ins",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.dm_table = real_list(k, v);
          for (double d : c.dm_table) require_range(k, d > 0.0, "all entries > 0");
        },
        [](const RunConfig& c) { return join(c.dm_table, fmt); });
    add("beta", "inline device: noise scale factor",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.beta = to_real(k, v);
          require_range(k, c.beta > 0.0, "> 0");
        },
        [](const RunConfig& c) { return fmt(c.beta); });
    add("tau", "write-verify tolerance in integer-weight units",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.write_verify.tolerance = to_real(k, v);
          require_range(k, c.write_verify.tolerance > 0.0, "> 0");
        },
        [](const RunConfig& c) { return fmt(c.write_verify.tolerance); });
    add("max_attempts", "write-verify attempts before a weight is left unverified",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.write_verify.max_attempts = static_cast<int>(to_int(k, v));
          require_range(k, c.write_verify.max_attempts >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.write_verify.max_attempts); });
    add("p", "fraction of all weights write-verified per batch",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.granularity = to_real(k, v);
          require_range(k, c.granularity > 0.0 && c.granularity <= 1.0, "in (0, 1]");
        },
        [](const RunConfig& c) { return fmt(c.granularity); });
    add("delta_a", "tolerated accuracy drop in percentage points (simulate)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.max_accuracy_drop = to_real(k, v);
          require_range(k, c.max_accuracy_drop >= 0.0, ">= 0");
        },
        [](const RunConfig& c) { return fmt(c.max_accuracy_drop); });
    add("strategy", "strategy for simulate: USWIM, SWIM, Magnitude, Random or InSitu",
        [](RunConfig& c, const std::string&, const std::string& v, const fs::path&) { c.strategy = parse_strategy(v); },
        [](const RunConfig& c) { return to_string(c.strategy); });
    add("strategies", "comma list of strategies for sweep",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.strategies.clear();
          for (const auto& s : split_list(v)) c.strategies.push_back(parse_strategy(s));
          require_range(k, !c.strategies.empty(), "a non-empty list");
        },
        [](const RunConfig& c) { return join(c.strategies, [](Strategy s) { return to_string(s); }); });
    add("nwc_grid", "ascending NWC budgets evaluated by sweep",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.nwc_grid = real_list(k, v);
          require_range(k, !c.nwc_grid.empty(), "a non-empty list");
          for (double g : c.nwc_grid) require_range(k, g >= 0.0 && std::isfinite(g), "finite values >= 0");
          require_range(k, std::is_sorted(c.nwc_grid.begin(), c.nwc_grid.end()), "sorted ascending");
        },
        [](const RunConfig& c) { return join(c.nwc_grid, fmt); });
    add("runs", "Monte Carlo runs per sweep cell",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.runs = static_cast<int>(to_int(k, v));
          require_range(k, c.runs >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.runs); });
    add("seed", "base seed of all device noise and random rankings",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.seed = to_uint(k, v); },
        [](const RunConfig& c) { return std::to_string(c.seed); });
    add("workers", "worker threads for sweep (results do not depend on it)",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.workers = static_cast<int>(to_int(k, v));
          require_range(k, c.workers >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.workers); });
    add("out", "output directory for reports",
        [](RunConfig& c, const std::string&, const std::string& v, const fs::path& b) { c.out = resolve(b, v); },
        [](const RunConfig& c) { return c.out.string(); });
    add("insitu_lr", "in-situ SGD step size",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.insitu.learning_rate = to_real(k, v);
          require_range(k, c.insitu.learning_rate > 0.0, "> 0");
        },
        [](const RunConfig& c) { return fmt(c.insitu.learning_rate); });
    add("insitu_batch", "in-situ minibatch size",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.insitu.batch_size = to_int(k, v);
          require_range(k, c.insitu.batch_size >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.insitu.batch_size); });
    add("insitu_iterations", "iteration cap of a simulate run with strategy InSitu",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.insitu.max_iterations = static_cast<int>(to_int(k, v));
          require_range(k, c.insitu.max_iterations >= 0, ">= 0");
        },
        [](const RunConfig& c) { return std::to_string(c.insitu.max_iterations); });
    add("calibration_chunk", "examples per Hessian calibration batch",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.calibration_chunk = to_int(k, v);
          require_range(k, c.calibration_chunk >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.calibration_chunk); });
    add("samples_per_weight", "noise draws per weight in correlate",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.samples_per_weight = static_cast<int>(to_int(k, v));
          require_range(k, c.samples_per_weight >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.samples_per_weight); });
    add("correlation_sigma", "noise level of the first device in correlate; single-weight drops vanish at small sigma",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.correlation_sigma = to_real(k, v);
          require_range(k, c.correlation_sigma > 0.0 && std::isfinite(c.correlation_sigma), "finite and > 0");
        },
        [](const RunConfig& c) { return fmt(c.correlation_sigma); });
    add("weight_subset", "weights sampled by correlate; 'all' studies every weight",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          if (v == "all") {
            c.weight_subset = -1;
            return;
          }
          c.weight_subset = to_int(k, v);
          require_range(k, c.weight_subset >= 1, ">= 1 or 'all'");
        },
        [](const RunConfig& c) { return c.weight_subset < 0 ? std::string("all") : std::to_string(c.weight_subset); });
    add("full_study_limit", "largest model correlate studies without weight_subset",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.full_study_limit = to_int(k, v);
          require_range(k, c.full_study_limit >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.full_study_limit); });
    add("calibration_weights", "synthetic weights simulated by writeverify-calibrate",
        [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) {
          c.calibration_weights = to_int(k, v);
          require_range(k, c.calibration_weights >= 1, ">= 1");
        },
        [](const RunConfig& c) { return std::to_string(c.calibration_weights); });
    return t;
  }();
  return table;
}

const KeyEntry& find_key(const std::string& key) {
  for (const auto& e : entries())
    if (e.meta.name == key) return e;
  throw ConfigError("unknown key '" + key + "'");
}

DeviceSpec make_device(const RunConfig& cfg, const std::string& name, double sigma) {
  DeviceSpec spec;
  if (cfg.dm_table.empty()) {
    spec = builtin_device(name, sigma);
  } else {
    spec.name = name;
    spec.sigma = sigma;
    spec.beta = cfg.beta;
    spec.dm_table = cfg.dm_table;
  }
  spec.bits_per_device = cfg.bits_per_device;
  spec.validate();
  return spec;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.meta);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const fs::path& base_dir) {
  find_key(key).set(cfg, key, value, base_dir);
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' repeated");
    apply_setting(cfg, key, value, base_dir);
  }
  // defaults are relative paths too and must land next to the config file
  if (!seen.contains("model")) cfg.model = resolve(base_dir, cfg.model.string());
  if (!seen.contains("out")) cfg.out = resolve(base_dir, cfg.out.string());
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

void validate(const RunConfig& cfg) {
  if (cfg.quant_bits % cfg.bits_per_device != 0)
    throw ConfigError("key 'M': must be a multiple of K (M = " + std::to_string(cfg.quant_bits) +
                      ", K = " + std::to_string(cfg.bits_per_device) + ")");
  if (!cfg.dm_table.empty() && static_cast<int>(cfg.dm_table.size()) != (1 << cfg.bits_per_device))
    throw ConfigError("key 'dm_table': needs 2^K = " + std::to_string(1 << cfg.bits_per_device) + " entries");
  if (cfg.dm_table.empty() && cfg.bits_per_device != 2)
    throw ConfigError("key 'K': built-in devices have 4 levels (K = 2); set dm_table for other K");
  (void)cfg.device_specs();
  if (cfg.dataset == "mnist") {
    if (cfg.data_dir.empty()) throw ConfigError("key 'data_dir': required when dataset = mnist");
    if (!fs::is_directory(cfg.data_dir))
      throw ConfigError("key 'data_dir': directory " + cfg.data_dir.string() + " does not exist");
  }
}

std::vector<DeviceSpec> RunConfig::device_specs() const {
  std::vector<DeviceSpec> out;
  for (const auto& name : devices)
    for (double s : sigmas) out.push_back(make_device(*this, name, s));
  return out;
}

DeviceSpec RunConfig::primary_device() const { return make_device(*this, devices.front(), sigmas.front()); }

DeviceSpec RunConfig::correlation_device() const { return make_device(*this, devices.front(), correlation_sigma); }

DriverConfig RunConfig::driver_config() const {
  DriverConfig d;
  d.granularity = granularity;
  d.max_accuracy_drop = max_accuracy_drop;
  d.strategy = strategy;
  d.device = primary_device();
  d.write_verify = write_verify;
  d.seed = seed;
  d.insitu = insitu;
  return d;
}

ExperimentPlan RunConfig::experiment_plan() const {
  ExperimentPlan plan;
  for (const auto& device : device_specs())
    for (Strategy s : strategies) plan.cells.push_back({s, device});
  plan.nwc_grid = nwc_grid;
  plan.runs = runs;
  plan.base_seed = seed;
  plan.workers = workers;
  plan.granularity = granularity;
  plan.write_verify = write_verify;
  plan.insitu = insitu;
  plan.calibration_chunk = calibration_chunk;
  return plan;
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.meta.name + " = " + e.get(cfg) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = canonical_text(cfg);
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DataSplits load_splits(const RunConfig& cfg) {
  DataSplits s;
  if (cfg.dataset == "moons") {
    s.train = two_moons(cfg.moons_samples, cfg.moons_noise, cfg.train_seed);
    s.test = two_moons(std::max<Index>(2, cfg.moons_samples / 2), cfg.moons_noise, combine_seed(cfg.train_seed, 0x7E57));
  } else {
    if (cfg.data_dir.empty()) throw ConfigError("key 'data_dir': required when dataset = mnist");
    s.train = load_mnist_idx(cfg.data_dir / "train-images-idx3-ubyte", cfg.data_dir / "train-labels-idx1-ubyte");
    s.test = load_mnist_idx(cfg.data_dir / "test-images-idx3-ubyte", cfg.data_dir / "test-labels-idx1-ubyte");
  }
  s.train.split = "train";
  s.test.split = "test";
  return s;
}

Network<double> build_model(const RunConfig& cfg, const Shape3& input, int classes) {
  Network<double> net(input, LossKind::SoftmaxCrossEntropy, cfg.quant_bits);
  const bool image = input.height >= 8 && input.width >= 8;
  if (cfg.architecture == "lenet") {
    if (!image) throw ConfigError("key 'architecture': lenet needs image input (dataset = mnist)");
    net.add(avg_pool(2)).add(conv2d(cfg.channels, 5, 1, 0)).add(relu()).add(max_pool(2)).add(flatten());
    net.add(dense(classes));
    return net;
  }
  if (image) net.add(avg_pool(4)).add(flatten());
  net.add(dense(cfg.hidden)).add(relu()).add(dense(classes));
  return net;
}

}  // namespace uswim
