#include "uswim/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool within_drop(double baseline, double acc, double max_drop_pp) {
  return (baseline - acc) * 100.0 <= max_drop_pp;
}

double eval_accuracy(const Network<double>& net, const Batch<double>* eval) {
  if (!eval || eval->size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return accuracy(net, *eval);
}

Index batch_width(double granularity, Index n) {
  return std::max<Index>(1, static_cast<Index>(std::ceil(granularity * static_cast<double>(n) - 1e-9)));
}

/// Sample a minibatch of `size` examples without replacement.
Batch<double> draw_minibatch(const Batch<double>& data, Index size, CounterRng& rng) {
  const Index n = data.size();
  size = std::min(size, n);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < size; ++i) {
    const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  Batch<double> out;
  out.inputs.resize(data.inputs.rows(), size);
  if (!data.labels.empty()) out.labels.resize(static_cast<std::size_t>(size));
  if (data.targets.size()) out.targets.resize(data.targets.rows(), size);
  for (Index i = 0; i < size; ++i) {
    const Index src = idx[static_cast<std::size_t>(i)];
    out.inputs.col(i) = data.inputs.col(src);
    if (!data.labels.empty()) out.labels[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(src)];
    if (data.targets.size()) out.targets.col(i) = data.targets.col(src);
  }
  return out;
}

/// Device-side state of an on-chip retraining run.
class InSituRun {
 public:
  InSituRun(const Deployment& d, const DeviceSpec& device, const InSituConfig& cfg, std::uint64_t run_seed)
      : d_(d), device_(device), cfg_(cfg), state_(d.quantized, run_seed),
        latent_(d.quantized.latent), rng_(run_seed, 0x1A5170) {
    program_all_unverified(state_, device_);
  }

  const ProgrammedState& state() const { return state_; }
  Network<double> realized() const { return realized_network(state_, d_.net); }

  /// One SGD step on the noisy realized weights followed by re-programming
  /// every weight. Returns false if the loss became non-finite.
  bool step(const Batch<double>& train) {
    const Batch<double> mb = draw_minibatch(train, cfg_.batch_size, rng_);
    const auto lg = loss_and_gradient(realized(), mb);
    if (!std::isfinite(lg.loss)) return false;
    const Vector<double> g = lg.gradient.flatten();
    const auto& q = d_.quantized;
    for (Index id = 0; id < state_.size(); ++id) {
      auto& w = latent_[static_cast<std::size_t>(id)];
      w -= cfg_.learning_rate * g[id];
      if (!std::isfinite(w)) return false;
      const double range = q.layer_range[static_cast<std::size_t>(q.layer_of[static_cast<std::size_t>(id)])];
      w = std::clamp(w, -range, range);
      state_.retarget(id, quantize_weight(w, range, q.quant_bits, q.bits_per_device));
      program_once(state_, id, device_);
    }
    return true;
  }

 private:
  const Deployment& d_;
  const DeviceSpec& device_;
  const InSituConfig& cfg_;
  ProgrammedState state_;
  std::vector<double> latent_;
  CounterRng rng_;
};

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::USWIM: return "USWIM";
    case Strategy::SWIM: return "SWIM";
    case Strategy::Magnitude: return "Magnitude";
    case Strategy::Random: return "Random";
    case Strategy::InSitu: return "InSitu";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  const std::string key = lower(name);
  if (key == "uswim") return Strategy::USWIM;
  if (key == "swim") return Strategy::SWIM;
  if (key == "magnitude") return Strategy::Magnitude;
  if (key == "random") return Strategy::Random;
  if (key == "insitu" || key == "in-situ") return Strategy::InSitu;
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (choices: USWIM, SWIM, Magnitude, Random, InSitu)");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::StoppedByDrop: return "stopped_by_drop";
    case Termination::Exhausted: return "exhausted";
    case Termination::Diverged: return "diverged";
  }
  return "?";
}

void DriverConfig::validate() const {
  if (!(granularity > 0.0 && granularity <= 1.0)) throw ConfigError("p must be in (0, 1]");
  if (!(max_accuracy_drop >= 0.0)) throw ConfigError("max_accuracy_drop must be >= 0");
  device.validate();
  write_verify.validate();
  if (!(insitu.learning_rate > 0.0)) throw ConfigError("insitu_lr must be > 0");
  if (insitu.batch_size < 1) throw ConfigError("insitu_batch must be >= 1");
  if (insitu.max_iterations < 0) throw ConfigError("insitu_iterations must be >= 0");
}

Deployment make_deployment(Network<double> net, int quant_bits, int bits_per_device) {
  Deployment d;
  d.quantized = quantize_network(net, quant_bits, bits_per_device);
  d.deployed = dequantized_network(net, d.quantized);
  d.net = std::move(net);
  return d;
}

double nwc(double cycles, double denominator) {
  if (!(denominator > 0.0)) throw ConfigError("NWC denominator must be > 0");
  return cycles / denominator;
}

std::vector<Batch<double>> split_batches(const Batch<double>& data, Index chunk) {
  if (chunk < 1) throw ArgumentError("chunk must be >= 1");
  std::vector<Batch<double>> out;
  for (Index b = 0; b < data.size(); b += chunk) out.push_back(data.slice(b, std::min(chunk, data.size() - b)));
  return out;
}

SensitivityReport strategy_ranking(Strategy s, const Deployment& d, std::span<const Batch<double>> calibration,
                                   const DeviceSpec& device, std::uint64_t seed) {
  switch (s) {
    case Strategy::USWIM: return uswim_metric(d.net, d.quantized, calibration, device);
    case Strategy::SWIM: return swim_metric(d.net, d.quantized, calibration);
    case Strategy::Magnitude: return magnitude_metric(d.quantized);
    case Strategy::Random: return random_order(d.weight_count(), seed);
    case Strategy::InSitu: break;
  }
  throw ConfigError("strategy " + to_string(s) + " has no weight ranking");
}

Trajectory run_selective(const Deployment& d, const DriverConfig& cfg, const Batch<double>& train,
                         const Batch<double>* eval, const SensitivityReport* ranking) {
  cfg.validate();
  if (cfg.strategy == Strategy::InSitu) throw ConfigError("run_selective needs a selective strategy");
  const Index n = d.weight_count();

  Trajectory t;
  t.strategy = cfg.strategy;
  t.run = cfg.seed;
  t.baseline_accuracy = accuracy(d.deployed, train);
  t.denominator = full_write_verify_cycles(d.quantized, cfg.device, cfg.write_verify);

  SensitivityReport own;
  if (!ranking) {
    const auto calibration = split_batches(train, 256);
    own = strategy_ranking(cfg.strategy, d, calibration, cfg.device, cfg.seed);
    ranking = &own;
  }
  if (ranking->size() != n) throw ArgumentError("ranking covers a different number of weights");

  ProgrammedState state(d.quantized, cfg.seed);
  program_all_unverified(state, cfg.device);
  const std::uint64_t bulk = state.total_cycles();
  auto record = [&](Index batch, Index verified) {
    const Network<double> realized = realized_network(state, d.net);
    TrajectoryRecord r;
    r.batch = batch;
    r.verified = verified;
    r.cycles = state.total_cycles();
    r.nwc = nwc(static_cast<double>(state.total_cycles() - bulk), t.denominator);
    r.acc_train = accuracy(realized, train);
    r.acc_eval = eval_accuracy(realized, eval);
    t.records.push_back(r);
    return r.acc_train;
  };
  record(0, 0);

  const Index width = batch_width(cfg.granularity, n);
  t.termination = Termination::Exhausted;
  Index done = 0, batch = 0;
  while (done < n) {
    const Index count = std::min(width, n - done);
    write_verify(state, std::span<const Index>(ranking->order).subspan(static_cast<std::size_t>(done), static_cast<std::size_t>(count)),
                 cfg.write_verify, cfg.device);
    done += count;
    const double acc = record(++batch, done);
    if (within_drop(t.baseline_accuracy, acc, cfg.max_accuracy_drop)) {
      t.termination = Termination::StoppedByDrop;
      break;
    }
  }
  return t;
}

Trajectory run_insitu(const Deployment& d, const DriverConfig& cfg, const Batch<double>& train,
                      const Batch<double>* eval) {
  cfg.validate();
  Trajectory t;
  t.strategy = Strategy::InSitu;
  t.run = cfg.seed;
  t.baseline_accuracy = accuracy(d.deployed, train);
  t.denominator = full_write_verify_cycles(d.quantized, cfg.device, cfg.write_verify);

  InSituRun run(d, cfg.device, cfg.insitu, cfg.seed);
  const std::uint64_t bulk = run.state().total_cycles();
  auto record = [&](Index iteration) {
    const Network<double> realized = run.realized();
    TrajectoryRecord r;
    r.batch = iteration;
    r.verified = 0;
    r.cycles = run.state().total_cycles();
    r.nwc = nwc(static_cast<double>(r.cycles - bulk), t.denominator);
    r.acc_train = accuracy(realized, train);
    r.acc_eval = eval_accuracy(realized, eval);
    t.records.push_back(r);
    return r.acc_train;
  };
  record(0);
  t.termination = Termination::Exhausted;
  for (int it = 1; it <= cfg.insitu.max_iterations; ++it) {
    if (!run.step(train)) {
      t.termination = Termination::Diverged;
      t.diagnostic = "non-finite loss or weight at iteration " + std::to_string(it);
      break;
    }
    if (within_drop(t.baseline_accuracy, record(it), cfg.max_accuracy_drop)) {
      t.termination = Termination::StoppedByDrop;
      break;
    }
  }
  return t;
}

BudgetedRun run_selective_budgeted(const Deployment& d, const SensitivityReport& ranking,
                                   const DeviceSpec& device, const WriteVerifyConfig& wv,
                                   double granularity, std::span<const double> nwc_budgets,
                                   double denominator, const Batch<double>& eval,
                                   std::uint64_t run_seed) {
  if (!std::is_sorted(nwc_budgets.begin(), nwc_budgets.end()))
    throw ConfigError("NWC grid must be sorted ascending");
  const Index n = d.weight_count();
  if (ranking.size() != n) throw ArgumentError("ranking covers a different number of weights");
  const Index width = batch_width(granularity, n);

  BudgetedRun out;
  ProgrammedState state(d.quantized, run_seed);
  program_all_unverified(state, device);
  const std::uint64_t bulk = state.total_cycles();

  // A batch that overshoots a budget is rolled back for that budget's
  // evaluation: it sees the state at the previous batch boundary.
  ProgrammedState boundary = state;
  Index boundary_verified = 0;
  auto evaluate = [&](const ProgrammedState& s, Index verified) {
    out.accuracy.push_back(accuracy(realized_network(s, d.net), eval));
    out.cycles.push_back(s.total_cycles());
    out.nwc.push_back(nwc(static_cast<double>(s.total_cycles() - bulk), denominator));
    out.verified.push_back(verified);
  };
  Index done = 0;
  std::size_t next = 0;
  while (next < nwc_budgets.size()) {
    if (done >= n) {
      evaluate(state, done);
      ++next;
      continue;
    }
    const Index count = std::min(width, n - done);
    write_verify(state,
                 std::span<const Index>(ranking.order)
                     .subspan(static_cast<std::size_t>(done), static_cast<std::size_t>(count)),
                 wv, device);
    const double spent = static_cast<double>(state.total_cycles() - bulk);
    while (next < nwc_budgets.size() && spent > nwc_budgets[next] * denominator + 1e-9) {
      evaluate(boundary, boundary_verified);
      ++next;
    }
    done += count;
    boundary = state;
    boundary_verified = done;
  }
  return out;
}

BudgetedRun run_insitu_budgeted(const Deployment& d, const DeviceSpec& device, const InSituConfig& cfg,
                                std::span<const double> nwc_budgets, double denominator,
                                const Batch<double>& train, const Batch<double>& eval,
                                std::uint64_t run_seed) {
  if (!std::is_sorted(nwc_budgets.begin(), nwc_budgets.end()))
    throw ConfigError("NWC grid must be sorted ascending");
  const Index n = d.weight_count();
  BudgetedRun out;
  InSituRun run(d, device, cfg, run_seed);
  const std::uint64_t bulk = run.state().total_cycles();
  Index iterations = 0;
  for (const double budget : nwc_budgets) {
    const auto target = static_cast<Index>(std::floor(budget * denominator / static_cast<double>(n) + 1e-9));
    while (!out.failed && iterations < target) {
      if (!run.step(train)) {
        out.failed = true;
        out.diagnostic = "in-situ training diverged at iteration " + std::to_string(iterations + 1);
        break;
      }
      ++iterations;
    }
    if (out.failed) {
      out.accuracy.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      out.accuracy.push_back(accuracy(run.realized(), eval));
    }
    out.cycles.push_back(run.state().total_cycles());
    out.nwc.push_back(nwc(static_cast<double>(run.state().total_cycles() - bulk), denominator));
    out.verified.push_back(iterations);
  }
  return out;
}

}  // namespace uswim
