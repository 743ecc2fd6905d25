#include "uswim/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {

namespace {

constexpr double kBudgetSlack = 1e-9;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_write_verify(Strategy s) { return s != Strategy::InSitu; }

/// Fraction of columns whose largest logit matches the label.
double logits_accuracy(const Matrix<double>& logits, const std::vector<int>& labels) {
  Index hits = 0;
  for (Index b = 0; b < logits.cols(); ++b) {
    Index best = 0;
    logits.col(b).maxCoeff(&best);
    hits += best == labels[static_cast<std::size_t>(b)];
  }
  return static_cast<double>(hits) / static_cast<double>(logits.cols());
}

}  // namespace

std::string SweepCell::label() const {
  std::ostringstream os;
  os << to_string(strategy) << '/' << device.name << '/' << device.sigma;
  return os.str();
}

void ExperimentPlan::validate() const {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (nwc_grid.empty()) throw ConfigError("nwc_grid must not be empty");
  for (double g : nwc_grid)
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("nwc_grid values must be finite and >= 0");
  if (!std::is_sorted(nwc_grid.begin(), nwc_grid.end())) throw ConfigError("nwc_grid must be sorted ascending");
  if (!(granularity > 0.0 && granularity <= 1.0)) throw ConfigError("p must be in (0, 1]");
  if (calibration_chunk < 1) throw ConfigError("calibration chunk must be >= 1");
  write_verify.validate();
  for (const auto& c : cells) c.device.validate();
  if (!(insitu.learning_rate > 0.0)) throw ConfigError("insitu_lr must be > 0");
  if (insitu.batch_size < 1) throw ConfigError("insitu_batch must be >= 1");
}

const CellResult* SweepResult::find(Strategy s, const std::string& device, double sigma) const {
  for (const auto& c : cells)
    if (c.cell.strategy == s && c.cell.device.name == device && c.cell.device.sigma == sigma) return &c;
  return nullptr;
}

std::uint64_t sweep_run_seed(std::uint64_t base_seed, const DeviceSpec& device, int run) {
  const std::uint64_t cell = fnv1a(device.name) ^ mix64(std::bit_cast<std::uint64_t>(device.sigma));
  return combine_seed(combine_seed(base_seed, cell), static_cast<std::uint64_t>(run));
}

SweepResult run_sweep(const ExperimentPlan& plan, const Deployment& d, const Batch<double>& train,
                      const Batch<double>& eval) {
  plan.validate();
  if (eval.size() == 0) throw ConfigError("evaluation set is empty");
  const auto calibration = split_batches(train, plan.calibration_chunk);
  const std::size_t grid = plan.nwc_grid.size();
  const auto runs = static_cast<std::size_t>(plan.runs);

  SweepResult result;
  result.nwc_grid = plan.nwc_grid;
  result.base_seed = plan.base_seed;
  result.runs = plan.runs;
  result.granularity = plan.granularity;

  std::vector<std::optional<SensitivityReport>> rankings(plan.cells.size());
  for (std::size_t c = 0; c < plan.cells.size(); ++c) {
    const auto& cell = plan.cells[c];
    CellResult cr;
    cr.cell = cell;
    cr.denominator = full_write_verify_cycles(d.quantized, cell.device, plan.write_verify);
    cr.accuracy.assign(runs, std::vector<double>(grid, std::numeric_limits<double>::quiet_NaN()));
    cr.realized_nwc.assign(runs, std::vector<double>(grid, std::numeric_limits<double>::quiet_NaN()));
    cr.cycles.assign(runs, std::vector<std::uint64_t>(grid, 0));
    cr.verified.assign(runs, std::vector<Index>(grid, 0));
    cr.run_errors.assign(runs, "");
    for (int r = 0; r < plan.runs; ++r) cr.run_seeds.push_back(sweep_run_seed(plan.base_seed, cell.device, r));
    if (cell.strategy != Strategy::InSitu && cell.strategy != Strategy::Random)
      rankings[c] = strategy_ranking(cell.strategy, d, calibration, cell.device, plan.base_seed);
    result.cells.push_back(std::move(cr));
  }

  const std::size_t tasks = plan.cells.size() * runs;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr config_error;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t c = t / runs, r = t % runs;
      const auto& cell = plan.cells[c];
      auto& cr = result.cells[c];
      const std::uint64_t seed = cr.run_seeds[r];
      try {
        BudgetedRun br;
        if (cell.strategy == Strategy::InSitu) {
          br = run_insitu_budgeted(d, cell.device, plan.insitu, plan.nwc_grid, cr.denominator, train, eval, seed);
        } else if (cell.strategy == Strategy::Random) {
          const auto ranking = random_order(d.weight_count(), combine_seed(seed, 0x52414E44ULL));
          br = run_selective_budgeted(d, ranking, cell.device, plan.write_verify, plan.granularity,
                                      plan.nwc_grid, cr.denominator, eval, seed);
        } else {
          br = run_selective_budgeted(d, *rankings[c], cell.device, plan.write_verify, plan.granularity,
                                      plan.nwc_grid, cr.denominator, eval, seed);
        }
        if (br.failed) {
          cr.run_errors[r] = br.diagnostic;
        } else {
          cr.accuracy[r] = br.accuracy;
        }
        cr.realized_nwc[r] = br.nwc;
        cr.cycles[r] = br.cycles;
        cr.verified[r] = br.verified;
      } catch (const ConfigError&) {
        std::lock_guard lock(error_mutex);
        if (!config_error) config_error = std::current_exception();
      } catch (const std::exception& e) {
        cr.run_errors[r] = e.what();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(plan.workers), std::max<std::size_t>(tasks, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (config_error) std::rethrow_exception(config_error);

  for (auto& cr : result.cells) {
    for (std::size_t j = 0; j < grid; ++j) {
      SweepPoint p;
      p.nwc = plan.nwc_grid[j];
      std::vector<double> ok;
      for (std::size_t r = 0; r < runs; ++r) {
        if (cr.run_errors[r].empty() && std::isfinite(cr.accuracy[r][j])) ok.push_back(cr.accuracy[r][j]);
        else ++p.failed;
      }
      if (!ok.empty()) p.summary = aggregate(ok);
      p.single_sample = ok.size() == 1;
      cr.points.push_back(p);
    }
  }
  result.failures = check_sweep_invariants(result);
  return result;
}

std::vector<InvariantFailure> check_sweep_invariants(const SweepResult& result) {
  std::vector<InvariantFailure> out;
  const std::size_t grid = result.nwc_grid.size();
  for (const auto& cr : result.cells) {
    const std::string label = cr.cell.label();
    std::vector<std::size_t> good;
    for (std::size_t r = 0; r < cr.accuracy.size(); ++r)
      if (cr.run_errors[r].empty()) good.push_back(r);

    for (std::size_t j = 0; j < grid; ++j) {
      if (cr.points[j].summary.std < 0.0)
        out.push_back({label, "std_nonnegative", "negative std at NWC " + std::to_string(result.nwc_grid[j])});
      for (std::size_t r : good)
        if (cr.realized_nwc[r][j] > result.nwc_grid[j] + kBudgetSlack) {
          out.push_back({label, "budget_respect",
                         "run " + std::to_string(r) + " spent NWC " + std::to_string(cr.realized_nwc[r][j]) +
                             " for budget " + std::to_string(result.nwc_grid[j])});
          break;
        }
    }

    if (!is_write_verify(cr.cell.strategy) || good.size() < 2) continue;
    for (std::size_t j = 0; j + 1 < grid; ++j) {
      std::vector<double> lo, hi;
      for (std::size_t r : good) {
        lo.push_back(cr.accuracy[r][j]);
        hi.push_back(cr.accuracy[r][j + 1]);
      }
      const auto pd = paired_difference(hi, lo);
      const double critical = student_t_upper_99(static_cast<int>(good.size()) - 1);
      // identical paired differences leave the t statistic undefined
      const bool decreasing = pd.standard_error > 0.0 && pd.z < -critical;
      if (decreasing)
        out.push_back({label, "monotone_trend",
                       "mean accuracy falls from NWC " + std::to_string(result.nwc_grid[j]) + " to " +
                           std::to_string(result.nwc_grid[j + 1]) + " (t = " + std::to_string(pd.z) + ")"});
    }

    if (cr.cell.strategy != Strategy::USWIM) continue;
    const auto zero = std::find(result.nwc_grid.begin(), result.nwc_grid.end(), 0.0);
    if (zero == result.nwc_grid.end()) continue;
    const double std0 = cr.points[static_cast<std::size_t>(zero - result.nwc_grid.begin())].summary.std;
    for (std::size_t j = 0; j < grid; ++j)
      if (result.nwc_grid[j] >= 0.1 - kBudgetSlack && cr.points[j].summary.std > std0 + 1e-12)
        out.push_back({label, "variance_shrinkage",
                       "std " + std::to_string(cr.points[j].summary.std) + " at NWC " +
                           std::to_string(result.nwc_grid[j]) + " exceeds " + std::to_string(std0) +
                           " at NWC 0"});
  }
  return out;
}

std::vector<Index> sample_weight_subset(Index n, Index count, std::uint64_t seed) {
  if (count < 1) throw ArgumentError("weight_subset must be >= 1");
  if (count >= n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }
  std::vector<Index> ids = random_order(n, seed).order;
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

CorrelationResult correlation_study(const Deployment& d, const DeviceSpec& device,
                                    std::span<const Batch<double>> calibration, const Batch<double>& eval,
                                    const CorrelationOptions& options) {
  if (options.samples_per_weight < 1) throw ArgumentError("samples_per_weight must be >= 1");
  if (eval.size() == 0) throw ArgumentError("evaluation set is empty");
  device.validate();
  const Index n = d.weight_count();
  std::vector<Index> ids = options.weight_subset;
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), Index{0});
  }
  for (Index id : ids)
    if (id < 0 || id >= n) throw ArgumentError("weight id " + std::to_string(id) + " out of range");

  const SensitivityReport metric = uswim_metric(d.net, d.quantized, calibration, device);

  const Network<double>& net = d.deployed;
  BackwardTape<double> tape;
  const Matrix<double> logits = forward(net, eval.inputs, &tape);

  CorrelationResult out;
  out.baseline_accuracy = logits_accuracy(logits, eval.labels);
  out.samples_per_weight = options.samples_per_weight;
  out.high_variance = options.samples_per_weight < 10;

  Network<double> scratch = net;
  for (Index id : ids) {
    const auto loc = net.locate(id);
    const auto& layer = net.layer(loc.layer);
    const auto& qw = d.quantized.weights[static_cast<std::size_t>(id)];
    const double base = net.parameter(id);
    const bool last = loc.layer + 1 == net.layer_count();
    const Matrix<double>& layer_out = last ? tape.output : tape.inputs[static_cast<std::size_t>(loc.layer + 1)];
    double drop = 0.0;
    for (int s = 0; s < options.samples_per_weight; ++s) {
      const SeedLineage lineage{options.seed, static_cast<std::uint64_t>(id), static_cast<std::uint32_t>(s)};
      const double dw = static_cast<double>(qw.sign) * sample_combined_deviation(qw, device, lineage) * qw.scale;
      double acc;
      if (layer.kind == LayerKind::Dense) {
        // Only one output row of the layer moves: add dw * x_c (or dw for a bias).
        Matrix<double> y = layer_out;
        if (loc.is_bias) y.row(loc.row).array() += dw;
        else y.row(loc.row) += dw * tape.inputs[static_cast<std::size_t>(loc.layer)].row(loc.col);
        acc = logits_accuracy(forward_tail(net, tape, loc.layer + 1, std::move(y)), eval.labels);
      } else {
        scratch.set_parameter(id, base + dw);
        acc = logits_accuracy(forward_tail(scratch, tape, loc.layer, tape.inputs[static_cast<std::size_t>(loc.layer)]),
                              eval.labels);
        scratch.set_parameter(id, base);
      }
      drop += (out.baseline_accuracy - acc) * 100.0;
    }
    CorrelationRow row;
    row.weight_id = id;
    row.layer = loc.layer;
    row.metric = metric.entries[static_cast<std::size_t>(id)].metric;
    row.magnitude = metric.entries[static_cast<std::size_t>(id)].magnitude;
    row.mean_drop = drop / options.samples_per_weight;
    out.rows.push_back(row);
  }

  std::vector<double> m, mag, drops;
  for (const auto& r : out.rows) {
    m.push_back(r.metric);
    mag.push_back(r.magnitude);
    drops.push_back(r.mean_drop);
  }
  out.pcc_uswim = pearson(m, drops);
  out.pcc_magnitude = pearson(mag, drops);
  return out;
}

}  // namespace uswim
