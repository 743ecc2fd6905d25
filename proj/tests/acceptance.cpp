// Acceptance suite: one PASS/FAIL line per criterion. Criteria 1, 2 and 6
// call the library with independent oracles; 3, 4, 5 and 8 drive the CLI
// end to end on the bundled MNIST subset. Exit status is nonzero when any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_util.hpp"
#include "uswim/checkpoint.hpp"
#include "uswim/config.hpp"
#include "uswim/strategy.hpp"
#include "uswim/write_verify.hpp"

namespace fs = std::filesystem;
using namespace uswim;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

const fs::path& work_dir() {
  static const fs::path dir = fs::current_path() / "acceptance";
  return dir;
}

std::string cfg(const std::string& name) { return std::string(USWIM_CONFIG_DIR) + "/" + name; }

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(USWIM_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sample_std(const std::vector<double>& x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
}

double spearman_oracle(std::vector<double> a, std::vector<double> b) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// 1. Diagonal Hessian against the second-difference oracle

Verdict criterion_hessian() {
  const auto t0 = Clock::now();
  double worst_last = 0.0, worst_sign = 1.0, worst_rho = 1.0;
  std::vector<double> pooled_h, pooled_fd;
  int nets = 0, agree = 0;
  auto check = [&](Network<double> net, const Batch<double>& batch) {
    ++nets;
    const Vector<double> h = diag_hessian(net, batch).flatten();
    const Index last_layer = net.weight_layers().back();
    const Index last_first = net.parameter_count() - net.layer(last_layer).parameter_count();
    std::vector<double> early_h, early_fd;
    int net_agree = 0;
    for (Index id = 0; id < net.parameter_count(); ++id) {
      if (std::abs(h[id]) <= 1e-6) continue;
      const double fd = fd_second_derivative(net, batch, id, 1e-3).value;
      if (id >= last_first) {
        worst_last = std::max(worst_last, testing::relative_error(h[id], fd));
      } else {
        early_h.push_back(h[id]);
        early_fd.push_back(fd);
        net_agree += (h[id] > 0) == (fd > 0);
      }
    }
    if (early_h.size() >= 2) {
      worst_sign = std::min(worst_sign, static_cast<double>(net_agree) / static_cast<double>(early_h.size()));
      worst_rho = std::min(worst_rho, spearman_oracle(early_h, early_fd));
    }
    agree += net_agree;
    pooled_h.insert(pooled_h.end(), early_h.begin(), early_h.end());
    pooled_fd.insert(pooled_fd.end(), early_fd.begin(), early_fd.end());
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    check(testing::make_mlp(3, 5, 2, seed), testing::random_batch(3, 32, 2, 1000 + seed));
    check(testing::make_conv_net(seed), testing::random_batch(36, 16, 3, 2000 + seed));
  }
  const double sign = static_cast<double>(agree) / static_cast<double>(pooled_h.size());
  const double rho = spearman_oracle(pooled_h, pooled_fd);
  const double secs = seconds_since(t0);
  const bool pass = worst_last <= 0.01 && sign >= 0.95 && rho >= 0.9 && secs < 60;
  return {pass, fmt("%d networks; last-layer max rel err %.2e (<= 1e-2); earlier layers over %zu weights: sign "
                    "agreement %.3f (>= 0.95), Spearman %.3f (>= 0.9), per-network minimum %.3f / %.3f; %.1f s (< 60)",
                    nets, worst_last, pooled_h.size(), sign, rho, worst_sign, worst_rho, secs)};
}

// ---------------------------------------------------------------------------
// 2. Write-verify calibration

Verdict criterion_calibration() {
  const auto t0 = Clock::now();
  const double sigma = 0.1, tau = 0.06;
  // Uniform device, M = 4, K = 2: two devices with digit weights 1 and 4.
  const double s = sigma * std::sqrt(1.0 + 16.0);
  const double a = tau / s;
  const double p = std::erf(a / std::sqrt(2.0));
  const double attempts_oracle = 1.0 / p;
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  const double residual_oracle = s * std::sqrt(1.0 - 2.0 * a * phi / p);

  WriteVerifyConfig wv;
  wv.tolerance = tau;
  const auto r = calibrate_write_verify(builtin_device("Uniform", sigma), 4, wv, 10000, 1);
  const double secs = seconds_since(t0);
  const double e_att = std::abs(r.mean_attempts / attempts_oracle - 1.0);
  const double e_res = std::abs(r.residual_std / residual_oracle - 1.0);
  const bool pass = e_att <= 0.05 && e_res <= 0.05 && secs < 10;
  return {pass, fmt("mean attempts %.3f vs oracle %.3f (%.1f%%), residual std %.5f vs oracle %.5f (%.1f%%); "
                    "%.2f s (< 10)",
                    r.mean_attempts, attempts_oracle, 100 * e_att, r.residual_std, residual_oracle, 100 * e_res, secs)};
}

// ---------------------------------------------------------------------------
// 3. Correlation study on the MNIST MLP

Index trained_weights(const std::string& out) {
  std::smatch m;
  return std::regex_search(out, m, std::regex(R"(weights: (\d+))")) ? std::stoll(m[1]) : -1;
}

Verdict criterion_correlation() {
  const auto t0 = Clock::now();
  const fs::path model = work_dir() / "mnist_mlp.uswm";
  const auto train = cli("train --config " + cfg("mnist_mlp.cfg") + " --set model=" + model.string());
  if (train.code != 0) return {false, "train failed: " + train.out};
  const Index weights = trained_weights(train.out);
  const fs::path out = work_dir() / "correlate";
  const auto run = cli("correlate --config " + cfg("mnist_mlp.cfg") + " --set model=" + model.string() +
                       " --out " + out.string());
  if (run.code != 0) return {false, "correlate failed: " + run.out};
  const auto j = nlohmann::json::parse(slurp(out / "correlation.json"));
  if (j["pcc_uswim"].is_null() || j["pcc_magnitude"].is_null()) return {false, "correlation undefined"};
  const double pu = j["pcc_uswim"], pm = j["pcc_magnitude"];
  const int draws = j["samples_per_weight"];
  const double secs = seconds_since(t0);
  const bool pass = weights > 0 && weights <= 2000 && draws == 100 && pu > pm && pu > 0.5 && secs < 1800;
  return {pass, fmt("%lld-weight MLP, %d draws per weight at sigma %g: PCC uswim %.3f vs magnitude %.3f "
                    "(need uswim > magnitude and > 0.5); %.0f s (< 1800)",
                    static_cast<long long>(weights), draws, j["sigma"].get<double>(), pu, pm, secs)};
}

// ---------------------------------------------------------------------------
// 4 and 5. Sweeps on the LeNet-style MNIST model

const fs::path& lenet_model() {
  static const fs::path p = work_dir() / "mnist_lenet.uswm";
  return p;
}

bool ensure_lenet(std::string& error) {
  if (fs::exists(lenet_model())) return true;
  const auto r = cli("train --config " + cfg("mnist.cfg") + " --set model=" + lenet_model().string());
  if (r.code != 0) error = "train failed: " + r.out;
  return r.code == 0;
}

/// accuracy[strategy][grid index] -> per-run eval accuracies in run order.
using SweepRuns = std::map<std::string, std::map<int, std::vector<double>>>;

SweepRuns read_runs(const fs::path& jsonl) {
  SweepRuns out;
  std::map<std::string, std::map<int, std::map<int, double>>> by_run;
  std::istringstream in(slurp(jsonl));
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["acc_eval"].is_null()) continue;
    by_run[j["strategy"]][j["batch"]][j["run"]] = j["acc_eval"];
  }
  for (auto& [s, grid] : by_run)
    for (auto& [g, runs] : grid)
      for (auto& [r, acc] : runs) out[s][g].push_back(acc);
  return out;
}

Verdict criterion_uniform_sweep() {
  const auto t0 = Clock::now();
  std::string error;
  if (!ensure_lenet(error)) return {false, error};
  const fs::path out = work_dir() / "sweep_uniform";
  const auto r = cli("sweep --config " + cfg("mnist.cfg") + " --set model=" + lenet_model().string() +
                     " --set strategies=USWIM,SWIM,Magnitude,Random --out " + out.string());
  if (r.code != 0 && r.code != 3) return {false, "sweep failed: " + r.out};
  auto runs = read_runs(out / "trajectories.jsonl");
  // grid is 0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0
  const int g0 = 0, g01 = 1, g1 = 6;
  const std::vector<std::string> wv{"USWIM", "SWIM", "Magnitude", "Random"};
  for (const auto& s : wv)
    if (runs[s][g1].size() != 200 || runs[s][g01].size() != 200) return {false, "missing runs for " + s};

  double spread = 0.0, worst_std = 0.0;
  for (const auto& s : wv) worst_std = std::max(worst_std, sample_std(runs[s][g1]));
  for (const auto& s : wv)
    for (const auto& t : wv) spread = std::max(spread, std::abs(mean(runs[s][g1]) - mean(runs[t][g1])));
  const bool a = spread <= 2 * worst_std;

  const double u = mean(runs["USWIM"][g01]), m = mean(runs["Magnitude"][g01]), rnd = mean(runs["Random"][g01]);
  const double se_mr = std::sqrt(std::pow(sample_std(runs["Magnitude"][g01]), 2) / 200 +
                                 std::pow(sample_std(runs["Random"][g01]), 2) / 200);
  const double drop_pp = (mean(runs["USWIM"][g1]) - u) * 100;
  const bool b = u >= m && m >= rnd - 2 * se_mr && drop_pp <= 0.5;

  const double std01 = sample_std(runs["USWIM"][g01]), std0 = sample_std(runs["USWIM"][g0]);
  const bool c = std01 <= std0;
  const double secs = seconds_since(t0);
  return {a && b && c && secs < 3600,
          fmt("(a) NWC 1.0 max mean spread %.4f <= 2 std %.4f: %s; (b) NWC 0.1 USWIM %.4f >= Magnitude %.4f >= "
              "Random %.4f - 2 SE, USWIM drop from NWC 1.0 %.2f pp (<= 0.5): %s; (c) USWIM std %.4f at 0.1 <= "
              "%.4f at 0.0: %s; %.0f s (< 3600)",
              spread, 2 * worst_std, a ? "ok" : "no", u, m, rnd, drop_pp, b ? "ok" : "no", std01, std0,
              c ? "ok" : "no", secs)};
}

Verdict criterion_r4_sweep() {
  const auto t0 = Clock::now();
  std::string error;
  if (!ensure_lenet(error)) return {false, error};
  const fs::path out = work_dir() / "sweep_r4";
  const auto r = cli("sweep --config " + cfg("mnist.cfg") + " --set model=" + lenet_model().string() +
                     " --set device=R4 --set strategies=USWIM,SWIM,Magnitude --set nwc_grid=0,0.1 --out " +
                     out.string());
  if (r.code != 0 && r.code != 3) return {false, "sweep failed: " + r.out};
  auto runs = read_runs(out / "trajectories.jsonl");
  const auto& u = runs["USWIM"][1];
  const auto& s = runs["SWIM"][1];
  const auto& m = runs["Magnitude"][1];
  if (u.size() != 200 || s.size() != 200 || m.size() != 200) return {false, "missing runs"};
  // runs share seeds across strategies, so the difference is paired
  std::vector<double> diff;
  for (std::size_t i = 0; i < u.size(); ++i) diff.push_back(u[i] - s[i]);
  const double d = mean(diff), se = sample_std(diff) / std::sqrt(static_cast<double>(diff.size()));
  const double lower = d - 1.645 * se;
  const bool pass = mean(u) >= mean(s) && mean(s) >= mean(m) && lower > 0 && seconds_since(t0) < 3600;
  return {pass, fmt("R4 NWC 0.1: USWIM %.4f >= SWIM %.4f >= Magnitude %.4f; USWIM - SWIM = %.4f, one-sided 95%% "
                    "lower bound %.4f (> 0); %.0f s (< 3600)",
                    mean(u), mean(s), mean(m), d, lower, seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 6. In-situ training against full write-verify

Verdict criterion_insitu() {
  std::string error;
  if (!ensure_lenet(error)) return {false, error};
  RunConfig rc = load_config(cfg("mnist.cfg"));
  const DataSplits data = load_splits(rc);
  Checkpoint ck = load_checkpoint(lenet_model());
  const Deployment d = make_deployment(std::move(ck.net), rc.quant_bits, rc.bits_per_device);
  const DeviceSpec device = builtin_device("Uniform", 0.15);
  const double n = static_cast<double>(d.weight_count());
  const auto ranking = magnitude_metric(d.quantized);
  const std::vector<double> ten_iterations{1.0};
  const std::vector<double> everything{1e9};
  std::vector<double> insitu, full;
  const int runs = 30;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = combine_seed(77, static_cast<std::uint64_t>(r));
    const auto a = run_insitu_budgeted(d, device, rc.insitu, ten_iterations, 10 * n, data.train.data,
                                       data.test.data, seed);
    if (a.failed || a.verified[0] != 10) return {false, "in-situ run failed: " + a.diagnostic};
    insitu.push_back(a.accuracy[0]);
    const auto b = run_selective_budgeted(d, ranking, device, rc.write_verify, 1.0, everything, 1.0, data.test.data,
                                          seed);
    if (b.verified[0] != d.weight_count()) return {false, "full write-verify left weights unverified"};
    full.push_back(b.accuracy[0]);
  }
  const bool pass = mean(insitu) < mean(full);
  return {pass, fmt("sigma 0.15, %d runs: in-situ after 10 iterations %.4f +- %.4f < full write-verify %.4f +- %.4f",
                    runs, mean(insitu), sample_std(insitu), mean(full), sample_std(full))};
}

// ---------------------------------------------------------------------------
// 8. Determinism: rerunning a command into the same directory rewrites the
// same bytes.

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

Verdict criterion_determinism() {
  const fs::path root = work_dir() / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string moons = "--config " + cfg("moons.cfg") + " --set model=" + (root / "moons.uswm").string();
  const std::string lenet = "--config " + cfg("mnist.cfg") + " --set model=" + lenet_model().string();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"train", "train " + moons},
      {"quantize", "quantize " + moons},
      {"sensitivity", "sensitivity " + moons},
      {"calibrate", "writeverify-calibrate " + moons},
      {"simulate", "simulate " + moons},
      {"sweep", "sweep " + moons + " --workers 2"},
      {"correlate", "correlate " + moons + " --set samples_per_weight=20"},
      {"simulate_mnist", "simulate " + lenet + " --set p=0.05"},
      {"sweep_mnist", "sweep " + lenet + " --set runs=20 --set nwc_grid=0,0.1,0.5"},
  };
  std::vector<std::string> mismatched;
  std::size_t compared = 0;
  for (const auto& [name, args] : commands) {
    const fs::path out = root / name;
    const std::string full = args + " --out " + out.string();
    const auto first = cli(full);
    if (first.code != 0) return {false, name + " failed: " + first.out};
    auto before = snapshot(root);
    if (cli(full).code != 0) return {false, name + " failed on rerun"};
    const auto after = snapshot(root);
    if (before != after) mismatched.push_back(name);
    compared += after.size();
  }
  std::string list;
  for (const auto& m : mismatched) list += (list.empty() ? "" : ", ") + m;
  return {mismatched.empty(), fmt("%zu commands rerun, %zu file comparisons, mismatches: %s", commands.size(),
                                  compared, mismatched.empty() ? "none" : list.c_str())};
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion_hessian},      {2, criterion_calibration}, {3, criterion_correlation},
      {4, criterion_uniform_sweep}, {5, criterion_r4_sweep},    {6, criterion_insitu},
      {8, criterion_determinism},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %d: %s: %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("criterion 7: excluded (full-scale speedups and ResNet-18 curves are out of reach at desk scale)\n");
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
