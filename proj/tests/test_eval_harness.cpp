#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "uswim/dataio.hpp"
#include "uswim/errors.hpp"
#include "uswim/eval_harness.hpp"
#include "uswim/train.hpp"

namespace uswim {
namespace {

struct Model {
  Deployment d;
  Batch<double> train;
  Batch<double> test;
};

const Model& small_model() {
  static const Model m = [] {
    Model out;
    out.train = two_moons(300, 0.1, 1).data;
    out.test = two_moons(200, 0.1, 2).data;
    Network<double> net({3, 1, 1}, LossKind::SoftmaxCrossEntropy);
    net.add(dense(10)).add(relu()).add(dense(2));
    initialize_weights(net, 4);
    TrainOptions opt;
    opt.epochs = 30;
    train_sgd(net, out.train, opt);
    out.d = make_deployment(std::move(net), 4, 2);
    return out;
  }();
  return m;
}

ExperimentPlan small_plan(int runs, int workers) {
  ExperimentPlan plan;
  for (Strategy s : {Strategy::USWIM, Strategy::Magnitude, Strategy::Random, Strategy::InSitu})
    plan.cells.push_back({s, builtin_device("Uniform", 0.2)});
  plan.nwc_grid = {0.0, 0.3, 1.0};
  plan.runs = runs;
  plan.workers = workers;
  plan.granularity = 0.1;
  plan.insitu.max_iterations = 3;
  return plan;
}

TEST(Aggregate, HandExamples) {
  const auto a = aggregate(std::vector<double>{1, 1, 1});
  EXPECT_DOUBLE_EQ(a.mean, 1.0);
  EXPECT_DOUBLE_EQ(a.std, 0.0);
  const auto b = aggregate(std::vector<double>{0, 2});
  EXPECT_DOUBLE_EQ(b.mean, 1.0);
  EXPECT_NEAR(b.std, std::sqrt(2.0), 1e-15);
  const auto c = aggregate(std::vector<double>{3.5});
  EXPECT_DOUBLE_EQ(c.std, 0.0);
  EXPECT_EQ(c.count, 1u);
  EXPECT_THROW(aggregate(std::vector<double>{}), ArgumentError);
}

TEST(Aggregate, RecoversNormalMoments) {
  CounterRng rng(2024);
  std::vector<double> x;
  for (int i = 0; i < 10000; ++i) x.push_back(5.0 + 2.0 * rng.normal());
  const auto s = aggregate(x);
  EXPECT_NEAR(s.mean, 5.0, 0.08);
  EXPECT_NEAR(s.std, 2.0, 0.06);
}

TEST(Pearson, PerfectAndUndefined) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(3 * v - 7);
  EXPECT_NEAR(*pearson(x, y), 1.0, 1e-12);
  EXPECT_FALSE(pearson(x, std::vector<double>(5, 2.0)).has_value());
  EXPECT_NEAR(*spearman(x, std::vector<double>{1, 4, 9, 16, 100}), 1.0, 1e-12);
}

TEST(PairedDifference, Basic) {
  const auto pd = paired_difference(std::vector<double>{2, 3, 4}, std::vector<double>{1, 1, 1});
  EXPECT_DOUBLE_EQ(pd.mean_difference, 2.0);
  EXPECT_NEAR(pd.standard_error, 1.0 / std::sqrt(3.0), 1e-12);
}

TEST(StudentT, CriticalValues) {
  EXPECT_DOUBLE_EQ(student_t_upper_99(1), 31.821);
  EXPECT_NEAR(student_t_upper_99(30), 2.457, 1e-9);
  EXPECT_NEAR(student_t_upper_99(40), 2.423, 2e-3);
  EXPECT_NEAR(student_t_upper_99(120), 2.358, 1e-3);
  EXPECT_NEAR(student_t_upper_99(100000), 2.3263, 1e-3);
  EXPECT_THROW(student_t_upper_99(0), ArgumentError);
}

TEST(SweepSeed, SharedAcrossStrategiesDistinctAcrossRuns) {
  const auto u = builtin_device("Uniform", 0.1);
  EXPECT_EQ(sweep_run_seed(1, u, 3), sweep_run_seed(1, u, 3));
  EXPECT_NE(sweep_run_seed(1, u, 3), sweep_run_seed(1, u, 4));
  EXPECT_NE(sweep_run_seed(1, u, 3), sweep_run_seed(1, builtin_device("Uniform", 0.2), 3));
  EXPECT_NE(sweep_run_seed(1, u, 3), sweep_run_seed(1, builtin_device("R4", 0.1), 3));
  EXPECT_NE(sweep_run_seed(1, u, 3), sweep_run_seed(2, u, 3));
}

TEST(Plan, Validation) {
  auto p = small_plan(2, 1);
  p.runs = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = small_plan(2, 1);
  p.nwc_grid = {0.5, 0.1};
  EXPECT_THROW(p.validate(), ConfigError);
  p = small_plan(2, 1);
  p.granularity = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Sweep, SingleRunFlagsEveryPoint) {
  const auto& m = small_model();
  const auto r = run_sweep(small_plan(1, 1), m.d, m.train, m.test);
  for (const auto& c : r.cells)
    for (const auto& p : c.points) {
      EXPECT_TRUE(p.single_sample);
      EXPECT_EQ(p.summary.std, 0.0);
      EXPECT_EQ(p.summary.count, 1u);
    }
}

TEST(Sweep, IndependentOfWorkersAndCellOrder) {
  const auto& m = small_model();
  const auto a = run_sweep(small_plan(4, 1), m.d, m.train, m.test);
  const auto b = run_sweep(small_plan(4, 3), m.d, m.train, m.test);
  auto reversed = small_plan(4, 2);
  std::reverse(reversed.cells.begin(), reversed.cells.end());
  const auto c = run_sweep(reversed, m.d, m.train, m.test);
  for (const auto& ca : a.cells) {
    const auto* cb = b.find(ca.cell.strategy, "Uniform", 0.2);
    const auto* cc = c.find(ca.cell.strategy, "Uniform", 0.2);
    ASSERT_TRUE(cb && cc);
    EXPECT_EQ(ca.accuracy, cb->accuracy);
    EXPECT_EQ(ca.accuracy, cc->accuracy);
    EXPECT_EQ(ca.cycles, cc->cycles);
  }
}

TEST(Sweep, BudgetsAndInvariantsHold) {
  const auto& m = small_model();
  const auto r = run_sweep(small_plan(6, 2), m.d, m.train, m.test);
  for (const auto& c : r.cells) {
    for (std::size_t run = 0; run < c.accuracy.size(); ++run) {
      EXPECT_TRUE(c.run_errors[run].empty()) << c.run_errors[run];
      for (std::size_t j = 0; j < r.nwc_grid.size(); ++j) EXPECT_LE(c.realized_nwc[run][j], r.nwc_grid[j] + 1e-9);
    }
    for (const auto& p : c.points) EXPECT_GE(p.summary.std, 0.0);
    for (const auto& v : c.verified) {
      EXPECT_EQ(v.front(), 0);
      EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
    }
  }
  for (const auto& f : r.failures) ADD_FAILURE() << f.cell << ' ' << f.invariant << ' ' << f.detail;
}

TEST(Sweep, SharedBulkWriteAtZeroBudget) {
  const auto& m = small_model();
  const auto r = run_sweep(small_plan(3, 1), m.d, m.train, m.test);
  const auto* u = r.find(Strategy::USWIM, "Uniform", 0.2);
  const auto* g = r.find(Strategy::Magnitude, "Uniform", 0.2);
  ASSERT_TRUE(u && g);
  for (std::size_t run = 0; run < 3; ++run) EXPECT_EQ(u->accuracy[run][0], g->accuracy[run][0]);
}

SweepResult synthetic(std::vector<std::vector<double>> acc, std::vector<std::vector<double>> spent) {
  SweepResult r;
  r.nwc_grid = {0.0, 0.5};
  r.runs = static_cast<int>(acc.size());
  CellResult c;
  c.cell = {Strategy::SWIM, builtin_device("Uniform", 0.1)};
  c.accuracy = std::move(acc);
  c.realized_nwc = std::move(spent);
  c.run_errors.assign(c.accuracy.size(), "");
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> col;
    for (const auto& row : c.accuracy) col.push_back(row[j]);
    c.points.push_back({r.nwc_grid[j], aggregate(col), 0, false});
  }
  r.cells.push_back(c);
  return r;
}

bool has(const std::vector<InvariantFailure>& f, const std::string& name) {
  return std::any_of(f.begin(), f.end(), [&](const auto& x) { return x.invariant == name; });
}

TEST(Invariants, DetectOverspendAndFallingTrend) {
  const auto ok = synthetic({{0.5, 0.9}, {0.6, 0.9}, {0.55, 0.95}}, {{0, 0.4}, {0, 0.5}, {0, 0.45}});
  EXPECT_TRUE(check_sweep_invariants(ok).empty());
  const auto over = synthetic({{0.5, 0.9}, {0.6, 0.9}}, {{0, 0.4}, {0, 0.51}});
  EXPECT_TRUE(has(check_sweep_invariants(over), "budget_respect"));
  const auto falling = synthetic({{0.9, 0.5}, {0.9, 0.6}, {0.95, 0.55}}, {{0, 0.4}, {0, 0.4}, {0, 0.4}});
  EXPECT_TRUE(has(check_sweep_invariants(falling), "monotone_trend"));
}

TEST(WeightSubset, DistinctSortedAndValidated) {
  const auto ids = sample_weight_subset(100, 20, 3);
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::set<Index>(ids.begin(), ids.end()).size(), 20u);
  EXPECT_EQ(sample_weight_subset(5, 9, 1).size(), 5u);
  EXPECT_THROW(sample_weight_subset(5, 0, 1), ArgumentError);
}

double accuracy_of(const Network<double>& net, const Batch<double>& b) { return accuracy(net, b); }

TEST(Correlation, MatchesFullForwardPerturbation) {
  const auto& m = small_model();
  const auto dev = builtin_device("Uniform", 0.5);
  const auto cal = split_batches(m.train, 128);
  CorrelationOptions opt;
  opt.samples_per_weight = 4;
  opt.weight_subset = {0, 5, 30, 31, m.d.weight_count() - 1};
  opt.seed = 9;
  const auto r = correlation_study(m.d, dev, cal, m.test, opt);
  ASSERT_EQ(r.rows.size(), opt.weight_subset.size());
  const double base = accuracy_of(m.d.deployed, m.test);
  EXPECT_DOUBLE_EQ(r.baseline_accuracy, base);
  for (const auto& row : r.rows) {
    const auto& qw = m.d.quantized.weights[static_cast<std::size_t>(row.weight_id)];
    double drop = 0.0;
    for (int s = 0; s < opt.samples_per_weight; ++s) {
      Network<double> net = m.d.deployed;
      const SeedLineage lin{opt.seed, static_cast<std::uint64_t>(row.weight_id), static_cast<std::uint32_t>(s)};
      net.set_parameter(row.weight_id, net.parameter(row.weight_id) +
                                           qw.sign * sample_combined_deviation(qw, dev, lin) * qw.scale);
      drop += (base - accuracy_of(net, m.test)) * 100.0;
    }
    EXPECT_NEAR(row.mean_drop, drop / opt.samples_per_weight, 1e-9) << "weight " << row.weight_id;
  }
  EXPECT_TRUE(r.high_variance);
}

TEST(Correlation, NoiseFreeDropsAreConstant) {
  const auto& m = small_model();
  const auto cal = split_batches(m.train, 128);
  CorrelationOptions opt;
  opt.samples_per_weight = 2;
  opt.weight_subset = {0, 1, 2, 3};
  const auto r = correlation_study(m.d, builtin_device("Uniform", 0.0), cal, m.test, opt);
  for (const auto& row : r.rows) EXPECT_EQ(row.mean_drop, 0.0);
  EXPECT_FALSE(r.pcc_uswim.has_value());
}

}  // namespace
}  // namespace uswim
