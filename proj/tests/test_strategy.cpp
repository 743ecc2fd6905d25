#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "uswim/dataio.hpp"
#include "uswim/errors.hpp"
#include "uswim/strategy.hpp"
#include "uswim/train.hpp"

namespace uswim {
namespace {

struct Trained {
  Deployment d;
  Batch<double> train;
  Batch<double> test;
};

const Trained& moons_model() {
  static const Trained t = [] {
    Trained out;
    out.train = two_moons(400, 0.1, 1).data;
    out.test = two_moons(200, 0.1, 2).data;
    Network<double> net({3, 1, 1}, LossKind::SoftmaxCrossEntropy);
    net.add(dense(12)).add(relu()).add(dense(2));
    initialize_weights(net, 1);
    TrainOptions opt;
    opt.epochs = 40;
    train_sgd(net, out.train, opt);
    out.d = make_deployment(std::move(net), 4, 2);
    return out;
  }();
  return t;
}

DriverConfig config(Strategy s, double sigma, double drop) {
  DriverConfig c;
  c.strategy = s;
  c.device = builtin_device("Uniform", sigma);
  c.max_accuracy_drop = drop;
  c.seed = 5;
  return c;
}

TEST(Strategy, ParseAndPrint) {
  for (Strategy s : {Strategy::USWIM, Strategy::SWIM, Strategy::Magnitude, Strategy::Random, Strategy::InSitu})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_EQ(parse_strategy("uswim"), Strategy::USWIM);
  EXPECT_THROW(parse_strategy("greedy"), ConfigError);
}

TEST(DriverConfig, Validation) {
  auto c = config(Strategy::USWIM, 0.1, 0);
  c.granularity = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.granularity = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.granularity = 0.05;
  c.max_accuracy_drop = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Nwc, Normalization) {
  EXPECT_DOUBLE_EQ(nwc(120, 120), 1.0);
  EXPECT_DOUBLE_EQ(nwc(0, 120), 0.0);
  EXPECT_THROW(nwc(5, 0), ConfigError);
}

TEST(RunSelective, InfiniteDropStopsAfterFirstBatch) {
  const auto& m = moons_model();
  const auto c = config(Strategy::USWIM, 0.1, std::numeric_limits<double>::infinity());
  const auto t = run_selective(m.d, c, m.train, &m.test);
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_EQ(t.termination, Termination::StoppedByDrop);
  const Index n = m.d.weight_count();
  const Index width = static_cast<Index>(std::ceil(0.05 * static_cast<double>(n)));
  EXPECT_EQ(t.records[1].verified, width);
  EXPECT_EQ(t.records[0].cycles, static_cast<std::uint64_t>(n));
  EXPECT_GT(t.records[1].cycles, t.records[0].cycles + static_cast<std::uint64_t>(width) - 1);
}

TEST(RunSelective, NoiseFreeMeetsZeroDropAtFirstCheck) {
  const auto& m = moons_model();
  const auto t = run_selective(m.d, config(Strategy::USWIM, 0.0, 0.0), m.train, &m.test);
  EXPECT_EQ(t.records[0].acc_train, t.baseline_accuracy);
  EXPECT_EQ(t.termination, Termination::StoppedByDrop);
  EXPECT_EQ(t.records.size(), 2u);
}

TEST(RunSelective, BatchDisciplineAndMonotoneCoverage) {
  const auto& m = moons_model();
  auto c = config(Strategy::Magnitude, 0.3, 0.0);
  c.granularity = 0.07;
  const auto t = run_selective(m.d, c, m.train, &m.test);
  const Index n = m.d.weight_count();
  const Index width = static_cast<Index>(std::ceil(0.07 * static_cast<double>(n)));
  for (std::size_t i = 1; i < t.records.size(); ++i) {
    EXPECT_GT(t.records[i].verified, t.records[i - 1].verified);
    EXPECT_LE(t.records[i].verified - t.records[i - 1].verified, width);
    EXPECT_GE(t.records[i].nwc, t.records[i - 1].nwc);
    if (i + 1 < t.records.size()) EXPECT_EQ(t.records[i].verified, static_cast<Index>(i) * width);
  }
  if (t.termination == Termination::Exhausted) EXPECT_EQ(t.records.back().verified, n);
}

TEST(RunSelective, VerifiesExactlyTheRankPrefix) {
  const auto& m = moons_model();
  auto c = config(Strategy::Random, 0.2, std::numeric_limits<double>::infinity());
  c.granularity = 0.1;
  const auto ranking = random_order(m.d.weight_count(), 3);
  // replay the driver by hand: after one batch exactly the first ceil(p n) ids are verified
  const auto t = run_selective(m.d, c, m.train, nullptr, &ranking);
  ASSERT_EQ(t.records.size(), 2u);
  ProgrammedState s(m.d.quantized, c.seed);
  program_all_unverified(s, c.device);
  const Index width = t.records[1].verified;
  write_verify(s, std::span<const Index>(ranking.order).first(static_cast<std::size_t>(width)), c.write_verify, c.device);
  EXPECT_EQ(s.total_cycles(), t.records[1].cycles);
  for (Index r = 0; r < ranking.size(); ++r)
    EXPECT_EQ(s.weight(ranking.order[static_cast<std::size_t>(r)]).verified, r < width);
}

TEST(RunSelective, EndsStoppedOrFullyVerified) {
  const auto& m = moons_model();
  auto c = config(Strategy::USWIM, 0.5, 0.0);
  c.granularity = 0.25;
  const auto t = run_selective(m.d, c, m.train, &m.test);
  if (t.termination == Termination::Exhausted) {
    EXPECT_EQ(t.records.back().verified, m.d.weight_count());
  } else {
    ASSERT_EQ(t.termination, Termination::StoppedByDrop);
    EXPECT_LE((t.baseline_accuracy - t.records.back().acc_train) * 100, 0.0);
  }
}

TEST(RunSelective, CyclesWithinBounds) {
  const auto& m = moons_model();
  auto c = config(Strategy::SWIM, 0.1, 0.0);
  const auto t = run_selective(m.d, c, m.train, &m.test);
  const double bulk = static_cast<double>(m.d.weight_count());
  for (const auto& r : t.records) {
    EXPECT_GE(static_cast<double>(r.cycles), bulk);
    EXPECT_GE(r.nwc, 0.0);
  }
}

TEST(RunSelective, ReproducibleBitForBit) {
  const auto& m = moons_model();
  const auto c = config(Strategy::USWIM, 0.15, 0.0);
  const auto a = run_selective(m.d, c, m.train, &m.test);
  const auto b = run_selective(m.d, c, m.train, &m.test);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].cycles, b.records[i].cycles);
    EXPECT_EQ(a.records[i].acc_train, b.records[i].acc_train);
    EXPECT_EQ(a.records[i].acc_eval, b.records[i].acc_eval);
  }
}

TEST(RunInsitu, TenFullIterationsCostTenN) {
  const auto& m = moons_model();
  auto c = config(Strategy::InSitu, 0.1, 0.0);
  c.insitu.max_iterations = 10;
  auto t = run_insitu(m.d, c, m.train, &m.test);
  const auto n = static_cast<std::uint64_t>(m.d.weight_count());
  for (std::size_t i = 0; i < t.records.size(); ++i) EXPECT_EQ(t.records[i].cycles, n * (i + 1));
  if (t.termination == Termination::Exhausted) {
    ASSERT_EQ(t.records.size(), 11u);
    EXPECT_NEAR(t.records.back().nwc, 10.0 * static_cast<double>(n) / t.denominator, 1e-12);
    EXPECT_NEAR(t.records.back().nwc, 10.0 / 8.643, 0.01);
  }
}

TEST(RunInsitu, TinyLearningRateKeepsAccuracyNearBulk) {
  const auto& m = moons_model();
  auto c = config(Strategy::InSitu, 0.1, 0.0);
  c.insitu.learning_rate = 1e-12;
  c.insitu.max_iterations = 5;
  const auto t = run_insitu(m.d, c, m.train, &m.test);
  for (const auto& r : t.records) EXPECT_NEAR(r.acc_train, t.records.front().acc_train, 0.1);
}

TEST(Budgeted, NeverExceedsBudget) {
  const auto& m = moons_model();
  const auto spec = builtin_device("Uniform", 0.1);
  const WriteVerifyConfig wv;
  const double denom = full_write_verify_cycles(m.d.quantized, spec, wv);
  const std::vector<double> grid{0.0, 0.1, 0.3, 0.5, 1.0, 2.0};
  const auto ranking = magnitude_metric(m.d.quantized);
  const auto r = run_selective_budgeted(m.d, ranking, spec, wv, 0.05, grid, denom, m.test, 11);
  ASSERT_EQ(r.accuracy.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LE(r.nwc[i], grid[i] + 1e-9);
    if (i) EXPECT_GE(r.verified[i], r.verified[i - 1]);
  }
  EXPECT_EQ(r.verified[0], 0);
  EXPECT_EQ(r.verified.back(), m.d.weight_count());
}

TEST(Budgeted, InsituIterationsFollowBudget) {
  const auto& m = moons_model();
  const auto spec = builtin_device("Uniform", 0.1);
  const double n = static_cast<double>(m.d.weight_count());
  const double denom = 10 * n;
  const std::vector<double> grid{0.0, 0.5, 1.0};
  InSituConfig cfg;
  const auto r = run_insitu_budgeted(m.d, spec, cfg, grid, denom, m.train, m.test, 3);
  EXPECT_EQ(r.verified, (std::vector<Index>{0, 5, 10}));
  EXPECT_DOUBLE_EQ(r.nwc[2], 1.0);
}

}  // namespace
}  // namespace uswim
