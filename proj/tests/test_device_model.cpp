#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "uswim/device_model.hpp"
#include "uswim/errors.hpp"
#include "uswim/philox.hpp"

namespace uswim {
namespace {

QuantizedWeight code(std::int64_t q, double scale = 1.0) {
  QuantizedWeight qw;
  qw.q = q;
  qw.levels = split_levels(q, 4, 2);
  qw.scale = scale;
  return qw;
}

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::generate(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(DeviceSpec, BuiltinsCarryPublishedFactors) {
  const auto f2 = builtin_device("F2");
  const auto r4 = builtin_device("r4");
  const auto f6 = builtin_device("F6");
  const auto u = builtin_device("Uniform");
  EXPECT_DOUBLE_EQ(f2.beta, 0.8);
  EXPECT_DOUBLE_EQ(r4.beta, 0.57);
  EXPECT_DOUBLE_EQ(f6.beta, 0.43);
  EXPECT_DOUBLE_EQ(u.beta, 1.0);
  EXPECT_EQ(f2.dm_table, (std::vector<double>{1, 2, 2, 1}));
  EXPECT_EQ(r4.dm_table, (std::vector<double>{1, 4, 4, 1}));
  EXPECT_EQ(f6.dm_table, (std::vector<double>{1, 6, 6, 1}));
  EXPECT_EQ(u.dm_table, (std::vector<double>{1, 1, 1, 1}));
  for (const auto& name : builtin_device_names()) EXPECT_EQ(builtin_device(name).bits_per_device, 2);
  EXPECT_THROW(builtin_device("X9"), ConfigError);
}

TEST(DeviceSpec, ValidationRejectsBadTables) {
  DeviceSpec s;
  s.dm_table = {1, 1, 1};
  EXPECT_THROW(s.validate(), ConfigError);
  s.dm_table = {1, 0, 1, 1};
  EXPECT_THROW(s.validate(), ConfigError);
  s.dm_table = {1, 1, 1, 1};
  s.beta = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Quantize, EndpointMapsToFullCode) {
  const auto qw = quantize_weight(1.5, 1.5, 4, 2);
  EXPECT_EQ(qw.q, 15);
  EXPECT_EQ(qw.sign, 1);
  EXPECT_DOUBLE_EQ(qw.scale, 0.1);
}

TEST(Quantize, ZeroWeight) {
  const auto qw = quantize_weight(0.0, 0.7, 4, 2);
  EXPECT_EQ(qw.q, 0);
  EXPECT_EQ(qw.sign, 1);
  EXPECT_EQ(dequantize(qw), 0.0);
}

TEST(Quantize, BaseFourSplit) {
  EXPECT_EQ(split_levels(13, 4, 2), (std::vector<int>{1, 3}));
  for (std::int64_t q = 0; q < 64; ++q) EXPECT_EQ(merge_levels(split_levels(q, 6, 2), 2), q);
  for (std::int64_t q = 0; q < 256; ++q) EXPECT_EQ(merge_levels(split_levels(q, 8, 4), 4), q);
  EXPECT_THROW(split_levels(3, 5, 2), ConfigError);
}

TEST(Quantize, DequantizeNegative) {
  QuantizedWeight qw = code(15, 0.1);
  qw.sign = -1;
  EXPECT_DOUBLE_EQ(dequantize(qw), -1.5);
}

TEST(Quantize, RoundTripWithinHalfStep) {
  CounterRng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double w = rng.uniform(-1.0, 1.0);
    const auto qw = quantize_weight(w, 1.0, 6, 2);
    EXPECT_LE(std::abs(dequantize(qw) - w), qw.scale / 2 + 1e-15);
  }
}

TEST(Quantize, AllZeroLayerUsesUnitRange) {
  Network<double> net({2, 1, 1}, LossKind::SoftmaxCrossEntropy);
  net.add(dense(2));
  const auto qnet = quantize_network(std::as_const(net), 4, 2);
  for (const auto& qw : qnet.weights) {
    EXPECT_EQ(qw.q, 0);
    EXPECT_DOUBLE_EQ(qw.scale, 1.0 / 15.0);
  }
}

TEST(Quantize, NetworkRecordsRange) {
  auto net = testing::make_mlp(3, 5, 2, 1);
  const auto qnet = quantize_network(net, 4, 2);
  EXPECT_EQ(qnet.size(), net.parameter_count());
  EXPECT_DOUBLE_EQ(net.layer(0).quant_range, max_abs_parameter(net.layer(0)));
  const auto deq = dequantized_network(net, qnet);
  for (Index id = 0; id < net.parameter_count(); ++id)
    EXPECT_LE(std::abs(deq.parameter(id) - net.parameter(id)), qnet.weights[static_cast<std::size_t>(id)].scale / 2 + 1e-15);
}

TEST(NoiseStd, UniformAnalytic) {
  const auto spec = builtin_device("Uniform", 0.1);
  for (std::int64_t q = 0; q < 16; ++q) EXPECT_NEAR(noise_std_integer_units(code(q), spec), 0.41231, 1e-5);
}

TEST(NoiseStd, R4Analytic) {
  EXPECT_NEAR(noise_std_integer_units(code(13), builtin_device("R4", 0.1)), 0.32244, 1e-5);
}

TEST(NoiseStd, ZeroSigma) {
  EXPECT_EQ(noise_std_integer_units(code(9), builtin_device("F6", 0.0)), 0.0);
  const SeedLineage lin{1, 2, 3};
  EXPECT_EQ(sample_programmed_value(code(9), builtin_device("F6", 0.0), lin).combined, 0.0);
}

TEST(Sampling, CombinedIsWeightedSum) {
  const auto spec = builtin_device("R4", 0.1);
  for (std::uint32_t a = 0; a < 20; ++a) {
    const auto draw = sample_programmed_value(code(6), spec, {7, 11, a});
    double sum = 0;
    for (std::size_t i = 0; i < draw.perturbations.size(); ++i) sum += draw.perturbations[i] * std::ldexp(1.0, 2 * static_cast<int>(i));
    EXPECT_DOUBLE_EQ(draw.combined, sum);
    EXPECT_DOUBLE_EQ(sample_combined_deviation(code(6), spec, {7, 11, a}), draw.combined);
  }
}

TEST(Sampling, DeterministicPerLineage) {
  const auto spec = builtin_device("F2", 0.1);
  const auto a = sample_programmed_value(code(7), spec, {3, 4, 5});
  const auto b = sample_programmed_value(code(7), spec, {3, 4, 5});
  const auto c = sample_programmed_value(code(7), spec, {3, 4, 6});
  EXPECT_EQ(a.perturbations, b.perturbations);
  EXPECT_NE(a.perturbations, c.perturbations);
}

void expect_moments(const DeviceSpec& spec, std::int64_t q) {
  const auto qw = code(q);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double d = sample_combined_deviation(qw, spec, {99, static_cast<std::uint64_t>(i), 0});
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sq / n - mean * mean);
  const double expected = noise_std_integer_units(qw, spec);
  EXPECT_LT(std::abs(mean), 4 * expected / std::sqrt(double(n))) << spec.name << " q=" << q;
  EXPECT_NEAR(std / expected, 1.0, 0.02) << spec.name << " q=" << q;
}

TEST(Sampling, MomentsMatchClosedForm) {
  for (const auto& name : builtin_device_names())
    for (std::int64_t q : {0, 5, 13}) expect_moments(builtin_device(name, 0.1), q);
}

TEST(Sampling, R4MidLevelsAreNoisier) {
  const auto spec = builtin_device("R4", 0.1);
  const int n = 100000;
  auto device_std = [&](std::int64_t q) {
    double sq = 0;
    for (int i = 0; i < n; ++i) {
      const auto d = sample_programmed_value(code(q), spec, {5, static_cast<std::uint64_t>(i), 0});
      sq += d.perturbations[0] * d.perturbations[0];
    }
    return std::sqrt(sq / n);
  };
  const double mid = device_std(1);   // level 1 on the low device
  const double edge = device_std(0);  // level 0
  EXPECT_NEAR(mid / edge, 4.0, 0.4);
}

}  // namespace
}  // namespace uswim
