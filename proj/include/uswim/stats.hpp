#ifndef USWIM_STATS_HPP
#define USWIM_STATS_HPP

#include <optional>
#include <span>
#include <vector>

namespace uswim {

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single record
  std::size_t count = 0;
};

/// Sample mean and std. Throws ArgumentError on an empty input.
Summary aggregate(std::span<const double> records);

/// Pearson correlation; empty when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Average ranks (ties share the mean rank), 0-based.
std::vector<double> fractional_ranks(std::span<const double> x);

/// Spearman rank correlation; empty when either input is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

double normal_cdf(double z);

/// 0.99 quantile of Student's t with `df` degrees of freedom.
double student_t_upper_99(int df);

/// Asymptotic p-value of the one-sample Kolmogorov-Smirnov statistic for
/// samples of U(0, 1).
double ks_uniform_pvalue(std::span<const double> samples);

struct PairedComparison {
  double mean_difference = 0.0;  // mean(a - b)
  double standard_error = 0.0;
  double z = 0.0;                // mean_difference / standard_error (inf if se == 0)
};

/// Paired difference statistics for runs that share random numbers.
PairedComparison paired_difference(std::span<const double> a, std::span<const double> b);

}  // namespace uswim

#endif  // USWIM_STATS_HPP
