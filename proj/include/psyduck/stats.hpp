#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace psyduck::stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

double mean(std::span<const double> x);
/// Unbiased sample variance.
double variance(std::span<const double> x);
double median(std::vector<double> x);

double normal_cdf(double x);

/// Asymptotic Kolmogorov survival function with Stephens' small-sample
/// correction.
double kolmogorov_pvalue(double d, std::size_t n);

/// One-sample Kolmogorov-Smirnov test against N(0, 1).
TestResult ks_standard_normal(std::span<const double> x);

/// Two-sided chi-square test of H0: variance == sigma2 (mean estimated).
TestResult variance_test(std::span<const double> x, double sigma2 = 1.0);

/// Lag-1 autocorrelation over consecutive pairs inside rows of length
/// `row_length`; the statistic is rho and the p-value uses rho*sqrt(m) ~ N(0,1).
TestResult lag1_autocorrelation(std::span<const double> x, std::size_t row_length);

/// Pearson correlation of two equally long series.
double pearson(std::span<const double> a, std::span<const double> b);

/// Mann-Whitney AUC: P(stego > cover) + 0.5 P(tie).
double auc(std::span<const double> cover_scores, std::span<const double> stego_scores);

/// Percentile bootstrap over two independently resampled groups.
Interval bootstrap_two_sample(
    std::span<const double> a, std::span<const double> b,
    const std::function<double(std::span<const double>, std::span<const double>)>& statistic,
    std::size_t replicates, double confidence, std::uint64_t seed);

/// Percentile bootstrap CI of mean(a) - mean(b).
Interval bootstrap_mean_difference(std::span<const double> a, std::span<const double> b,
                                   std::size_t replicates, double confidence,
                                   std::uint64_t seed);

}  // namespace psyduck::stats
