#include "psyduck/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "psyduck/error.hpp"

namespace psyduck::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw ParameterError("mean of empty series");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw ParameterError("variance needs two values");
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

double median(std::vector<double> x) {
  if (x.empty()) throw ParameterError("median of empty series");
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + mid, x.end());
  if (x.size() % 2) return x[mid];
  const double upper = x[mid];
  const double lower = *std::max_element(x.begin(), x.begin() + mid);
  return 0.5 * (lower + upper);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_standard_normal(std::span<const double> x) {
  if (x.empty()) throw ParameterError("KS test of empty series");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_pvalue(d, sorted.size())};
}

TestResult variance_test(std::span<const double> x, double sigma2) {
  const double s2 = variance(x);
  const double df = static_cast<double>(x.size() - 1);
  const double chi2 = df * s2 / sigma2;
  boost::math::chi_squared dist(df);
  const double lower = boost::math::cdf(dist, chi2);
  const double upper = boost::math::cdf(boost::math::complement(dist, chi2));
  return {s2, std::min(1.0, 2.0 * std::min(lower, upper))};
}

TestResult lag1_autocorrelation(std::span<const double> x, std::size_t row_length) {
  if (row_length < 2 || x.size() % row_length != 0)
    throw ParameterError("lag-1 autocorrelation needs rows of length >= 2");
  const double m = mean(x);
  double num = 0.0;
  double den = 0.0;
  std::size_t pairs = 0;
  for (double v : x) den += (v - m) * (v - m);
  for (std::size_t row = 0; row < x.size(); row += row_length)
    for (std::size_t i = row; i + 1 < row + row_length; ++i, ++pairs)
      num += (x[i] - m) * (x[i + 1] - m);
  const double rho = den > 0.0 ? (num / static_cast<double>(pairs)) /
                                     (den / static_cast<double>(x.size()))
                               : 0.0;
  const double z = rho * std::sqrt(static_cast<double>(pairs));
  return {rho, 2.0 * (1.0 - normal_cdf(std::abs(z)))};
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ParameterError("pearson needs equal series");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double auc(std::span<const double> cover_scores, std::span<const double> stego_scores) {
  if (cover_scores.empty() || stego_scores.empty()) throw ParameterError("AUC of empty group");
  // Rank-sum with midranks handles ties exactly.
  struct Item {
    double score;
    bool stego;
  };
  std::vector<Item> items;
  items.reserve(cover_scores.size() + stego_scores.size());
  for (double s : cover_scores) items.push_back({s, false});
  for (double s : stego_scores) items.push_back({s, true});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double stego_rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (items[k].stego) stego_rank_sum += midrank;
    i = j;
  }
  const double ns = static_cast<double>(stego_scores.size());
  const double nc = static_cast<double>(cover_scores.size());
  return (stego_rank_sum - ns * (ns + 1.0) / 2.0) / (ns * nc);
}

Interval bootstrap_two_sample(
    std::span<const double> a, std::span<const double> b,
    const std::function<double(std::span<const double>, std::span<const double>)>& statistic,
    std::size_t replicates, double confidence, std::uint64_t seed) {
  if (a.empty() || b.empty() || replicates < 10) throw ParameterError("bootstrap needs data");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_b(0, b.size() - 1);
  std::vector<double> ra(a.size()), rb(b.size()), values(replicates);
  for (auto& value : values) {
    for (auto& v : ra) v = a[pick_a(rng)];
    for (auto& v : rb) v = b[pick_b(rng)];
    value = statistic(ra, rb);
  }
  std::sort(values.begin(), values.end());
  const double tail = (1.0 - confidence) / 2.0;
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(replicates - 1) + 0.5));
    return values[std::min(idx, replicates - 1)];
  };
  return {at(tail), at(1.0 - tail)};
}

Interval bootstrap_mean_difference(std::span<const double> a, std::span<const double> b,
                                   std::size_t replicates, double confidence,
                                   std::uint64_t seed) {
  return bootstrap_two_sample(
      a, b, [](std::span<const double> x, std::span<const double> y) { return mean(x) - mean(y); },
      replicates, confidence, seed);
}

}  // namespace psyduck::stats
