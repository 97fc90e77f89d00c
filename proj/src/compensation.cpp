#include "san/compensation.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "san/rng.hpp"

namespace san {

std::size_t round_half_even(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("round_half_even: argument must be >= 0");
  const double fl = std::floor(x);
  const double frac = x - fl;
  double r = fl;
  if (frac > 0.5 || (frac == 0.5 && std::fmod(fl, 2.0) != 0.0)) r = fl + 1.0;
  return static_cast<std::size_t>(r);
}

double harmonic_expected_max(std::size_t k) {
  if (k == 0) throw std::invalid_argument("harmonic_expected_max: k must be >= 1");
  // sum_{j=1}^{k} 1/(k-j+1), smallest terms first.
  double s = 0.0;
  for (std::size_t j = 1; j <= k; ++j) s += 1.0 / static_cast<double>(k - j + 1);
  return s;
}

namespace {
std::size_t subset_size(std::size_t total, double rate) {
  if (total == 0) throw std::invalid_argument("filter count must be >= 1");
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("subset rate must lie in (0, 1]");
  const std::size_t k = round_half_even(static_cast<double>(total) * rate);
  if (k == 0)
    throw std::invalid_argument("subset of rate " + std::to_string(rate) + " over " +
                                std::to_string(total) + " filters is empty");
  return k;
}
}  // namespace

double compensation_factor(std::size_t total, double rate) {
  const std::size_t k = subset_size(total, rate);
  if (k == total) return 1.0;
  return harmonic_expected_max(total) / harmonic_expected_max(k);
}

double mc_expected_max(std::size_t k, std::size_t trials, std::uint64_t seed) {
  if (k == 0 || trials == 0) throw std::invalid_argument("mc_expected_max: k and trials must be >= 1");
  CounterRng rng(seed);
  double sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    // -log(1 - u) is increasing in u, so the largest exponential comes from
    // the largest uniform; one log per trial.
    double best = 0.0;
    for (std::size_t i = 0; i < k; ++i) best = std::max(best, rng.uniform());
    sum += -std::log(1.0 - best);
  }
  return sum / static_cast<double>(trials);
}

SubsetPlan sample_filter_subset(std::size_t out_channels, std::size_t in_channels, double rate,
                                std::uint64_t seed) {
  SubsetPlan plan;
  plan.total = out_channels * in_channels;
  plan.rate = rate;
  plan.seed = seed;
  const std::size_t k = subset_size(plan.total, rate);

  std::vector<std::size_t> pool(plan.total);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  CounterRng rng(seed);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(plan.total - i));
    std::swap(pool[i], pool[j]);
  }
  plan.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(plan.indices.begin(), plan.indices.end());
  return plan;
}

std::vector<CompensationRow> compensation_table(const std::vector<std::size_t>& totals,
                                                const std::vector<double>& rates, std::size_t trials,
                                                std::uint64_t seed) {
  std::vector<CompensationRow> rows;
  for (std::size_t t = 0; t < totals.size(); ++t) {
    const std::size_t total = totals[t];
    const double full = mc_expected_max(total, trials, derive_seed(seed, 2 * t));
    for (std::size_t r = 0; r < rates.size(); ++r) {
      const std::size_t k = subset_size(total, rates[r]);
      const double part =
          k == total ? full : mc_expected_max(k, trials, derive_seed(seed, 1000003 * (t + 1) + r));
      rows.push_back({total, rates[r], compensation_factor(total, rates[r]), full / part});
    }
  }
  return rows;
}

void write_compensation_csv(std::ostream& out, const std::vector<CompensationRow>& rows) {
  out << "total,rate,g_formula,g_montecarlo\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", row.total, row.rate, row.g_formula,
                  row.g_montecarlo);
    out << buf;
  }
}

}  // namespace san
