#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace san {

/// A random subset of the m*n filters of a layer, drawn without replacement.
struct SubsetPlan {
  std::size_t total = 0;
  double rate = 1.0;
  std::vector<std::size_t> indices;  // sorted, distinct, each < total
  std::uint64_t seed = 0;
};

/// Round half to even.
std::size_t round_half_even(double x);

/// Expected maximum of k iid unit-rate exponentials: the harmonic number H_k.
double harmonic_expected_max(std::size_t k);

/// g = H_total / H_k with k = round_half_even(total * rate). g >= 1, g(., 1) = 1.
double compensation_factor(std::size_t total, double rate);

/// Monte-Carlo mean over `trials` of the maximum of k unit exponentials,
/// each sample drawn explicitly.
double mc_expected_max(std::size_t k, std::size_t trials, std::uint64_t seed);

/// Uniform sample of round_half_even(m*n*rate) filter indices (flattened as
/// out * n + in); deterministic in seed.
SubsetPlan sample_filter_subset(std::size_t out_channels, std::size_t in_channels, double rate,
                                std::uint64_t seed);

struct CompensationRow {
  std::size_t total;
  double rate;
  double g_formula;
  double g_montecarlo;
};

std::vector<CompensationRow> compensation_table(const std::vector<std::size_t>& totals,
                                                const std::vector<double>& rates, std::size_t trials,
                                                std::uint64_t seed);
void write_compensation_csv(std::ostream& out, const std::vector<CompensationRow>& rows);

}  // namespace san
