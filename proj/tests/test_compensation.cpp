#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "san/compensation.hpp"

using namespace san;

TEST_CASE("round half to even") {
  CHECK(round_half_even(0.5) == 0);
  CHECK(round_half_even(1.5) == 2);
  CHECK(round_half_even(2.5) == 2);
  CHECK(round_half_even(2.4) == 2);
  CHECK(round_half_even(2.6) == 3);
  CHECK(round_half_even(1024.0) == 1024);
}

TEST_CASE("harmonic expected maximum") {
  CHECK(harmonic_expected_max(1) == doctest::Approx(1.0));
  CHECK(harmonic_expected_max(4) == doctest::Approx(25.0 / 12.0));
  double h = 0.0;
  for (std::size_t i = 1; i <= 1000; ++i) h += 1.0 / static_cast<double>(i);
  CHECK(harmonic_expected_max(1000) == doctest::Approx(h).epsilon(1e-12));
  CHECK_THROWS_AS(harmonic_expected_max(0), std::invalid_argument);
}

TEST_CASE("compensation factor") {
  CHECK(compensation_factor(1, 1.0) == 1.0);
  CHECK(compensation_factor(4096, 1.0) == 1.0);
  CHECK(std::abs(compensation_factor(4096, 0.25) - 1.2) <= 0.05);
  // H_4096 / H_1024 computed directly
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1; i <= 4096; ++i) num += 1.0 / static_cast<double>(i);
  for (std::size_t i = 1; i <= 1024; ++i) den += 1.0 / static_cast<double>(i);
  CHECK(compensation_factor(4096, 0.25) == doctest::Approx(num / den).epsilon(1e-12));

  double prev = compensation_factor(4096, 1.0);
  for (double r : {0.75, 0.5, 0.25, 0.1, 0.01}) {
    const double g = compensation_factor(4096, r);
    CHECK(g >= prev);
    prev = g;
  }
  CHECK_THROWS_AS(compensation_factor(4096, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(compensation_factor(4096, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(compensation_factor(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compensation_factor(10, 0.01), std::invalid_argument);
}

TEST_CASE("monte carlo agrees with the harmonic formula") {
  for (std::size_t k : {1, 8, 64}) {
    const double mc = mc_expected_max(k, 20000, 3);
    CHECK(std::abs(mc / harmonic_expected_max(k) - 1.0) < 0.02);
  }
  CHECK(mc_expected_max(16, 1000, 9) == mc_expected_max(16, 1000, 9));
  CHECK(mc_expected_max(16, 1000, 9) != mc_expected_max(16, 1000, 10));
}

TEST_CASE("filter subset plans") {
  const auto plan = sample_filter_subset(8, 4, 0.25, 17);
  CHECK(plan.total == 32);
  REQUIRE(plan.indices.size() == 8);
  CHECK(std::is_sorted(plan.indices.begin(), plan.indices.end()));
  CHECK(std::set<std::size_t>(plan.indices.begin(), plan.indices.end()).size() == 8);
  for (auto i : plan.indices) CHECK(i < 32);
  CHECK(sample_filter_subset(8, 4, 0.25, 17).indices == plan.indices);
  CHECK(sample_filter_subset(8, 4, 0.25, 18).indices != plan.indices);

  const auto full = sample_filter_subset(3, 5, 1.0, 1);
  REQUIRE(full.indices.size() == 15);
  for (std::size_t i = 0; i < 15; ++i) CHECK(full.indices[i] == i);

  // each filter is equally likely
  std::vector<int> hits(16, 0);
  for (std::uint64_t s = 0; s < 4000; ++s)
    for (auto i : sample_filter_subset(4, 4, 0.25, s).indices) ++hits[i];
  for (int h : hits) CHECK(std::abs(h - 1000) < 150);

  CHECK_THROWS_AS(sample_filter_subset(4, 4, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_filter_subset(4, 4, 0.01, 1), std::invalid_argument);
}

TEST_CASE("compensation table") {
  const auto rows = compensation_table({64, 256}, {0.5, 1.0}, 2000, 5);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].total == 64);
  CHECK(rows[0].rate == 0.5);
  CHECK(rows[0].g_formula == compensation_factor(64, 0.5));
  CHECK(std::abs(rows[0].g_montecarlo / rows[0].g_formula - 1.0) < 0.05);
  CHECK(rows[1].g_formula == 1.0);
  std::ostringstream os;
  write_compensation_csv(os, rows);
  const std::string csv = os.str();
  CHECK(csv.substr(0, csv.find('\n')) == "total,rate,g_formula,g_montecarlo");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
