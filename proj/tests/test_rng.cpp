#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "saflbench/data.hpp"
#include "saflbench/rng.hpp"

using namespace saflbench;

TEST_CASE("philox known answers") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                      {0xffffffff, 0xffffffff}) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
}

TEST_CASE("same seed and stream give the same sequence") {
  SeededRng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("derive leaves the parent untouched") {
  SeededRng a(5), b(5);
  auto child = a.derive(3);
  auto child2 = b.derive(3);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(child.next_u64() == child2.next_u64());
  CHECK(a.derive(3).stream() != a.derive(4).stream());
}

TEST_CASE("uniform stays in range") {
  SeededRng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    const double v = rng.uniform_open();
    CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("below is uniform") {
  SeededRng rng(2);
  constexpr int kBins = 7;
  constexpr int kDraws = 70000;
  std::vector<int> hits(kBins, 0);
  for (int i = 0; i < kDraws; ++i) {
    const auto v = rng.below(kBins);
    REQUIRE(v < kBins);
    ++hits[v];
  }
  const double expected = static_cast<double>(kDraws) / kBins;
  double chi2 = 0.0;
  for (int h : hits) {
    chi2 += (h - expected) * (h - expected) / expected;
  }
  // 6 degrees of freedom; the 0.999 quantile is 22.46.
  CHECK(chi2 < 22.46);
}

TEST_CASE("normal moments") {
  SeededRng rng(3);
  constexpr int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("gamma mean matches shape") {
  for (double shape : {0.05, 0.3, 1.0, 2.5, 10.0}) {
    SeededRng rng(4, static_cast<std::uint64_t>(shape * 100));
    constexpr int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      REQUIRE(g >= 0.0);
      sum += g;
    }
    CAPTURE(shape);
    CHECK(std::abs(sum / n - shape) < 5.0 * std::sqrt(shape / n));
  }
}

TEST_CASE("log gamma variate agrees with gamma for moderate shapes") {
  SeededRng a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::exp(a.log_gamma_variate(2.0)) == doctest::Approx(b.gamma(2.0)).epsilon(1e-12));
  }
  SeededRng tiny(10);
  for (int i = 0; i < 1000; ++i) {
    CHECK(std::isfinite(tiny.log_gamma_variate(1e-4)));
  }
}

TEST_CASE("shuffle is a permutation and seed dependent") {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  SeededRng r1(11), r2(12);
  r1.shuffle(std::span(a));
  r2.shuffle(std::span(b));
  CHECK(a != b);
  std::sort(a.begin(), a.end());
  for (int i = 0; i < 50; ++i) {
    CHECK(a[static_cast<std::size_t>(i)] == i);
  }
}

TEST_CASE("dirichlet proportions sum to one") {
  SeededRng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = 2 + rng.below(20);
    std::vector<double> alpha(k);
    for (double& a : alpha) {
      a = std::exp(rng.uniform() * 16.0 - 8.0);
    }
    const auto p = sample_dirichlet(alpha, rng);
    REQUIRE(p.size() == k);
    double total = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("dirichlet concentrates for large alpha") {
  SeededRng rng(14);
  const std::vector<double> alpha{1e6, 1e6};
  int close = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_dirichlet(alpha, rng);
    close += std::abs(p[0] - 0.5) < 0.01 && std::abs(p[1] - 0.5) < 0.01;
  }
  CHECK(close >= 9990);
}

TEST_CASE("dirichlet is sparse for small alpha") {
  SeededRng rng(15);
  const std::vector<double> alpha{0.05, 0.05};
  int sparse = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_dirichlet(alpha, rng);
    sparse += std::max(p[0], p[1]) > 0.9;
  }
  CHECK(sparse >= 7000);
}

TEST_CASE("dirichlet mean matches alpha") {
  SeededRng rng(16);
  const std::vector<double> alpha{0.5, 1.0, 2.5};
  std::vector<double> mean(3, 0.0);
  constexpr int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_dirichlet(alpha, rng);
    for (std::size_t k = 0; k < 3; ++k) {
      mean[k] += p[k] / n;
    }
  }
  CHECK(mean[0] == doctest::Approx(0.125).epsilon(0.05));
  CHECK(mean[1] == doctest::Approx(0.25).epsilon(0.05));
  CHECK(mean[2] == doctest::Approx(0.625).epsilon(0.05));
}

TEST_CASE("lognormal median is one") {
  SeededRng rng(17);
  std::vector<double> draws(100000);
  for (double& d : draws) {
    d = sample_lognormal(1.0, rng);
    REQUIRE(d > 0.0);
  }
  std::nth_element(draws.begin(), draws.begin() + 50000, draws.end());
  CHECK(std::abs(draws[50000] - 1.0) < 0.03);

  SeededRng narrow(18);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(sample_lognormal(1e-9, narrow) - 1.0) < 1e-7);
  }
}
