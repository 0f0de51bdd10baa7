#include "temp_heal/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

#include <gtest/gtest.h>

#include "temp_heal/parallel.hpp"

namespace temp {
namespace {

TEST(Rng, Fnv1aMatchesPublishedVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, SplitmixMatchesReferenceSequence) {
  // First two outputs of the reference splitmix64 generator seeded with 0.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(0x9e3779b97f4a7c15ULL), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, DerivedSeedsSeparateLabels) {
  EXPECT_NE(derive_seed(7, "ex000001"), derive_seed(7, "ex000002"));
  EXPECT_NE(derive_seed(7, "ex000001"), derive_seed(8, "ex000001"));
  EXPECT_EQ(derive_seed(7, "ex000001"), derive_seed(7, "ex000001"));
  EXPECT_NE(derive_seed(7, std::uint64_t{0}), derive_seed(7, std::uint64_t{1}));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, UniformIndexStaysInRangeAndCoversIt) {
  Rng rng(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++hits[k];
  }
  // Each bucket is Binomial(70000, 1/7): 3 sigma is about 280.
  for (int h : hits) EXPECT_NEAR(h, 10000, 300);
}

TEST(Rng, Uniform01InUnitInterval) {
  Rng rng(2);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 3 * std::sqrt(1.0 / 12 / 100000));
}

TEST(Rng, CategoricalNeverReturnsZeroMass) {
  Rng rng(3);
  const std::vector<double> p = {0.0, 0.5, 0.0, 0.5, 0.0};
  for (int i = 0; i < 10000; ++i) {
    const auto k = rng.categorical(p);
    EXPECT_TRUE(k == 1 || k == 3);
  }
}

TEST(Rng, CategoricalMatchesProbabilities) {
  Rng rng(4);
  const std::vector<double> p = {0.7, 0.2, 0.1};
  std::vector<int> hits(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++hits[rng.categorical(p)];
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(hits[k] / double(n), p[k], 3 * std::sqrt(p[k] * (1 - p[k]) / n));
  }
}

TEST(Rng, NormalMomentsMatch) {
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 0.5);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 2.0, 4 * 0.5 / std::sqrt(n));
  EXPECT_NEAR(sq / n - mean * mean, 0.25, 0.01);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  auto run = [](unsigned threads) {
    std::vector<std::uint64_t> out(1000);
    parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = Rng(derive_seed(9, i)).next(); });
    return out;
  };
  EXPECT_EQ(run(1), run(8));
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Parallel, ResolveThreadsHonoursRequestAndEnvironment) {
  EXPECT_EQ(resolve_threads(3), 3u);
  ::setenv("TEMP_HEAL_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(0), 5u);
  ::unsetenv("TEMP_HEAL_THREADS");
  EXPECT_GE(resolve_threads(0), 1u);
}

}  // namespace
}  // namespace temp
