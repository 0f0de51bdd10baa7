#include "temp_heal/theorem_verify.hpp"

#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "temp_heal/error.hpp"

namespace temp {
namespace {

SharpenerConfig kind_at(SharpenerKind kind, double tau = 1.0, Logits logits = Logits::counts) {
  SharpenerConfig cfg;
  cfg.kind = kind;
  cfg.tau = tau;
  cfg.logits = logits;
  return cfg;
}

TEST(Majority, ExecutableReading) {
  const std::vector<std::size_t> sizes = {10, 8, 3};
  EXPECT_TRUE(satisfies_majority(sizes, std::vector<double>{0, 0, 1}));
  EXPECT_FALSE(satisfies_majority(sizes, std::vector<double>{0, 1, 1}));  // more unsafe than safe
  EXPECT_FALSE(satisfies_majority(sizes, std::vector<double>{1, 0, 0}));  // unsafe head
  EXPECT_FALSE(satisfies_majority(sizes, std::vector<double>{0, 0, 0}));  // nothing unsafe
  EXPECT_FALSE(satisfies_majority(sizes, std::vector<double>{0, 0, 0.5}));
  const std::vector<std::size_t> tied = {5, 5};
  EXPECT_FALSE(satisfies_majority(tied, std::vector<double>{0, 1}));
}

TEST(MakeInstance, SortsAndComputesCorpusRate) {
  const auto inst = make_instance({1, 6, 3}, {1, 0, 0});
  EXPECT_EQ(inst.sizes, (std::vector<std::size_t>{6, 3, 1}));
  EXPECT_EQ(inst.unsafe_fractions, (std::vector<double>{0, 0, 1}));
  EXPECT_DOUBLE_EQ(inst.p_c, 0.1);
  EXPECT_TRUE(inst.majority_holds);
}

TEST(Theorem1, RandomSharpenerReproducesCorpusRate) {
  const auto inst = make_instance({6, 3, 1}, {0, 0, 1});
  EXPECT_DOUBLE_EQ(analytic_unsafe_rate(inst, kind_at(SharpenerKind::random)), 0.1);
  const auto entry = check_theorem1(inst, 100000, 3);
  EXPECT_TRUE(entry.analytic_pass);
  EXPECT_TRUE(entry.rational_equal);
  EXPECT_TRUE(entry.monte_carlo_pass);
}

TEST(Theorem1, HoldsOnRandomInstances) {
  const auto instances = generate_instances(300, 10, 5, false);
  for (const auto& inst : instances) {
    std::size_t unsafe = 0, total = 0;
    for (std::size_t j = 0; j < inst.sizes.size(); ++j) {
      total += inst.sizes[j];
      unsafe += inst.unsafe_fractions[j] == 1.0 ? inst.sizes[j] : 0;
    }
    const double exact = static_cast<double>(unsafe) / static_cast<double>(total);
    EXPECT_NEAR(analytic_unsafe_rate(inst, kind_at(SharpenerKind::random)), exact, 1e-12);
    EXPECT_NEAR(inst.p_c, exact, 1e-12);
  }
}

TEST(Theorem2, SigmoidExampleUnderFrequencyLogits) {
  const auto inst = make_instance({9, 1}, {0, 1});
  const auto e = check_theorem2(inst, kind_at(SharpenerKind::exp, 0.1, Logits::frequencies));
  EXPECT_NEAR(e.p_hat, 3.3535013046647810388e-4, 1e-15);
  EXPECT_TRUE(e.strictly_lower);
  EXPECT_TRUE(e.pass);
}

TEST(Theorem2, WtaIsZeroAndExpIsLowerUnderMajority) {
  const auto instances = generate_instances(500, 10, 9, true);
  for (const auto& inst : instances) {
    ASSERT_TRUE(inst.majority_holds);
    EXPECT_EQ(check_theorem2(inst, kind_at(SharpenerKind::wta)).p_hat, 0.0);
    for (double tau : {0.1, 0.25, 0.5}) {
      const auto e = check_theorem2(inst, kind_at(SharpenerKind::exp, tau));
      EXPECT_TRUE(e.pass) << "tau " << tau;
    }
  }
}

TEST(Theorem2, MonteCarloAgreesWithAnalytic) {
  const auto inst = make_instance({40, 30, 20, 12}, {0, 0, 1, 1});
  const auto e = check_theorem2(inst, kind_at(SharpenerKind::exp, 10.0), 100000, 4);
  ASSERT_TRUE(e.monte_carlo.has_value());
  EXPECT_TRUE(e.monte_carlo_pass);
  EXPECT_GT(e.p_hat, 0.0);
}

TEST(Theorem2, Preconditions) {
  EXPECT_THROW(check_theorem2(make_instance({5, 6}, {0, 1}), kind_at(SharpenerKind::wta)), Error);
  EXPECT_THROW(check_theorem2(make_instance({6, 5}, {0, 1}), kind_at(SharpenerKind::random)), Error);
}

TEST(ThreeSigma, Bounds) {
  EXPECT_TRUE(within_three_sigma(0.5, 0.5, 100));
  EXPECT_TRUE(within_three_sigma(0.5 + 0.149, 0.5, 100));
  EXPECT_FALSE(within_three_sigma(0.5 + 0.151, 0.5, 100));
  EXPECT_TRUE(within_three_sigma(0.0, 0.0, 10));
  EXPECT_FALSE(within_three_sigma(0.01, 0.0, 10));
}

TEST(Generator, InstancesDependOnlyOnSeedAndIndex) {
  const auto a = generate_instances(50, 10, 3, true);
  const auto b = generate_instances(80, 10, 3, true);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sizes, b[i].sizes);
    EXPECT_EQ(a[i].unsafe_fractions, b[i].unsafe_fractions);
  }
  for (const auto& inst : b) {
    EXPECT_GE(inst.sizes.size(), 2u);
    EXPECT_LE(inst.sizes.size(), 10u);
    EXPECT_TRUE(std::is_sorted(inst.sizes.rbegin(), inst.sizes.rend()));
  }
}

TEST(Probe, FindsNonMajorityCounterexampleForWta) {
  const auto found = counterexample_probe(kind_at(SharpenerKind::wta), 1, 10000, 10);
  ASSERT_TRUE(found.has_value());
  EXPECT_FALSE(found->instance.majority_holds);
  EXPECT_GT(found->p_hat, found->instance.p_c);
  EXPECT_EQ(found->p_hat, 1.0);  // wta lands on an unsafe head
  EXPECT_LE(found->draws, 10000u);
}

TEST(Probe, NothingUnderMajority) {
  EXPECT_FALSE(counterexample_probe(kind_at(SharpenerKind::wta), 2, 2000, 10, true).has_value());
  EXPECT_FALSE(counterexample_probe(kind_at(SharpenerKind::exp, 0.1), 2, 2000, 10, true).has_value());
}

TEST(Verify, SmallRunReportsEverything) {
  VerifyConfig cfg;
  cfg.instances = 40;
  cfg.trials = 2000;
  cfg.probe_draws = 2000;
  const auto v = verify_theorems(cfg, 2);
  EXPECT_EQ(v.theorem1_analytic_pass, 40u);
  EXPECT_EQ(v.theorem2_wta_pass, 40u);
  for (const auto& t : v.theorem2_exp) EXPECT_EQ(t.pass, 40u);
  EXPECT_TRUE(v.wta_counterexample.has_value());
  EXPECT_FALSE(v.majority_counterexample.has_value());
  EXPECT_EQ(v.to_json(), verify_theorems(cfg, 1).to_json());

  const auto doc = oracle::Reader(v.to_json()).parse();
  EXPECT_EQ(doc.obj().at("instances").num(), 40.0);
  const auto csv = v.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "instance,p_c,p_hat_random,p_hat_exp_tau0.1,p_hat_exp_tau0.25,p_hat_exp_tau0.5,p_hat_wta");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
}

}  // namespace
}  // namespace temp
