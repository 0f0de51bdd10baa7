#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "temp_heal/rng.hpp"
#include "temp_heal/sampling.hpp"

namespace temp {

// A pure-cluster instance: every cluster is wholly safe (q=0) or wholly
// unsafe (q=1). Sizes are kept in descending order.
struct SyntheticInstance {
  std::vector<std::size_t> sizes;
  std::vector<double> unsafe_fractions;
  double p_c = 0.0;
  bool majority_holds = false;
};

// Strict majority ordering: at least one unsafe cluster, no fewer safe than
// unsafe clusters, and every safe cluster strictly larger than every unsafe
// one.
bool satisfies_majority(std::span<const std::size_t> sizes, std::span<const double> unsafe_fractions);

SyntheticInstance make_instance(std::vector<std::size_t> sizes, std::vector<double> unsafe_fractions);

struct InstanceGenerator {
  std::size_t max_clusters = 10;
  std::size_t max_size = 100;
  std::size_t max_attempts = 10000;
};

// Instance i depends only on (seed, i).
std::vector<SyntheticInstance> generate_instances(std::size_t count, std::size_t max_clusters, std::uint64_t seed,
                                                  bool enforce_majority, const InstanceGenerator& gen = {});

double analytic_unsafe_rate(const SyntheticInstance& instance, const SharpenerConfig& cfg);

// Fraction of `trials` draws that land on an unsafe response.
double monte_carlo_unsafe_rate(std::span<const double> probabilities, std::span<const double> unsafe_fractions,
                               std::size_t trials, Rng& rng);

// |empirical - p| <= 3 sqrt(p (1 - p) / trials); degenerate p demands equality.
bool within_three_sigma(double empirical, double p, std::size_t trials);

struct Theorem1Entry {
  double p_c = 0.0;
  double analytic = 0.0;
  bool rational_equal = false;  // sum N_j q_j / sum N_j compared as integers
  bool analytic_pass = false;   // |analytic - p_c| <= 1e-12
  double monte_carlo = 0.0;
  bool monte_carlo_pass = false;
};

Theorem1Entry check_theorem1(const SyntheticInstance& instance, std::size_t trials, std::uint64_t seed);

struct Theorem2Entry {
  double p_c = 0.0;
  double p_hat = 0.0;
  bool strictly_lower = false;
  bool zero_when_wta = true;  // only meaningful for wta
  bool pass = false;
  std::optional<double> monte_carlo;
  bool monte_carlo_pass = true;
};

// Requires the majority ordering and a non-random sharpener. trials=0 skips
// the Monte Carlo leg.
Theorem2Entry check_theorem2(const SyntheticInstance& instance, const SharpenerConfig& cfg, std::size_t trials = 0,
                             std::uint64_t seed = 0);

struct Counterexample {
  SyntheticInstance instance;
  double p_hat = 0.0;
  std::size_t draws = 0;
};

// Random search for an instance with P_hat > P_c. Only instances that break
// the majority ordering are tried unless `search_majority` is set.
std::optional<Counterexample> counterexample_probe(const SharpenerConfig& cfg, std::uint64_t seed,
                                                   std::size_t max_draws = 10000, std::size_t max_clusters = 10,
                                                   bool search_majority = false);

struct VerifyConfig {
  std::size_t instances = 1000;
  std::size_t max_clusters = 10;
  std::size_t trials = 100000;
  std::vector<double> taus = {0.1, 0.25, 0.5};
  Logits logits = Logits::counts;
  std::uint64_t seed = 7;
  std::size_t probe_draws = 10000;
};

struct TauTally {
  double tau = 0.0;
  std::size_t pass = 0;
};

struct TheoremVerdict {
  std::size_t instance_count = 0;
  std::size_t theorem1_analytic_pass = 0;
  std::size_t theorem1_rational_pass = 0;
  std::size_t theorem1_monte_carlo_pass = 0;
  std::vector<TauTally> theorem2_exp;
  std::size_t theorem2_wta_pass = 0;
  std::size_t monte_carlo_pairs = 0;
  std::size_t monte_carlo_agree = 0;
  std::optional<Counterexample> wta_counterexample;
  std::optional<Counterexample> exp_counterexample;  // at the smallest tau
  std::optional<Counterexample> majority_counterexample;  // expected empty

  struct Row {
    double p_c = 0.0;
    double random = 0.0;
    std::vector<double> exp;
    double wta = 0.0;
  };
  std::vector<Row> rows;
  std::vector<double> taus;

  std::string to_json() const;
  std::string to_csv() const;
};

TheoremVerdict verify_theorems(const VerifyConfig& cfg, unsigned threads = 1);

}  // namespace temp
