#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "temp_heal/clustering.hpp"
#include "temp_heal/healing.hpp"
#include "temp_heal/metrics.hpp"
#include "temp_heal/pollution.hpp"
#include "temp_heal/synthetic.hpp"

namespace temp {

// Parses "1..7", "1,3,5" or a single integer.
std::vector<std::size_t> parse_int_range(std::string_view text);

// Shared experiment fixture: generate a clean corpus, pollute it, cluster it.
struct SweepFixture {
  GeneratorConfig generator;
  PollutionConfig pollution;
  DensityParams context_params;
  DensityParams content_params;
};

struct PollutedSetup {
  Corpus corpus;
  ClusterModel model;
  PollutionReport raw;
};

PollutedSetup prepare_polluted(const SweepFixture& fixture, double fraction, std::uint64_t seed, unsigned threads);

struct BoundaryTrial {
  double fraction = 0.0;
  std::size_t trial = 0;
  double dpr_raw = 0.0, rpr_raw = 0.0, dpr_healed = 0.0, rpr_healed = 0.0;
};

struct BoundarySummary {
  double fraction = 0.0;
  double dpr_raw = 0.0, rpr_raw = 0.0, dpr_healed = 0.0, rpr_healed = 0.0;
  double var_dpr_raw = 0.0, var_rpr_raw = 0.0, var_dpr_healed = 0.0, var_rpr_healed = 0.0;
};

struct BoundarySweep {
  std::vector<BoundaryTrial> trials;
  std::vector<BoundarySummary> summary;

  std::string trials_csv() const;
  std::string summary_csv() const;
};

// For each fraction and trial: generate, pollute, cluster, heal everything,
// inspect before and after. Trial seeds derive from (seed, fraction, trial).
BoundarySweep boundary_sweep(const SweepFixture& fixture, const std::vector<double>& fractions,
                             const HealOptions& healer, std::size_t trials, std::uint64_t seed, unsigned threads = 1);

struct SweepPoint {
  std::size_t x = 0;  // stage count or target count
  double tau = 0.0;
  MetricReport metrics;
  double head_share = 0.0;  // share of pseudo-label targets drawn from content rank 0
};

std::string sweep_points_csv(std::string_view x_name, const std::vector<SweepPoint>& points);

// Healed output for a run of S tempering stages uses the final stage
// temperature tau0 * alpha^(S-1); head_share is measured on the final stage's
// pseudo-label dataset.
std::vector<SweepPoint> tempering_sweep(const SweepFixture& fixture, double fraction, const SharpenerConfig& sharpener,
                                        double tau0, double alpha, const std::vector<std::size_t>& stage_counts,
                                        std::uint64_t seed, unsigned threads = 1);

// Healed output with M pseudo-label targets per response (plurality healer).
std::vector<SweepPoint> target_sweep(const SweepFixture& fixture, double fraction, const SharpenerConfig& sharpener,
                                     const std::vector<std::size_t>& target_counts, std::uint64_t seed,
                                     unsigned threads = 1);

// Largest |metric(x) - metric(anchor)| over points with x > anchor, taken
// over BLEU-4, DIST-2 and RPR.
double plateau_deviation(const std::vector<SweepPoint>& points, std::size_t anchor);

}  // namespace temp
