#include "temp_heal/sweeps.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <sstream>

#include "format.hpp"
#include "temp_heal/error.hpp"
#include "temp_heal/parallel.hpp"

namespace temp {

namespace {

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("invalid_config", "not a non-negative integer: \"" + std::string(s) + "\"");
  }
  return v;
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

// Sample variance (n - 1); zero for a single trial.
MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar mv;
  if (xs.empty()) return mv;
  for (double x : xs) mv.mean += x;
  mv.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return mv;
  for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
  mv.var /= static_cast<double>(xs.size() - 1);
  return mv;
}

std::vector<TaggedResponse> tag(const std::vector<HealResult>& results, const Corpus& sources) {
  std::vector<TaggedResponse> out;
  out.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) out.push_back({sources[i].dialogue_id, results[i].healed_response});
  return out;
}

}  // namespace

std::vector<std::size_t> parse_int_range(std::string_view text) {
  std::vector<std::size_t> out;
  if (auto dots = text.find(".."); dots != std::string_view::npos) {
    const std::size_t lo = parse_size(text.substr(0, dots));
    const std::size_t hi = parse_size(text.substr(dots + 2));
    if (hi < lo) throw Error("invalid_config", "empty range \"" + std::string(text) + "\"");
    for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(parse_size(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

PollutedSetup prepare_polluted(const SweepFixture& fixture, double fraction, std::uint64_t seed, unsigned threads) {
  GeneratorConfig gen = fixture.generator;
  gen.unsafe_fraction = 0.0;
  gen.seed = derive_seed(seed, "corpus");
  PollutionConfig pol = fixture.pollution;
  pol.fraction = fraction;
  pol.seed = derive_seed(seed, "pollute");
  auto polluted = pollute(generate(gen).corpus, pol);
  auto model = build_cluster_model(polluted.corpus, fixture.context_params, fixture.content_params, threads);
  auto raw = inspect(polluted.corpus, pol.wedge);
  return PollutedSetup{std::move(polluted.corpus), std::move(model), raw};
}

BoundarySweep boundary_sweep(const SweepFixture& fixture, const std::vector<double>& fractions,
                             const HealOptions& healer, std::size_t trials, std::uint64_t seed, unsigned threads) {
  if (!std::is_sorted(fractions.begin(), fractions.end())) {
    throw Error("invalid_config", "boundary sweep fractions must be sorted ascending");
  }
  if (trials < 1) throw Error("invalid_config", "boundary sweep needs at least one trial");
  BoundarySweep sweep;
  sweep.trials.resize(fractions.size() * trials);
  parallel_for(sweep.trials.size(), threads, [&](std::size_t k) {
    const double fraction = fractions[k / trials];
    const std::size_t trial = k % trials;
    const std::uint64_t trial_seed =
        derive_seed(derive_seed(seed, std::bit_cast<std::uint64_t>(fraction)), static_cast<std::uint64_t>(trial));
    const auto setup = prepare_polluted(fixture, fraction, trial_seed, 1);
    HealOptions opts = healer;
    opts.seed = derive_seed(trial_seed, "heal");
    const auto results = heal_corpus(setup.corpus, setup.model, setup.corpus, opts, HealScope::all, 1);
    const auto healed = inspect(tag(results, setup.corpus), fixture.pollution.wedge);
    sweep.trials[k] = BoundaryTrial{fraction, trial, setup.raw.dpr, setup.raw.rpr, healed.dpr, healed.rpr};
  });
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    std::vector<double> dr, rr, dh, rh;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto& row = sweep.trials[f * trials + t];
      dr.push_back(row.dpr_raw);
      rr.push_back(row.rpr_raw);
      dh.push_back(row.dpr_healed);
      rh.push_back(row.rpr_healed);
    }
    const auto a = mean_var(dr), b = mean_var(rr), c = mean_var(dh), d = mean_var(rh);
    sweep.summary.push_back({fractions[f], a.mean, b.mean, c.mean, d.mean, a.var, b.var, c.var, d.var});
  }
  return sweep;
}

std::string BoundarySweep::trials_csv() const {
  std::ostringstream out;
  out << "fraction,trial,dpr_raw,rpr_raw,dpr_healed,rpr_healed\n";
  for (const auto& r : trials) {
    out << format_double(r.fraction) << ',' << r.trial << ',' << format_double(r.dpr_raw) << ','
        << format_double(r.rpr_raw) << ',' << format_double(r.dpr_healed) << ',' << format_double(r.rpr_healed)
        << '\n';
  }
  return out.str();
}

std::string BoundarySweep::summary_csv() const {
  std::ostringstream out;
  out << "fraction,dpr_raw_mean,rpr_raw_mean,dpr_healed_mean,rpr_healed_mean,"
         "dpr_raw_var,rpr_raw_var,dpr_healed_var,rpr_healed_var\n";
  for (const auto& s : summary) {
    for (double v : {s.fraction, s.dpr_raw, s.rpr_raw, s.dpr_healed, s.rpr_healed, s.var_dpr_raw, s.var_rpr_raw,
                     s.var_dpr_healed}) {
      out << format_double(v) << ',';
    }
    out << format_double(s.var_rpr_healed) << '\n';
  }
  return out.str();
}

std::string sweep_points_csv(std::string_view x_name, const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << x_name << ",tau,safety,dpr,rpr,bleu4,dist1,dist2,entropy,avg_len,action_preservation,head_share\n";
  for (const auto& p : points) {
    const auto& m = p.metrics;
    out << p.x;
    for (double v : {p.tau, m.safety, m.dpr, m.rpr, m.bleu4, m.dist1, m.dist2, m.entropy, m.avg_len}) {
      out << ',' << format_double(v);
    }
    out << ',';
    if (m.action_preservation) out << format_double(*m.action_preservation);
    out << ',' << format_double(p.head_share) << '\n';
  }
  return out.str();
}

namespace {

double head_share(const std::vector<PseudoLabelRecord>& records) {
  std::size_t head = 0, total = 0;
  for (const auto& r : records) {
    for (const auto& t : r.targets) {
      head += t.content_id == 0 ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(head) / static_cast<double>(total);
}

}  // namespace

std::vector<SweepPoint> tempering_sweep(const SweepFixture& fixture, double fraction, const SharpenerConfig& sharpener,
                                        double tau0, double alpha, const std::vector<std::size_t>& stage_counts,
                                        std::uint64_t seed, unsigned threads) {
  const auto setup = prepare_polluted(fixture, fraction, seed, threads);
  std::vector<SweepPoint> points;
  for (std::size_t stages : stage_counts) {
    TemperingSchedule schedule{tau0, alpha, stages};
    const auto datasets = run_tempering(setup.corpus, setup.model, sharpener, schedule, 1, derive_seed(seed, "temper"),
                                        threads);
    HealOptions opts;
    opts.sharpener = sharpener;
    opts.sharpener.tau = schedule.tau_at(stages - 1);
    opts.seed = derive_seed(seed, "heal");
    opts.max_distance = fixture.context_params.epsilon;
    const auto results = heal_corpus(setup.corpus, setup.model, setup.corpus, opts, HealScope::all, threads);
    SweepPoint p;
    p.x = stages;
    p.tau = opts.sharpener.tau;
    p.metrics = evaluate(results, setup.corpus, fixture.pollution.wedge, &setup.model);
    p.head_share = head_share(datasets.back());
    points.push_back(p);
  }
  return points;
}

std::vector<SweepPoint> target_sweep(const SweepFixture& fixture, double fraction, const SharpenerConfig& sharpener,
                                     const std::vector<std::size_t>& target_counts, std::uint64_t seed,
                                     unsigned threads) {
  const auto setup = prepare_polluted(fixture, fraction, seed, threads);
  std::vector<SweepPoint> points;
  for (std::size_t m : target_counts) {
    if (m < 1) throw Error("invalid_config", "target counts must be at least 1");
    HealOptions opts;
    opts.sharpener = sharpener;
    opts.num_targets = m;
    opts.seed = derive_seed(seed, "heal");
    opts.max_distance = fixture.context_params.epsilon;
    const auto results = heal_corpus(setup.corpus, setup.model, setup.corpus, opts, HealScope::all, threads);
    const auto records = run_pseudo_rephrasing(setup.corpus, setup.model, sharpener, m, derive_seed(seed, "sample"), 0,
                                               threads);
    SweepPoint p;
    p.x = m;
    p.tau = sharpener.tau;
    p.metrics = evaluate(results, setup.corpus, fixture.pollution.wedge, &setup.model);
    p.head_share = head_share(records);
    points.push_back(p);
  }
  return points;
}

double plateau_deviation(const std::vector<SweepPoint>& points, std::size_t anchor) {
  const auto it = std::find_if(points.begin(), points.end(), [&](const SweepPoint& p) { return p.x == anchor; });
  if (it == points.end()) throw Error("invalid_argument", "plateau anchor not among the sweep points");
  double worst = 0.0;
  for (const auto& p : points) {
    if (p.x <= anchor) continue;
    worst = std::max({worst, std::abs(p.metrics.bleu4 - it->metrics.bleu4),
                      std::abs(p.metrics.dist2 - it->metrics.dist2), std::abs(p.metrics.rpr - it->metrics.rpr)});
  }
  return worst;
}

}  // namespace temp
