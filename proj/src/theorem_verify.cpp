#include "temp_heal/theorem_verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "format.hpp"
#include "temp_heal/error.hpp"
#include "temp_heal/parallel.hpp"

namespace temp {

using nlohmann::json;

bool satisfies_majority(std::span<const std::size_t> sizes, std::span<const double> unsafe_fractions) {
  if (sizes.size() != unsafe_fractions.size()) return false;
  std::size_t safe_count = 0, unsafe_count = 0;
  std::size_t min_safe = std::numeric_limits<std::size_t>::max();
  std::size_t max_unsafe = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (unsafe_fractions[j] == 0.0) {
      ++safe_count;
      min_safe = std::min(min_safe, sizes[j]);
    } else if (unsafe_fractions[j] == 1.0) {
      ++unsafe_count;
      max_unsafe = std::max(max_unsafe, sizes[j]);
    } else {
      return false;  // mixed clusters are outside the ordering
    }
  }
  return unsafe_count >= 1 && safe_count >= unsafe_count && min_safe > max_unsafe;
}

SyntheticInstance make_instance(std::vector<std::size_t> sizes, std::vector<double> unsafe_fractions) {
  if (sizes.size() != unsafe_fractions.size() || sizes.empty()) {
    throw Error("invalid_argument", "instance sizes and unsafe fractions must align");
  }
  // Sort clusters by descending size, carrying q along; stable for equal sizes.
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sizes[a] > sizes[b]; });
  SyntheticInstance inst;
  for (auto o : order) {
    inst.sizes.push_back(sizes[o]);
    inst.unsafe_fractions.push_back(unsafe_fractions[o]);
  }
  const double total = static_cast<double>(std::accumulate(inst.sizes.begin(), inst.sizes.end(), std::size_t{0}));
  for (std::size_t j = 0; j < inst.sizes.size(); ++j) {
    inst.p_c += static_cast<double>(inst.sizes[j]) / total * inst.unsafe_fractions[j];
  }
  inst.majority_holds = satisfies_majority(inst.sizes, inst.unsafe_fractions);
  return inst;
}

namespace {

SyntheticInstance random_instance(Rng& rng, std::size_t max_clusters, bool enforce_majority,
                                  const InstanceGenerator& gen) {
  const std::size_t k = 2 + rng.uniform_index(max_clusters - 1);
  for (std::size_t attempt = 0; attempt < gen.max_attempts; ++attempt) {
    std::vector<std::size_t> sizes(k);
    for (auto& s : sizes) s = 1 + rng.uniform_index(gen.max_size);
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    std::vector<double> q(k, 0.0);
    if (enforce_majority) {
      // The smallest u clusters are unsafe; they must sit strictly below the safe ones.
      const std::size_t u = 1 + rng.uniform_index(k / 2);
      if (sizes[k - u - 1] <= sizes[k - u]) continue;
      for (std::size_t j = k - u; j < k; ++j) q[j] = 1.0;
    } else {
      for (auto& x : q) x = rng.uniform_index(2) == 1 ? 1.0 : 0.0;
    }
    return make_instance(std::move(sizes), std::move(q));
  }
  throw Error("generation_failed", "instance generator exhausted its attempts");
}

}  // namespace

std::vector<SyntheticInstance> generate_instances(std::size_t count, std::size_t max_clusters, std::uint64_t seed,
                                                  bool enforce_majority, const InstanceGenerator& gen) {
  if (count < 1) throw Error("invalid_argument", "instance count must be at least 1");
  if (max_clusters < 2) throw Error("invalid_argument", "max_clusters must be at least 2");
  std::vector<SyntheticInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(random_instance(rng, max_clusters, enforce_majority, gen));
  }
  return out;
}

double analytic_unsafe_rate(const SyntheticInstance& instance, const SharpenerConfig& cfg) {
  const auto sharp = sharpen(frequencies_from_sizes(instance.sizes), cfg);
  return expected_unsafe_rate(sharp, instance.unsafe_fractions);
}

double monte_carlo_unsafe_rate(std::span<const double> probabilities, std::span<const double> unsafe_fractions,
                               std::size_t trials, Rng& rng) {
  if (trials == 0) throw Error("invalid_argument", "Monte Carlo needs at least one trial");
  std::vector<double> cumulative(probabilities.size());
  std::partial_sum(probabilities.begin(), probabilities.end(), cumulative.begin());
  std::size_t unsafe = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double u = rng.uniform01() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    const double q = unsafe_fractions[j];
    if (q >= 1.0 || (q > 0.0 && rng.uniform01() < q)) ++unsafe;
  }
  return static_cast<double>(unsafe) / static_cast<double>(trials);
}

bool within_three_sigma(double empirical, double p, std::size_t trials) {
  if (p <= 0.0 || p >= 1.0) return empirical == p;
  const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return std::abs(empirical - p) <= 3.0 * sigma;
}

Theorem1Entry check_theorem1(const SyntheticInstance& instance, std::size_t trials, std::uint64_t seed) {
  Theorem1Entry e;
  e.p_c = instance.p_c;
  SharpenerConfig random_cfg;
  random_cfg.kind = SharpenerKind::random;
  const auto sharp = sharpen(frequencies_from_sizes(instance.sizes), random_cfg);
  e.analytic = expected_unsafe_rate(sharp, instance.unsafe_fractions);
  e.analytic_pass = std::abs(e.analytic - e.p_c) <= 1e-12;

  // For pure clusters both sides reduce to (sum of unsafe sizes) / (sum of sizes).
  std::size_t unsafe_mass = 0, total = 0, sampled_unsafe = 0;
  bool pure = true;
  for (std::size_t j = 0; j < instance.sizes.size(); ++j) {
    total += instance.sizes[j];
    const double q = instance.unsafe_fractions[j];
    if (q != 0.0 && q != 1.0) pure = false;
    if (q == 1.0) {
      unsafe_mass += instance.sizes[j];
      // random sampling keeps each cluster's mass N_j / total
      sampled_unsafe += static_cast<std::size_t>(std::llround(sharp.probabilities[j] * static_cast<double>(total)));
    }
  }
  e.rational_equal = pure && sampled_unsafe == unsafe_mass;

  if (trials > 0) {
    Rng rng(seed);
    e.monte_carlo = monte_carlo_unsafe_rate(sharp.probabilities, instance.unsafe_fractions, trials, rng);
    e.monte_carlo_pass = within_three_sigma(e.monte_carlo, e.p_c, trials);
  }
  return e;
}

Theorem2Entry check_theorem2(const SyntheticInstance& instance, const SharpenerConfig& cfg, std::size_t trials,
                             std::uint64_t seed) {
  if (!instance.majority_holds) throw Error("precondition", "theorem-2 check needs the majority ordering");
  if (cfg.kind == SharpenerKind::random) throw Error("precondition", "theorem-2 check needs a sharpening function");
  Theorem2Entry e;
  e.p_c = instance.p_c;
  const auto sharp = sharpen(frequencies_from_sizes(instance.sizes), cfg);
  e.p_hat = expected_unsafe_rate(sharp, instance.unsafe_fractions);
  e.strictly_lower = e.p_hat < e.p_c;
  if (cfg.kind == SharpenerKind::wta) e.zero_when_wta = e.p_hat == 0.0;
  e.pass = e.strictly_lower && e.zero_when_wta;
  if (trials > 0) {
    Rng rng(seed);
    e.monte_carlo = monte_carlo_unsafe_rate(sharp.probabilities, instance.unsafe_fractions, trials, rng);
    e.monte_carlo_pass = within_three_sigma(*e.monte_carlo, e.p_hat, trials);
  }
  return e;
}

std::optional<Counterexample> counterexample_probe(const SharpenerConfig& cfg, std::uint64_t seed,
                                                   std::size_t max_draws, std::size_t max_clusters,
                                                   bool search_majority) {
  InstanceGenerator gen;
  for (std::size_t draw = 0; draw < max_draws; ++draw) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(draw)));
    auto inst = random_instance(rng, max_clusters, search_majority, gen);
    if (inst.majority_holds != search_majority) continue;
    const double p_hat = analytic_unsafe_rate(inst, cfg);
    if (p_hat > inst.p_c) return Counterexample{std::move(inst), p_hat, draw + 1};
  }
  return std::nullopt;
}

TheoremVerdict verify_theorems(const VerifyConfig& cfg, unsigned threads) {
  const auto pool = generate_instances(cfg.instances, cfg.max_clusters, derive_seed(cfg.seed, "theorem1"), false);
  const auto majority = generate_instances(cfg.instances, cfg.max_clusters, derive_seed(cfg.seed, "theorem2"), true);

  SharpenerConfig random_cfg;
  random_cfg.kind = SharpenerKind::random;
  SharpenerConfig wta_cfg;
  wta_cfg.kind = SharpenerKind::wta;
  std::vector<SharpenerConfig> exp_cfgs;
  for (double tau : cfg.taus) {
    SharpenerConfig c;
    c.kind = SharpenerKind::exp;
    c.tau = tau;
    c.logits = cfg.logits;
    exp_cfgs.push_back(c);
  }

  struct PerInstance {
    Theorem1Entry t1;
    std::vector<Theorem2Entry> exp;
    Theorem2Entry wta;
    TheoremVerdict::Row row;
  };
  std::vector<PerInstance> per(cfg.instances);
  const std::uint64_t mc_seed = derive_seed(cfg.seed, "monte_carlo");
  parallel_for(cfg.instances, threads, [&](std::size_t i) {
    auto& slot = per[i];
    const std::uint64_t s = derive_seed(mc_seed, static_cast<std::uint64_t>(i));
    slot.t1 = check_theorem1(pool[i], cfg.trials, derive_seed(s, "random"));
    for (std::size_t t = 0; t < exp_cfgs.size(); ++t) {
      slot.exp.push_back(check_theorem2(majority[i], exp_cfgs[t], cfg.trials, derive_seed(s, t)));
    }
    slot.wta = check_theorem2(majority[i], wta_cfg, cfg.trials, derive_seed(s, "wta"));
    slot.row.p_c = majority[i].p_c;
    slot.row.random = analytic_unsafe_rate(majority[i], random_cfg);
    for (const auto& e : slot.exp) slot.row.exp.push_back(e.p_hat);
    slot.row.wta = slot.wta.p_hat;
  });

  TheoremVerdict v;
  v.instance_count = cfg.instances;
  v.taus = cfg.taus;
  for (double tau : cfg.taus) v.theorem2_exp.push_back({tau, 0});
  for (const auto& p : per) {
    v.theorem1_analytic_pass += p.t1.analytic_pass ? 1 : 0;
    v.theorem1_rational_pass += p.t1.rational_equal ? 1 : 0;
    v.theorem1_monte_carlo_pass += p.t1.monte_carlo_pass ? 1 : 0;
    for (std::size_t t = 0; t < p.exp.size(); ++t) {
      v.theorem2_exp[t].pass += p.exp[t].pass ? 1 : 0;
      v.monte_carlo_agree += p.exp[t].monte_carlo_pass ? 1 : 0;
    }
    v.theorem2_wta_pass += p.wta.pass ? 1 : 0;
    v.monte_carlo_agree += (p.wta.monte_carlo_pass ? 1 : 0) + (p.t1.monte_carlo_pass ? 1 : 0);
    v.monte_carlo_pairs += p.exp.size() + 2;
    v.rows.push_back(p.row);
  }
  if (cfg.trials == 0) v.monte_carlo_pairs = v.monte_carlo_agree = 0;

  v.wta_counterexample = counterexample_probe(wta_cfg, derive_seed(cfg.seed, "probe_wta"), cfg.probe_draws,
                                              cfg.max_clusters);
  if (!exp_cfgs.empty()) {
    const auto smallest = *std::min_element(exp_cfgs.begin(), exp_cfgs.end(),
                                            [](const auto& a, const auto& b) { return a.tau < b.tau; });
    v.exp_counterexample = counterexample_probe(smallest, derive_seed(cfg.seed, "probe_exp"), cfg.probe_draws,
                                                cfg.max_clusters);
  }
  v.majority_counterexample = counterexample_probe(wta_cfg, derive_seed(cfg.seed, "probe_majority"),
                                                   cfg.probe_draws, cfg.max_clusters, true);
  return v;
}

namespace {

json counterexample_json(const std::optional<Counterexample>& c) {
  if (!c) return nullptr;
  return json{{"sizes", c->instance.sizes},
              {"unsafe_fractions", c->instance.unsafe_fractions},
              {"p_c", c->instance.p_c},
              {"p_hat", c->p_hat},
              {"draws", c->draws}};
}

}  // namespace

std::string TheoremVerdict::to_json() const {
  json exp = json::array();
  for (const auto& t : theorem2_exp) {
    exp.push_back({{"tau", t.tau}, {"pass", t.pass}, {"total", instance_count}});
  }
  json doc = {
      {"instances", instance_count},
      {"theorem1",
       {{"analytic_pass", theorem1_analytic_pass},
        {"rational_pass", theorem1_rational_pass},
        {"monte_carlo_pass", theorem1_monte_carlo_pass}}},
      {"theorem2", {{"exp", std::move(exp)}, {"wta_pass", theorem2_wta_pass}, {"total", instance_count}}},
      {"monte_carlo_agreement", {{"pairs", monte_carlo_pairs}, {"within_3_sigma", monte_carlo_agree}}},
      {"counterexample",
       {{"wta", counterexample_json(wta_counterexample)},
        {"exp", counterexample_json(exp_counterexample)},
        {"under_majority", counterexample_json(majority_counterexample)}}},
  };
  return doc.dump(2) + "\n";
}

std::string TheoremVerdict::to_csv() const {
  std::ostringstream out;
  out << "instance,p_c,p_hat_random";
  for (double t : taus) out << ",p_hat_exp_tau" << format_double(t);
  out << ",p_hat_wta\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i << ',' << format_double(rows[i].p_c) << ',' << format_double(rows[i].random);
    for (double e : rows[i].exp) out << ',' << format_double(e);
    out << ',' << format_double(rows[i].wta) << '\n';
  }
  return out.str();
}

}  // namespace temp
