#include "temp_heal/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "temp_heal/clustering.hpp"
#include "temp_heal/corpus.hpp"
#include "temp_heal/error.hpp"
#include "temp_heal/healing.hpp"
#include "temp_heal/metrics.hpp"
#include "temp_heal/parallel.hpp"
#include "temp_heal/pollution.hpp"
#include "temp_heal/rng.hpp"
#include "temp_heal/sampling.hpp"
#include "temp_heal/sweeps.hpp"
#include "temp_heal/synthetic.hpp"
#include "temp_heal/theorem_verify.hpp"

namespace temp::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
  return json{
      {"seed", 7},
      {"mode", "tod"},
      {"inputs", {{"corpus", ""}, {"embeddings", ""}, {"target", ""}, {"heal_results", ""}, {"model", ""}}},
      {"generator",
       {{"num_topics", 10},
        {"members_per_topic", 100},
        {"head_share", 0.6},
        {"tail_cluster_count", 4},
        {"unsafe_cluster_count", 1},
        {"unsafe_fraction", 0.0},
        {"preset", ""},
        {"embedding_dim", 16},
        {"noise_sigma", 0.05},
        {"turns_per_dialogue", 5}}},
      {"clustering",
       {{"context_epsilon", 0.22}, {"context_min_samples", 150}, {"content_epsilon", 0.22}, {"content_min_samples", 150}}},
      {"sampling",
       {{"kind", "exp"}, {"tau", 1.0}, {"epsilon_si", 1e-3}, {"si_floor", 1e-3}, {"logits", "counts"}, {"num_targets", 1}}},
      {"tempering", {{"tau0", 1.0}, {"alpha", 0.5}, {"stages", 4}}},
      {"healing", {{"scope", "all"}, {"max_distance", nullptr}, {"label_filter", false}}},
      {"pollution", {{"wedge", "[WEDGE]"}, {"fraction", 0.04}, {"position", "random_word_boundary"}}},
      {"verify",
       {{"instances", 1000},
        {"max_clusters", 10},
        {"trials", 100000},
        {"taus", {0.1, 0.25, 0.5}},
        {"logits", "counts"},
        {"probe_draws", 10000}}},
      {"sweep_boundary",
       {{"fractions", {0.01, 0.02, 0.04, 0.1, 0.2, 0.3}},
        {"trials", 5},
        {"kind", "wta"},
        {"tau", 1.0},
        {"logits", "counts"},
        {"num_targets", 1}}},
      {"sweep_tempering",
       {{"stages", "1..7"},
        {"fraction", 0.1},
        {"kind", "exp"},
        {"tau0", 0.5},
        {"alpha", 0.5},
        {"logits", "frequencies"},
        {"plateau_from", 4},
        {"plateau_tolerance", 0.02}}},
      {"sweep_targets", {{"targets", "1..7"}, {"fraction", 0.1}, {"kind", "exp"}, {"tau", 0.07}, {"logits", "frequencies"}}},
  };
}

namespace {

const std::vector<std::string> kCommands = {"generate", "cluster",  "sample", "temper",        "heal",
                                            "pollute",  "evaluate", "verify", "sweep-boundary", "sweep-tempering",
                                            "sweep-targets", "replay"};

// Convenience spellings for frequently used keys.
const std::map<std::string, std::string> kAliases = {
    {"corpus", "inputs.corpus"},         {"embeddings", "inputs.embeddings"},   {"target", "inputs.target"},
    {"heal-results", "inputs.heal_results"}, {"model", "inputs.model"},       {"instances", "verify.instances"},
    {"targets", "sweep_targets.targets"}, {"stages", "sweep_tempering.stages"}, {"fractions", "sweep_boundary.fractions"},
    {"preset", "generator.preset"},
};

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out.emplace_back(key, *it);
    }
  }
}

json::json_pointer pointer_for(const std::string& dotted) {
  std::string p;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    p += "/" + dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

json parse_scalar(const std::string& key, const std::string& text, const json& like) {
  auto bad = [&]() { return Error("invalid_config", "bad value \"" + text + "\" for " + key); };
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw bad();
  }
  if (like.is_number_integer()) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw bad();
    return v;
  }
  if (like.is_number_float()) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw bad();
      return v;
    } catch (const std::logic_error&) {
      throw bad();
    }
  }
  if (like.is_string()) return text;
  if (like.is_array()) {
    json arr = json::array();
    std::stringstream ss(text);
    std::string piece;
    const json elem = like.empty() ? json(0.0) : like.front();
    while (std::getline(ss, piece, ',')) arr.push_back(parse_scalar(key, piece, elem));
    return arr;
  }
  // null default: numeric if it parses, else the raw string
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

void merge_checked(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw Error("invalid_config", "config " + (prefix.empty() ? "root" : prefix) + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error("invalid_config", "unknown config key " + key);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, *it, key);
    } else if (slot.is_null() || it->is_null() || (slot.is_number() && it->is_number()) ||
               slot.type() == it->type()) {
      slot = *it;
    } else {
      throw Error("invalid_config", "config key " + key + " has the wrong type");
    }
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("missing_input", "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + p.string());
  out << bytes;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string digest_of(const std::string& bytes) { return "fnv1a64:" + hex64(fnv1a64(bytes)); }

// State shared by one invocation.
struct Run {
  std::string command;
  json config;
  fs::path out_dir;
  unsigned threads = 1;
  std::map<std::string, std::string> inputs;  // path -> digest
  std::vector<std::string> outputs;

  std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }
  const json& section(const char* name) const { return config.at(name); }

  std::string input_path(const char* key, bool required) const {
    const std::string p = config.at("inputs").at(key).get<std::string>();
    if (p.empty() && required) throw Error("missing_input", std::string("--inputs.") + key + " is required");
    return p;
  }

  void note_input(const std::string& path) {
    if (!fs::exists(path)) throw Error("missing_input", "input file not found: " + path);
    inputs[path] = digest_of(read_file(path));
  }

  void emit(const std::string& name, const std::string& bytes) {
    write_file(out_dir / name, bytes);
    outputs.push_back(name);
  }

  void emit_with(const std::string& name, const std::function<void(const fs::path&)>& writer) {
    writer(out_dir / name);
    outputs.push_back(name);
  }

  CorpusMode mode() const { return parse_corpus_mode(config.at("mode").get<std::string>()); }

  Corpus load(const std::string& corpus_key = "corpus") {
    const std::string corpus_path = input_path(corpus_key.c_str(), true);
    note_input(corpus_path);
    std::optional<fs::path> emb;
    if (const std::string e = input_path("embeddings", false); !e.empty()) {
      note_input(e);
      emb = e;
    }
    return load_corpus(corpus_path, emb, mode()).corpus;
  }

  DensityParams context_params() const {
    const auto& c = section("clustering");
    return DensityParams{c.at("context_epsilon").get<double>(), c.at("context_min_samples").get<std::size_t>()};
  }
  DensityParams content_params() const {
    const auto& c = section("clustering");
    return DensityParams{c.at("content_epsilon").get<double>(), c.at("content_min_samples").get<std::size_t>()};
  }

  SharpenerConfig sharpener(const json& s) const {
    SharpenerConfig cfg;
    cfg.kind = parse_sharpener_kind(s.at("kind").get<std::string>());
    if (s.contains("tau")) cfg.tau = s.at("tau").get<double>();
    const auto& base = section("sampling");
    cfg.epsilon_si = s.value("epsilon_si", base.at("epsilon_si").get<double>());
    cfg.si_floor = s.value("si_floor", base.at("si_floor").get<double>());
    cfg.logits = parse_logits(s.at("logits").get<std::string>());
    cfg.validate();
    return cfg;
  }

  GeneratorConfig generator() const {
    const auto& g = section("generator");
    GeneratorConfig cfg;
    cfg.mode = mode();
    cfg.num_topics = g.at("num_topics").get<std::size_t>();
    cfg.members_per_topic = g.at("members_per_topic").get<std::size_t>();
    cfg.head_share = g.at("head_share").get<double>();
    cfg.tail_cluster_count = g.at("tail_cluster_count").get<std::size_t>();
    cfg.unsafe_cluster_count = g.at("unsafe_cluster_count").get<std::size_t>();
    cfg.unsafe_fraction = g.at("unsafe_fraction").get<double>();
    if (const auto preset = g.at("preset").get<std::string>(); !preset.empty()) {
      cfg.apply_preset(parse_difficulty(preset));
    }
    cfg.embedding_dim = g.at("embedding_dim").get<std::size_t>();
    cfg.noise_sigma = g.at("noise_sigma").get<double>();
    cfg.turns_per_dialogue = g.at("turns_per_dialogue").get<std::size_t>();
    cfg.wedge = section("pollution").at("wedge").get<std::string>();
    cfg.seed = derive_seed(seed(), "generator");
    return cfg;
  }

  PollutionConfig pollution() const {
    const auto& p = section("pollution");
    PollutionConfig cfg;
    cfg.wedge = p.at("wedge").get<std::string>();
    cfg.fraction = p.at("fraction").get<double>();
    cfg.position = parse_wedge_position(p.at("position").get<std::string>());
    cfg.seed = derive_seed(seed(), "pollution");
    cfg.validate();
    return cfg;
  }

  SweepFixture fixture() const { return SweepFixture{generator(), pollution(), context_params(), content_params()}; }

  HealOptions heal_options() const {
    HealOptions opts;
    opts.sharpener = sharpener(section("sampling"));
    opts.num_targets = section("sampling").at("num_targets").get<std::size_t>();
    opts.seed = derive_seed(seed(), "heal");
    const auto& md = section("healing").at("max_distance");
    opts.max_distance = md.is_null() ? context_params().epsilon : md.get<double>();
    return opts;
  }
};

json metrics_json(const MetricReport& m) {
  json j = {{"safety", m.safety}, {"dist1", m.dist1}, {"dist2", m.dist2}, {"entropy", m.entropy},
            {"avg_len", m.avg_len}, {"bleu4", m.bleu4}, {"dpr", m.dpr},     {"rpr", m.rpr}};
  j["action_preservation"] = m.action_preservation ? json(*m.action_preservation) : json(nullptr);
  return j;
}

json report_json(const PollutionReport& r) {
  return json{{"total_dialogues", r.total_dialogues}, {"total_responses", r.total_responses},
              {"polluted_dialogues", r.polluted_dialogues}, {"polluted_responses", r.polluted_responses},
              {"dpr", r.dpr}, {"rpr", r.rpr}};
}

void cmd_generate(Run& run) {
  const auto generated = generate(run.generator());
  run.emit_with("corpus.jsonl", [&](const fs::path& p) { save_corpus(generated.corpus, p); });
  if (generated.corpus.mode() == CorpusMode::chitchat) {
    run.emit_with("embeddings.jsonl", [&](const fs::path& p) { save_embeddings(generated.corpus, p); });
  }
  run.emit_with("ground_truth.jsonl", [&](const fs::path& p) { save_ground_truth(generated.truth, p); });
}

void cmd_cluster(Run& run) {
  const auto corpus = run.load();
  const auto model = build_cluster_model(corpus, run.context_params(), run.content_params(), run.threads);
  run.emit("cluster_model.json", model_to_json(model));
  run.emit("cluster_summary.csv", summary_to_csv(export_cluster_summary(model, corpus)));
}

void cmd_sample(Run& run) {
  const auto corpus = run.load();
  const auto model = build_cluster_model(corpus, run.context_params(), run.content_params(), run.threads);
  const auto records =
      run_pseudo_rephrasing(corpus, model, run.sharpener(run.section("sampling")),
                            run.section("sampling").at("num_targets").get<std::size_t>(), run.seed(), 0, run.threads);
  run.emit("pseudo_labels.jsonl", records_to_jsonl(records));
}

void cmd_temper(Run& run) {
  const auto corpus = run.load();
  const auto model = build_cluster_model(corpus, run.context_params(), run.content_params(), run.threads);
  const auto& t = run.section("tempering");
  const TemperingSchedule schedule{t.at("tau0").get<double>(), t.at("alpha").get<double>(),
                                   t.at("stages").get<std::size_t>()};
  const auto stages = run_tempering(corpus, model, run.sharpener(run.section("sampling")), schedule,
                                    run.section("sampling").at("num_targets").get<std::size_t>(), run.seed(),
                                    run.threads);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    run.emit("stage_" + std::to_string(s) + ".jsonl", records_to_jsonl(stages[s]));
  }
}

void cmd_heal(Run& run) {
  Corpus corpus = run.load();
  if (run.section("healing").at("label_filter").get<bool>()) corpus = filter_unsafe_labeled(corpus).pool;
  Corpus target = corpus;
  if (const std::string t = run.input_path("target", false); !t.empty()) {
    run.note_input(t);
    std::optional<fs::path> emb;
    if (const std::string e = run.input_path("embeddings", false); !e.empty()) emb = e;
    target = load_corpus(t, emb, run.mode()).corpus;
  } else if (run.section("healing").at("label_filter").get<bool>()) {
    target = run.load();
  }
  const auto model = build_cluster_model(corpus, run.context_params(), run.content_params(), run.threads);
  const auto scope = parse_heal_scope(run.section("healing").at("scope").get<std::string>());
  const auto results = heal_corpus(target, model, corpus, run.heal_options(), scope, run.threads);
  run.emit("heal_results.jsonl", heal_results_to_jsonl(results));
  run.emit("cluster_model.json", model_to_json(model));
}

void cmd_pollute(Run& run) {
  const auto corpus = run.load();
  const auto result = pollute(corpus, run.pollution());
  run.emit_with("corpus.jsonl", [&](const fs::path& p) { save_corpus(result.corpus, p); });
  if (result.corpus.has_embeddings()) {
    run.emit_with("embeddings.jsonl", [&](const fs::path& p) { save_embeddings(result.corpus, p); });
  }
  const auto wedge = run.section("pollution").at("wedge").get<std::string>();
  json doc = {{"chosen_ids", result.chosen_ids},
              {"before", report_json(inspect(corpus, wedge))},
              {"after", report_json(inspect(result.corpus, wedge))}};
  run.emit("pollution.json", doc.dump(2) + "\n");
}

void cmd_evaluate(Run& run) {
  const auto sources = run.load();
  const std::string results_path = run.input_path("heal_results", true);
  run.note_input(results_path);
  const auto results = heal_results_from_jsonl(read_file(results_path));
  std::optional<ClusterModel> model;
  if (const std::string m = run.input_path("model", false); !m.empty()) {
    run.note_input(m);
    model = model_from_json(read_file(m), sources);
  } else if (sources.mode() == CorpusMode::tod) {
    model = build_cluster_model(sources, run.context_params(), run.content_params(), run.threads);
  }
  const auto report = evaluate(results, sources, run.section("pollution").at("wedge").get<std::string>(),
                               model ? &*model : nullptr);
  json doc = metrics_json(report);
  json provenance = json::object();
  for (const auto& [path, digest] : run.inputs) provenance[path] = digest;
  doc["provenance"] = {{"inputs", provenance}, {"config_hash", digest_of(run.config.dump())}};
  run.emit("metrics.json", doc.dump(2) + "\n");
}

void cmd_verify(Run& run) {
  const auto& v = run.section("verify");
  VerifyConfig cfg;
  cfg.instances = v.at("instances").get<std::size_t>();
  cfg.max_clusters = v.at("max_clusters").get<std::size_t>();
  cfg.trials = v.at("trials").get<std::size_t>();
  cfg.taus = v.at("taus").get<std::vector<double>>();
  cfg.logits = parse_logits(v.at("logits").get<std::string>());
  cfg.probe_draws = v.at("probe_draws").get<std::size_t>();
  cfg.seed = run.seed();
  const auto verdict = verify_theorems(cfg, run.threads);
  run.emit("verdict.json", verdict.to_json());
  run.emit("instances.csv", verdict.to_csv());
}

void cmd_sweep_boundary(Run& run) {
  const auto& s = run.section("sweep_boundary");
  HealOptions healer;
  healer.sharpener = run.sharpener(s);
  healer.num_targets = s.at("num_targets").get<std::size_t>();
  healer.max_distance = run.context_params().epsilon;
  const auto sweep = boundary_sweep(run.fixture(), s.at("fractions").get<std::vector<double>>(), healer,
                                    s.at("trials").get<std::size_t>(), run.seed(), run.threads);
  run.emit("boundary_trials.csv", sweep.trials_csv());
  run.emit("boundary_summary.csv", sweep.summary_csv());
}

void cmd_sweep_tempering(Run& run) {
  const auto& s = run.section("sweep_tempering");
  const auto points = tempering_sweep(run.fixture(), s.at("fraction").get<double>(), run.sharpener(s),
                                      s.at("tau0").get<double>(), s.at("alpha").get<double>(),
                                      parse_int_range(s.at("stages").get<std::string>()), run.seed(), run.threads);
  run.emit("tempering.csv", sweep_points_csv("stages", points));
  const auto anchor = s.at("plateau_from").get<std::size_t>();
  const double deviation = plateau_deviation(points, anchor);
  const double tolerance = s.at("plateau_tolerance").get<double>();
  json doc = {{"plateau_from", anchor}, {"max_deviation", deviation}, {"tolerance", tolerance},
              {"plateau", deviation <= tolerance}};
  run.emit("tempering_summary.json", doc.dump(2) + "\n");
}

void cmd_sweep_targets(Run& run) {
  const auto& s = run.section("sweep_targets");
  const auto points = target_sweep(run.fixture(), s.at("fraction").get<double>(), run.sharpener(s),
                                   parse_int_range(s.at("targets").get<std::string>()), run.seed(), run.threads);
  run.emit("targets.csv", sweep_points_csv("targets", points));
}

void dispatch(Run& run) {
  static const std::map<std::string, void (*)(Run&)> table = {
      {"generate", cmd_generate},           {"cluster", cmd_cluster},
      {"sample", cmd_sample},               {"temper", cmd_temper},
      {"heal", cmd_heal},                   {"pollute", cmd_pollute},
      {"evaluate", cmd_evaluate},           {"verify", cmd_verify},
      {"sweep-boundary", cmd_sweep_boundary}, {"sweep-tempering", cmd_sweep_tempering},
      {"sweep-targets", cmd_sweep_targets},
  };
  table.at(run.command)(run);
}

void write_manifest(Run& run) {
  json inputs = json::object();
  for (const auto& [path, digest] : run.inputs) inputs[path] = digest;
  json outputs = json::object();
  for (const auto& name : run.outputs) outputs[name] = digest_of(read_file(run.out_dir / name));
  json manifest = {{"command", run.command},
                   {"config", run.config},
                   {"config_hash", digest_of(run.config.dump())},
                   {"seed", run.seed()},
                   {"inputs", inputs},
                   {"outputs", outputs}};
  write_file(run.out_dir / "config.json", run.config.dump(2) + "\n");
  write_file(run.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const json defaults = default_config();
  std::vector<std::pair<std::string, json>> leaves;
  flatten(defaults, "", leaves);

  CLI::App app{"Unsupervised pseudo-label sampling for unsafe response healing", "temp_heal"};
  std::string command;
  std::string config_path;
  std::string manifest_path;
  std::string out_dir = "out";
  unsigned threads = 0;
  app.add_option("command", command, "Subcommand")->required()->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--manifest", manifest_path, "Manifest to replay (replay only)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads (0: TEMP_HEAL_THREADS or hardware)");
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, value] : leaves) {
    app.add_option("--" + key, flag_values[key], "default: " + value.dump());
  }
  std::map<std::string, std::string> alias_values;
  for (const auto& [alias, key] : kAliases) {
    app.add_option("--" + alias, alias_values[alias], "alias of --" + key);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    Run run;
    json config = defaults;
    if (command == "replay") {
      if (manifest_path.empty()) throw Error("missing_input", "replay requires --manifest");
      const json manifest = json::parse(read_file(manifest_path));
      command = manifest.at("command").get<std::string>();
      merge_checked(config, manifest.at("config"), "");
    } else if (!config_path.empty()) {
      json file_cfg;
      try {
        file_cfg = json::parse(read_file(config_path));
      } catch (const json::parse_error& e) {
        throw Error("invalid_config", std::string("config file: ") + e.what());
      }
      merge_checked(config, file_cfg, "");
    }
    for (const auto& [alias, value] : alias_values) {
      if (!app.get_option("--" + alias)->empty()) flag_values[kAliases.at(alias)] = value;
    }
    for (const auto& [key, like] : leaves) {
      const bool given = !app.get_option("--" + key)->empty() ||
                         std::any_of(kAliases.begin(), kAliases.end(), [&](const auto& a) {
                           return a.second == key && !app.get_option("--" + a.first)->empty();
                         });
      if (given) config[pointer_for(key)] = parse_scalar(key, flag_values[key], like);
    }

    run.command = command;
    run.config = std::move(config);
    run.out_dir = out_dir;
    run.threads = resolve_threads(threads);
    fs::create_directories(run.out_dir);
    dispatch(run);
    write_manifest(run);
    out << json{{"status", "ok"}, {"command", run.command}, {"out", run.out_dir.string()}, {"outputs", run.outputs}}.dump()
        << '\n';
    return 0;
  } catch (const Error& e) {
    print_error(err, e.code(), e.what());
  } catch (const json::exception& e) {
    print_error(err, "invalid_config", e.what());
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
  }
  return 1;
}

}  // namespace temp::cli
