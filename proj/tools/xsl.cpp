// Command-line front end: corpus generation, streaming graph construction,
// embedding training, mapping evaluation, and artifact export. Data goes to
// stdout (or --out); resolved settings are echoed to stderr as "# key = value"
// lines so every artifact carries its provenance. Exit codes: 0 ok, 2 bad
// configuration, 3 I/O or data failure, 4 numerical abort.

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xsl/assign.hpp"
#include "xsl/common.hpp"
#include "xsl/corpus.hpp"
#include "xsl/eval.hpp"
#include "xsl/graph.hpp"
#include "xsl/model.hpp"
#include "xsl/snapshot.hpp"
#include "xsl/synthetic.hpp"
#include "xsl/train.hpp"

namespace {

using nlohmann::json;

void echo(const std::string& key, const json& value) {
  std::cerr << "# " << key << " = " << value.dump() << "\n";
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw xsl::IoError("cannot open config file: " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw xsl::ConfigError("config file is not valid JSON: " + path);
  return j;
}

std::optional<uint64_t> env_seed() {
  const char* raw = std::getenv("XSL_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (errno != 0 || end == raw || *end != '\0') {
    throw xsl::ConfigError(std::string("XSL_SEED is not an unsigned integer: ") + raw);
  }
  return v;
}

/// Runs a writer against --out, or stdout when the path is empty or "-".
void with_output(const std::string& path,
                 const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out.is_open()) throw xsl::IoError("cannot write output file: " + path);
  write(out);
  out.flush();
  if (!out) throw xsl::IoError("failed while writing: " + path);
}

xsl::CrossWeightMode mode_from_name(const std::string& name) {
  if (name == "product") return xsl::CrossWeightMode::Product;
  if (name == "object-side") return xsl::CrossWeightMode::ObjectSideOnly;
  if (name == "word-side") return xsl::CrossWeightMode::WordSideOnly;
  if (name == "prior") return xsl::CrossWeightMode::Prior;
  throw xsl::ConfigError("unknown cross-weight mode: " + name);
}

xsl::ZeroScope scope_from_name(const std::string& name) {
  if (name == "pair-only") return xsl::ZeroScope::PairOnly;
  if (name == "row-and-column") return xsl::ZeroScope::RowAndColumn;
  throw xsl::ConfigError("unknown zeroing scope: " + name);
}

// --- shared flag groups ----------------------------------------------------

/// Training settings. Precedence: explicit flag, then --train-config file,
/// then XSL_SEED (seed only), then built-in defaults.
struct TrainOptions {
  std::string config_path;
  xsl::TrainConfig flags;
  CLI::Option *dim = nullptr, *hidden = nullptr, *layers = nullptr, *delta = nullptr,
              *lambda = nullptr, *lr = nullptr, *wd = nullptr, *init_scale = nullptr,
              *steps = nullptr, *seed = nullptr;

  void add(CLI::App& cmd) {
    cmd.add_option("--train-config", config_path, "JSON file with training settings");
    dim = cmd.add_option("--dim", flags.dim, "embedding dimension")
              ->capture_default_str();
    hidden = cmd.add_option("--hidden", flags.hidden, "head hidden width (0 = dim)")
                 ->capture_default_str();
    layers = cmd.add_option("--layers", flags.layers, "neighborhood aggregation rounds")
                 ->capture_default_str();
    delta = cmd.add_option("--delta", flags.delta, "neighbor mixing rate")
                ->capture_default_str();
    lambda = cmd.add_option("--lambda", flags.lambda_align, "alignment loss weight")
                 ->capture_default_str();
    lr = cmd.add_option("--lr", flags.lr, "AdamW learning rate")->capture_default_str();
    wd = cmd.add_option("--weight-decay", flags.weight_decay, "decoupled weight decay")
             ->capture_default_str();
    init_scale = cmd.add_option("--init-scale", flags.init_scale,
                                "stddev of the Gaussian parameter init")
                     ->capture_default_str();
    steps = cmd.add_option("--steps", flags.steps, "optimization steps")
                ->capture_default_str();
    seed = cmd.add_option("--seed", flags.seed, "parameter init seed")
               ->capture_default_str();
  }

  xsl::TrainConfig resolve() const {
    xsl::TrainConfig cfg;
    bool file_has_seed = false;
    if (!config_path.empty()) {
      const json j = load_json_file(config_path);
      cfg = xsl::train_config_from_json(j);
      file_has_seed = j.contains("seed");
    }
    if (dim->count()) cfg.dim = flags.dim;
    if (hidden->count()) cfg.hidden = flags.hidden;
    if (layers->count()) cfg.layers = flags.layers;
    if (delta->count()) cfg.delta = flags.delta;
    if (lambda->count()) cfg.lambda_align = flags.lambda_align;
    if (lr->count()) cfg.lr = flags.lr;
    if (wd->count()) cfg.weight_decay = flags.weight_decay;
    if (init_scale->count()) cfg.init_scale = flags.init_scale;
    if (steps->count()) cfg.steps = flags.steps;
    if (seed->count()) {
      cfg.seed = flags.seed;
    } else if (!file_has_seed) {
      if (const auto s = env_seed()) cfg.seed = *s;
    }
    xsl::validate(cfg);
    return cfg;
  }
};

void echo_train_config(const xsl::TrainConfig& cfg) {
  const json j = xsl::train_config_json(cfg);
  for (const auto& [key, value] : j.items()) {
    echo("train." + key, value);
  }
}

/// Protocol seed shared by the zero-shot commands: flag, then XSL_SEED, then 1.
uint64_t resolve_eval_seed(const CLI::Option* opt, uint64_t flag_value) {
  if (opt->count()) return flag_value;
  if (const auto s = env_seed()) return *s;
  return flag_value;
}

// --- gen-corpus ------------------------------------------------------------

xsl::SyntheticConfig synthetic_config_from_json(const json& j) {
  if (!j.is_object()) throw xsl::ConfigError("corpus config must be a JSON object");
  static const std::set<std::string> known = {
      "n_objects",       "scene_min",       "scene_max", "naming_probability",
      "distractor_vocab_size", "distractors_min", "distractors_max",
      "n_episodes",      "seed",            "affinity_sharpness",
      "lexicon",         "name_words"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw xsl::ConfigError("unknown corpus config key: " + item.key());
    }
  }
  xsl::SyntheticConfig cfg;
  try {
    cfg.n_objects = j.value("n_objects", cfg.n_objects);
    cfg.scene_min = j.value("scene_min", cfg.scene_min);
    cfg.scene_max = j.value("scene_max", cfg.scene_max);
    cfg.naming_probability = j.value("naming_probability", cfg.naming_probability);
    cfg.distractor_vocab_size = j.value("distractor_vocab_size", cfg.distractor_vocab_size);
    cfg.distractors_min = j.value("distractors_min", cfg.distractors_min);
    cfg.distractors_max = j.value("distractors_max", cfg.distractors_max);
    cfg.n_episodes = j.value("n_episodes", cfg.n_episodes);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.affinity_sharpness = j.value("affinity_sharpness", cfg.affinity_sharpness);
    if (j.contains("name_words")) {
      cfg.name_words = j.at("name_words").get<std::vector<std::string>>();
    }
    if (j.contains("lexicon")) {
      cfg.lexicon =
          j.at("lexicon")
              .get<std::vector<std::vector<std::pair<uint32_t, double>>>>();
    }
  } catch (const json::exception& e) {
    throw xsl::ConfigError(std::string("corpus config: ") + e.what());
  }
  return cfg;
}

struct GenOptions {
  std::string out, gold, config_path;
  xsl::SyntheticConfig flags;
  CLI::Option *n_objects = nullptr, *scene_min = nullptr, *scene_max = nullptr,
              *naming = nullptr, *distractor_vocab = nullptr, *distractors_min = nullptr,
              *distractors_max = nullptr, *episodes = nullptr, *seed = nullptr,
              *sharpness = nullptr;
};

void run_gen_corpus(const GenOptions& o) {
  xsl::SyntheticConfig cfg;
  bool file_has_seed = false;
  if (!o.config_path.empty()) {
    const json j = load_json_file(o.config_path);
    cfg = synthetic_config_from_json(j);
    file_has_seed = j.contains("seed");
  }
  if (o.n_objects->count()) cfg.n_objects = o.flags.n_objects;
  if (o.scene_min->count()) cfg.scene_min = o.flags.scene_min;
  if (o.scene_max->count()) cfg.scene_max = o.flags.scene_max;
  if (o.naming->count()) cfg.naming_probability = o.flags.naming_probability;
  if (o.distractor_vocab->count()) cfg.distractor_vocab_size = o.flags.distractor_vocab_size;
  if (o.distractors_min->count()) cfg.distractors_min = o.flags.distractors_min;
  if (o.distractors_max->count()) cfg.distractors_max = o.flags.distractors_max;
  if (o.episodes->count()) cfg.n_episodes = o.flags.n_episodes;
  if (o.sharpness->count()) cfg.affinity_sharpness = o.flags.affinity_sharpness;
  if (o.seed->count()) {
    cfg.seed = o.flags.seed;
  } else if (!file_has_seed) {
    if (const auto s = env_seed()) cfg.seed = *s;
  }

  echo("corpus.n_objects", cfg.n_objects);
  echo("corpus.scene_min", cfg.scene_min);
  echo("corpus.scene_max", cfg.scene_max);
  echo("corpus.naming_probability", cfg.naming_probability);
  echo("corpus.distractor_vocab_size", cfg.distractor_vocab_size);
  echo("corpus.distractors_min", cfg.distractors_min);
  echo("corpus.distractors_max", cfg.distractors_max);
  echo("corpus.n_episodes", cfg.n_episodes);
  echo("corpus.seed", cfg.seed);
  echo("corpus.affinity_sharpness", cfg.affinity_sharpness);
  echo("corpus.custom_lexicon", !cfg.lexicon.empty());

  const xsl::SyntheticCorpus corpus = xsl::generate_synthetic_corpus(cfg);
  xsl::write_episodes_jsonl(o.out, corpus.episodes);
  if (!o.gold.empty()) xsl::save_gold_json(o.gold, corpus.gold);
  std::cerr << "gen-corpus: " << corpus.episodes.size() << " episodes, "
            << corpus.gold.size() << " gold entries -> " << o.out << "\n";
}

void setup_gen_corpus(CLI::App& app) {
  auto o = std::make_shared<GenOptions>();
  CLI::App* cmd = app.add_subcommand("gen-corpus", "generate a synthetic episode corpus");
  cmd->add_option("--out", o->out, "episode JSONL output path")->required();
  cmd->add_option("--gold", o->gold, "gold lexicon JSON output path");
  cmd->add_option("--config", o->config_path, "JSON file with corpus settings");
  o->n_objects = cmd->add_option("--objects", o->flags.n_objects, "number of objects")
                     ->capture_default_str();
  o->scene_min = cmd->add_option("--scene-min", o->flags.scene_min,
                                 "minimum objects per scene")
                     ->capture_default_str();
  o->scene_max = cmd->add_option("--scene-max", o->flags.scene_max,
                                 "maximum objects per scene")
                     ->capture_default_str();
  o->naming = cmd->add_option("--naming-prob", o->flags.naming_probability,
                              "probability a present object is named")
                  ->capture_default_str();
  o->distractor_vocab = cmd->add_option("--distractor-vocab",
                                        o->flags.distractor_vocab_size,
                                        "distractor word vocabulary size")
                            ->capture_default_str();
  o->distractors_min = cmd->add_option("--distractors-min", o->flags.distractors_min,
                                       "minimum distractor words per episode")
                           ->capture_default_str();
  o->distractors_max = cmd->add_option("--distractors-max", o->flags.distractors_max,
                                       "maximum distractor words per episode")
                           ->capture_default_str();
  o->episodes = cmd->add_option("--episodes", o->flags.n_episodes, "number of episodes")
                    ->capture_default_str();
  o->sharpness = cmd->add_option("--affinity-sharpness", o->flags.affinity_sharpness,
                                 "scene structure concentration (0 = uniform scenes)")
                     ->capture_default_str();
  o->seed = cmd->add_option("--seed", o->flags.seed, "corpus seed")->capture_default_str();
  cmd->callback([o] { run_gen_corpus(*o); });
}

// --- build-graph -----------------------------------------------------------

struct BuildOptions {
  std::vector<std::string> inputs;
  std::string out, resume;
  uint32_t window = 10;
  uint32_t min_count = 1;
  CLI::Option *window_opt = nullptr, *min_count_opt = nullptr;
};

void run_build_graph(const BuildOptions& o) {
  xsl::GraphBundle bundle;
  if (!o.resume.empty()) {
    bundle = xsl::load_snapshot(o.resume);
    if (o.window_opt->count() && o.window != bundle.window_size) {
      throw xsl::ConfigError("--window disagrees with the resumed snapshot");
    }
    if (o.min_count_opt->count() && o.min_count != bundle.words.min_count) {
      throw xsl::ConfigError("--min-count disagrees with the resumed snapshot");
    }
  } else {
    bundle.window_size = o.window;
  }

  // The whole stream is tallied before any episode is mapped: word filtering
  // is defined over cumulative counts, not per-file ones.
  std::vector<xsl::RawEpisode> episodes;
  for (const std::string& path : o.inputs) {
    std::vector<xsl::RawEpisode> part = xsl::read_episodes_jsonl(path);
    episodes.insert(episodes.end(), std::make_move_iterator(part.begin()),
                    std::make_move_iterator(part.end()));
  }
  if (o.resume.empty()) {
    auto [objects, words] = xsl::build_vocabulary(episodes, o.min_count);
    bundle.objects = std::move(objects);
    bundle.words = std::move(words);
  } else {
    xsl::extend_vocabularies(bundle.objects, bundle.words, episodes);
  }
  bundle.graph.resize(static_cast<uint32_t>(bundle.objects.size()),
                      static_cast<uint32_t>(bundle.words.size()));
  for (const xsl::RawEpisode& raw : episodes) {
    xsl::ingest_episode(bundle.graph,
                        xsl::map_episode(raw, bundle.objects, bundle.words),
                        bundle.window_size);
  }

  echo("graph.window", bundle.window_size);
  echo("graph.min_count", bundle.words.min_count);
  echo("graph.resume", o.resume.empty() ? json() : json(o.resume));
  xsl::save_snapshot(bundle, o.out);
  const xsl::CrossModalGraph& g = bundle.graph;
  std::cerr << "build-graph: +" << episodes.size() << " episodes ("
            << g.episodes_ingested << " total), " << g.n_objects << " objects, "
            << g.n_words << " words, " << g.oo.pairs << "/" << g.ww.pairs << "/"
            << g.ow.pairs << " oo/ww/ow edges -> " << o.out << "\n";
}

void setup_build_graph(CLI::App& app) {
  auto o = std::make_shared<BuildOptions>();
  CLI::App* cmd =
      app.add_subcommand("build-graph", "stream episodes into a co-occurrence graph");
  cmd->add_option("inputs", o->inputs, "episode JSONL files, ingested in order")
      ->required()
      ->expected(-1);
  cmd->add_option("--out", o->out, "graph snapshot output path")->required();
  o->window_opt = cmd->add_option("--window", o->window, "context window size H")
                      ->capture_default_str();
  o->min_count_opt = cmd->add_option("--min-count", o->min_count,
                                     "minimum word count for vocabulary entry")
                         ->capture_default_str();
  cmd->add_option("--resume", o->resume, "existing snapshot to extend");
  cmd->callback([o] { run_build_graph(*o); });
}

// --- train -----------------------------------------------------------------

struct TrainCmdOptions {
  std::string snapshot, out, trace;
  TrainOptions train;
};

void run_train(const TrainCmdOptions& o) {
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.snapshot);
  const xsl::TrainConfig cfg = o.train.resolve();
  echo_train_config(cfg);

  xsl::RepresentationModel model = xsl::init_model(
      bundle.graph.n_objects, bundle.graph.n_words, cfg);
  const std::vector<xsl::TraceRow> trace = xsl::train(model, bundle.graph);
  xsl::save_model(o.out, model);
  if (!o.trace.empty()) {
    with_output(o.trace, [&](std::ostream& out) { xsl::write_loss_trace_csv(trace, out); });
  }

  const xsl::PerplexityPair ppl = xsl::perplexity(model, bundle.graph);
  echo("result.perplexity_object", ppl.object);
  echo("result.perplexity_word", ppl.word);
  std::cerr << "train: " << trace.size() << " steps, final total loss "
            << (trace.empty() ? json() : json(trace.back().losses.total)).dump()
            << " -> " << o.out << "\n";
}

void setup_train(CLI::App& app) {
  auto o = std::make_shared<TrainCmdOptions>();
  CLI::App* cmd = app.add_subcommand("train", "train aligned embeddings on a snapshot");
  cmd->add_option("--snapshot", o->snapshot, "graph snapshot input path")->required();
  cmd->add_option("--out", o->out, "model output path")->required();
  cmd->add_option("--trace", o->trace, "per-step loss CSV output path");
  o->train.add(*cmd);
  cmd->callback([o] { run_train(*o); });
}

// --- eval-map --------------------------------------------------------------

struct MapOptions {
  std::string snapshot, gold, out;
  std::vector<uint32_t> ks = {1, 2, 5};
  std::vector<std::string> modes = {"product", "word-side", "object-side", "prior"};
};

void run_eval_map(const MapOptions& o) {
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.snapshot);
  const xsl::RawGold raw = xsl::load_gold_json(o.gold);
  const xsl::GoldLexicon gold = xsl::resolve_gold(raw, bundle.objects, bundle.words);

  echo("eval.k", o.ks);
  echo("eval.modes", o.modes);
  echo("eval.gold_entries", gold.entries.size());

  with_output(o.out, [&](std::ostream& out) {
    out << "mode";
    for (const uint32_t k : o.ks) out << ",top" << k;
    out << "\n";
    for (const std::string& name : o.modes) {
      const std::vector<double> acc =
          xsl::topk_accuracies(bundle.graph, gold, mode_from_name(name), o.ks);
      out << name;
      for (const double a : acc) out << ',' << xsl::detail::format_weight(a);
      out << "\n";
    }
  });
}

void setup_eval_map(CLI::App& app) {
  auto o = std::make_shared<MapOptions>();
  CLI::App* cmd =
      app.add_subcommand("eval-map", "top-K mapping accuracy against a gold lexicon");
  cmd->add_option("--snapshot", o->snapshot, "graph snapshot input path")->required();
  cmd->add_option("--gold", o->gold, "gold lexicon JSON path")->required();
  cmd->add_option("--k", o->ks, "top-K cutoffs")->delimiter(',');
  cmd->add_option("--modes", o->modes,
                  "cross-weight modes: product, word-side, object-side, prior")
      ->delimiter(',');
  cmd->add_option("--out", o->out, "CSV output path (default stdout)");
  cmd->callback([o] { run_eval_map(*o); });
}

// --- eval-zeroshot ---------------------------------------------------------

struct ZeroShotOptions {
  std::string snapshot, gold, report, csv, sim_out;
  uint32_t z = 10;
  uint32_t trials = 30;
  std::vector<std::string> methods = {"ours", "no-align", "spearman", "random"};
  std::string scope = "pair-only";
  uint64_t eval_seed = 1;
  uint64_t max_samples = 100000;
  CLI::Option* eval_seed_opt = nullptr;
  TrainOptions train;
};

xsl::ZeroShotConfig make_zero_shot_config(const ZeroShotOptions& o) {
  xsl::ZeroShotConfig zs;
  zs.z = o.z;
  zs.trials = o.trials;
  zs.methods.clear();
  for (const std::string& name : o.methods) {
    zs.methods.push_back(xsl::mapping_method_from_name(name));
  }
  zs.scope = scope_from_name(o.scope);
  zs.seed = resolve_eval_seed(o.eval_seed_opt, o.eval_seed);
  zs.max_samples = o.max_samples;
  return zs;
}

void echo_zero_shot_config(const xsl::ZeroShotConfig& zs) {
  echo("zeroshot.z", zs.z);
  echo("zeroshot.trials", zs.trials);
  json names = json::array();
  for (const auto m : zs.methods) names.push_back(xsl::mapping_method_name(m));
  echo("zeroshot.methods", names);
  echo("zeroshot.scope", xsl::zero_scope_name(zs.scope));
  echo("zeroshot.seed", zs.seed);
  echo("zeroshot.max_samples", zs.max_samples);
}

void run_eval_zeroshot(const ZeroShotOptions& o) {
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.snapshot);
  const xsl::RawGold raw = xsl::load_gold_json(o.gold);
  const xsl::TrainConfig cfg = o.train.resolve();
  const xsl::ZeroShotConfig zs = make_zero_shot_config(o);
  echo_train_config(cfg);
  echo_zero_shot_config(zs);

  const xsl::ZeroShotResult result = xsl::zero_shot_protocol(bundle, raw, cfg, zs);
  const json report = xsl::zero_shot_report_json(result, cfg);
  with_output(o.report, [&](std::ostream& out) { out << report.dump(2) << "\n"; });
  if (!o.csv.empty()) {
    with_output(o.csv, [&](std::ostream& out) { xsl::write_zero_shot_csv(result, out); });
  }
  if (!o.sim_out.empty()) {
    const xsl::ZeroShotTrial trial = xsl::run_zero_shot_trial(bundle, raw, cfg, zs, 0);
    const xsl::detail::TrialVectors v =
        xsl::detail::trial_vectors(trial.model, trial.zeroed, trial.pairs);
    xsl::SimilarityMatrix sim;
    for (const auto& [object, word] : trial.pairs) {
      sim.row_symbols.push_back(bundle.objects.symbol_of(object));
      sim.col_symbols.push_back(bundle.words.symbol_of(word));
    }
    sim.values = xsl::cosine_similarity_matrix(v.objects, v.words);
    with_output(o.sim_out, [&](std::ostream& out) { xsl::export_similarity_csv(sim, out); });
  }
  std::cerr << "eval-zeroshot: " << result.eligible_pairs << " eligible pairs, "
            << zs.trials << " trials, train " << result.train_ms << " ms, eval "
            << result.eval_ms << " ms\n";
}

void add_zero_shot_flags(CLI::App& cmd, ZeroShotOptions& o, bool with_methods) {
  cmd.add_option("--snapshot", o.snapshot, "graph snapshot input path")->required();
  cmd.add_option("--gold", o.gold, "gold lexicon JSON path")->required();
  cmd.add_option("--z", o.z, "held-out pairs per trial")->capture_default_str();
  cmd.add_option("--trials", o.trials, "number of trials")->capture_default_str();
  if (with_methods) {
    cmd.add_option("--methods", o.methods,
                   "mapping methods: ours, no-align, spearman, random")
        ->delimiter(',');
  }
  cmd.add_option("--scope", o.scope, "zeroing scope: pair-only or row-and-column")
      ->capture_default_str();
  o.eval_seed_opt =
      cmd.add_option("--eval-seed", o.eval_seed, "protocol seed")->capture_default_str();
  cmd.add_option("--max-samples", o.max_samples,
                 "correlation search budget before sampling")
      ->capture_default_str();
  o.train.add(cmd);
}

void setup_eval_zeroshot(CLI::App& app) {
  auto o = std::make_shared<ZeroShotOptions>();
  CLI::App* cmd =
      app.add_subcommand("eval-zeroshot", "zero-shot mapping recovery protocol");
  add_zero_shot_flags(*cmd, *o, true);
  cmd->add_option("--report", o->report, "JSON report output path (default stdout)");
  cmd->add_option("--csv", o->csv, "per-trial accuracy CSV output path");
  cmd->add_option("--sim-out", o->sim_out,
                  "trial-0 object/word cosine similarity CSV output path");
  cmd->callback([o] { run_eval_zeroshot(*o); });
}

// --- sweep -----------------------------------------------------------------

struct SweepOptions {
  ZeroShotOptions zs;
  std::vector<double> deltas, lambdas;
  std::vector<uint32_t> layer_counts;
  std::string out;
};

void run_sweep(const SweepOptions& o) {
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.zs.snapshot);
  const xsl::RawGold raw = xsl::load_gold_json(o.zs.gold);
  const xsl::TrainConfig base = o.zs.train.resolve();
  const xsl::ZeroShotConfig zs = make_zero_shot_config(o.zs);
  echo_train_config(base);
  echo_zero_shot_config(zs);
  echo("sweep.deltas", o.deltas);
  echo("sweep.layers", o.layer_counts);
  echo("sweep.lambdas", o.lambdas);

  xsl::SweepConfig sweep;
  sweep.deltas = o.deltas;
  sweep.layer_counts = o.layer_counts;
  sweep.lambdas = o.lambdas;
  sweep.zero_shot = zs;
  const std::vector<xsl::SweepCell> cells =
      xsl::hyperparameter_sweep(bundle, raw, base, sweep);
  with_output(o.out, [&](std::ostream& out) { xsl::write_sweep_csv(cells, zs, out); });
  std::cerr << "sweep: " << cells.size() << " cells\n";
}

void setup_sweep(CLI::App& app) {
  auto o = std::make_shared<SweepOptions>();
  CLI::App* cmd = app.add_subcommand(
      "sweep", "zero-shot accuracy over a delta/layers/lambda grid");
  add_zero_shot_flags(*cmd, o->zs, false);
  cmd->add_option("--deltas", o->deltas, "mixing rates to try")
      ->delimiter(',')
      ->required();
  cmd->add_option("--layer-counts", o->layer_counts, "aggregation rounds to try")
      ->delimiter(',')
      ->required();
  cmd->add_option("--lambdas", o->lambdas, "alignment weights to try")
      ->delimiter(',')
      ->required();
  cmd->add_option("--out", o->out, "CSV output path (default stdout)");
  cmd->callback([o] { run_sweep(*o); });
}

// --- export commands -------------------------------------------------------

struct ExportGraphOptions {
  std::string snapshot, out;
};

void run_export_graph(const ExportGraphOptions& o) {
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.snapshot);
  echo("graph.n_objects", bundle.graph.n_objects);
  echo("graph.n_words", bundle.graph.n_words);
  echo("graph.episodes", bundle.graph.episodes_ingested);
  with_output(o.out, [&](std::ostream& out) { xsl::export_graph_csv(bundle, out); });
}

void setup_export_graph(CLI::App& app) {
  auto o = std::make_shared<ExportGraphOptions>();
  CLI::App* cmd =
      app.add_subcommand("export-graph", "dump graph edges and weights as CSV");
  cmd->add_option("--snapshot", o->snapshot, "graph snapshot input path")->required();
  cmd->add_option("--out", o->out, "CSV output path (default stdout)");
  cmd->callback([o] { run_export_graph(*o); });
}

struct ExportEmbeddingsOptions {
  std::string model, snapshot, out;
  bool aggregated = false;
};

void run_export_embeddings(const ExportEmbeddingsOptions& o) {
  const xsl::RepresentationModel model = xsl::load_model(o.model);
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.snapshot);
  echo("export.aggregated", o.aggregated);
  with_output(o.out, [&](std::ostream& out) {
    xsl::export_embeddings_tsv(model, bundle, o.aggregated, out);
  });
}

void setup_export_embeddings(CLI::App& app) {
  auto o = std::make_shared<ExportEmbeddingsOptions>();
  CLI::App* cmd =
      app.add_subcommand("export-embeddings", "dump base or aggregated embeddings as TSV");
  cmd->add_option("--model", o->model, "trained model path")->required();
  cmd->add_option("--snapshot", o->snapshot, "matching graph snapshot path")->required();
  cmd->add_flag("--aggregated", o->aggregated, "apply neighborhood aggregation first");
  cmd->add_option("--out", o->out, "TSV output path (default stdout)");
  cmd->callback([o] { run_export_embeddings(*o); });
}

struct ExportSimOptions {
  std::string model, snapshot, pairs_path, gold, out;
  uint32_t z = 0;
  uint64_t eval_seed = 1;
  CLI::Option *z_opt = nullptr, *eval_seed_opt = nullptr;
};

std::vector<std::pair<uint32_t, uint32_t>> read_pair_list(
    const std::string& path, const xsl::Vocabulary& objects,
    const xsl::Vocabulary& words) {
  std::ifstream in(path);
  if (!in.is_open()) throw xsl::IoError("cannot open pair list: " + path);
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  std::string line;
  for (size_t line_no = 1; std::getline(in, line); ++line_no) {
    std::istringstream fields(line);
    std::string object_symbol, word_symbol, extra;
    if (!(fields >> object_symbol)) continue;  // blank line
    if (!(fields >> word_symbol) || fields >> extra) {
      throw xsl::DataError(path + ":" + std::to_string(line_no) +
                           ": expected \"object word\"");
    }
    const auto object = objects.find(object_symbol);
    if (!object) throw xsl::DataError("unknown object symbol: " + object_symbol);
    const auto word = words.find(word_symbol);
    if (!word) throw xsl::DataError("unknown word symbol: " + word_symbol);
    pairs.emplace_back(*object, *word);
  }
  return pairs;
}

void run_export_sim(const ExportSimOptions& o) {
  if (o.pairs_path.empty() == o.gold.empty()) {
    throw xsl::ConfigError("need exactly one of --pairs or --gold");
  }
  const xsl::RepresentationModel model = xsl::load_model(o.model);
  const xsl::GraphBundle bundle = xsl::load_snapshot(o.snapshot);

  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  if (!o.pairs_path.empty()) {
    pairs = read_pair_list(o.pairs_path, bundle.objects, bundle.words);
  } else {
    const xsl::RawGold raw = xsl::load_gold_json(o.gold);
    const xsl::GoldLexicon gold = xsl::resolve_gold(raw, bundle.objects, bundle.words);
    pairs = xsl::unambiguous_pairs(gold);
    const uint64_t seed = resolve_eval_seed(o.eval_seed_opt, o.eval_seed);
    if (o.z_opt->count() && o.z > 0 && o.z < pairs.size()) {
      xsl::Rng rng(seed);
      const std::vector<uint32_t> picks =
          rng.sample_distinct(static_cast<uint32_t>(pairs.size()), o.z);
      std::vector<std::pair<uint32_t, uint32_t>> chosen;
      for (const uint32_t i : picks) chosen.push_back(pairs[i]);
      std::sort(chosen.begin(), chosen.end());
      pairs = std::move(chosen);
    }
  }
  if (pairs.empty()) throw xsl::DataError("no pairs to export");
  echo("export.pairs", pairs.size());

  const xsl::detail::TrialVectors v =
      xsl::detail::trial_vectors(model, bundle.graph, pairs);
  xsl::SimilarityMatrix sim;
  for (const auto& [object, word] : pairs) {
    sim.row_symbols.push_back(bundle.objects.symbol_of(object));
    sim.col_symbols.push_back(bundle.words.symbol_of(word));
  }
  sim.values = xsl::cosine_similarity_matrix(v.objects, v.words);
  with_output(o.out, [&](std::ostream& out) { xsl::export_similarity_csv(sim, out); });
}

void setup_export_sim(CLI::App& app) {
  auto o = std::make_shared<ExportSimOptions>();
  CLI::App* cmd = app.add_subcommand(
      "export-sim", "object/word cosine similarity matrix for chosen pairs");
  cmd->add_option("--model", o->model, "trained model path")->required();
  cmd->add_option("--snapshot", o->snapshot, "matching graph snapshot path")->required();
  cmd->add_option("--pairs", o->pairs_path,
                  "pair list file, one \"object word\" per line");
  cmd->add_option("--gold", o->gold, "gold lexicon JSON; uses its unambiguous pairs");
  o->z_opt = cmd->add_option("--z", o->z, "sample this many gold pairs (0 = all)")
                 ->capture_default_str();
  o->eval_seed_opt =
      cmd->add_option("--eval-seed", o->eval_seed, "pair sampling seed")
          ->capture_default_str();
  cmd->add_option("--out", o->out, "CSV output path (default stdout)");
  cmd->callback([o] { run_export_sim(*o); });
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  CLI::App app{"cross-situational learner: co-occurrence graphs, aligned embeddings,"
               " mapping evaluation"};
  app.require_subcommand(1);
  setup_gen_corpus(app);
  setup_build_graph(app);
  setup_train(app);
  setup_eval_map(app);
  setup_eval_zeroshot(app);
  setup_sweep(app);
  setup_export_graph(app);
  setup_export_embeddings(app);
  setup_export_sim(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const xsl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const xsl::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const xsl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
