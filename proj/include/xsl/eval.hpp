#pragma once

// Evaluation harness: gold-lexicon resolution, top-k mapping accuracy,
// streaming learning curves, the zero-shot pairing protocol with its
// baselines, and hyperparameter sweeps. All randomness is derived from the
// caller's seed per trial, so every number here is reproducible bit for bit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "xsl/assign.hpp"
#include "xsl/common.hpp"
#include "xsl/corpus.hpp"
#include "xsl/graph.hpp"
#include "xsl/model.hpp"
#include "xsl/snapshot.hpp"
#include "xsl/train.hpp"

namespace xsl {

/// Gold mapping after symbol resolution: object id -> sorted word ids that
/// count as correct. Objects or aliases the vocabularies never saw are
/// dropped; an object whose aliases all vanish is dropped entirely.
struct GoldLexicon {
  std::map<uint32_t, std::vector<uint32_t>> entries;
};

inline GoldLexicon resolve_gold(const RawGold& raw, const Vocabulary& objects,
                                const Vocabulary& words) {
  GoldLexicon gold;
  for (const auto& [object_symbol, aliases] : raw) {
    const auto object_id = objects.find(object_symbol);
    if (!object_id) continue;
    std::vector<uint32_t> ids;
    for (const auto& alias : aliases) {
      if (const auto word_id = words.find(alias)) ids.push_back(*word_id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (!ids.empty()) gold.entries[*object_id] = std::move(ids);
  }
  return gold;
}

/// Pairs usable for zero-shot trials: the object's alias set is a single
/// word, and that word backs no other gold entry, so the pairing has exactly
/// one right answer. Sorted by object id.
inline std::vector<std::pair<uint32_t, uint32_t>> unambiguous_pairs(
    const GoldLexicon& gold) {
  std::map<uint32_t, uint32_t> word_uses;
  for (const auto& [object, words] : gold.entries) {
    for (const uint32_t w : words) word_uses[w] += 1;
  }
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (const auto& [object, words] : gold.entries) {
    if (words.size() == 1 && word_uses[words[0]] == 1) {
      pairs.emplace_back(object, words[0]);
    }
  }
  return pairs;
}

inline std::vector<double> topk_accuracies(const CrossModalGraph& g,
                                           const GoldLexicon& gold,
                                           CrossWeightMode mode,
                                           const std::vector<uint32_t>& ks) {
  if (ks.empty()) throw ConfigError("need at least one k");
  for (const uint32_t k : ks) {
    if (k == 0) throw ConfigError("top-k needs k >= 1");
  }
  if (gold.entries.empty()) throw DataError("gold lexicon resolves to nothing");

  const CrossWeightCache cache = build_cross_weight_cache(g);
  std::vector<uint64_t> hits(ks.size(), 0);
  for (const auto& [object, gold_words] : gold.entries) {
    g.check_object(object);
    for (const uint32_t w : gold_words) g.check_word(w);

    // Rank by weight descending; the stable sort keeps the id-ascending
    // order of the distribution for tied weights.
    std::vector<std::pair<uint32_t, double>> ranked =
        mapping_distribution(g, cache, object, mode);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    size_t first_hit = std::numeric_limits<size_t>::max();
    for (size_t i = 0; i < ranked.size(); ++i) {
      if (std::binary_search(gold_words.begin(), gold_words.end(), ranked[i].first)) {
        first_hit = i;
        break;
      }
    }
    for (size_t ki = 0; ki < ks.size(); ++ki) {
      hits[ki] += first_hit < ks[ki];
    }
  }

  std::vector<double> accuracies(ks.size());
  for (size_t ki = 0; ki < ks.size(); ++ki) {
    accuracies[ki] = 100.0 * static_cast<double>(hits[ki]) /
                     static_cast<double>(gold.entries.size());
  }
  return accuracies;
}

inline double topk_accuracy(const CrossModalGraph& g, const GoldLexicon& gold,
                            CrossWeightMode mode, uint32_t k) {
  return topk_accuracies(g, gold, mode, {k})[0];
}

struct LearningCurveConfig {
  uint32_t eval_every = 1000;
  std::vector<uint32_t> ks = {1, 2, 5};
  uint32_t window_size = 10;
  CrossWeightMode mode = CrossWeightMode::Product;
};

struct LearningCurvePoint {
  uint64_t episodes_seen = 0;
  std::vector<double> accuracy;  // one per requested k
  uint32_t objects_seen = 0;
  uint32_t words_seen = 0;
};

/// Streams the episodes into a fresh graph, scoring the gold mapping every
/// eval_every episodes and once more at the end of the stream.
inline std::vector<LearningCurvePoint> learning_curve(
    const std::vector<Episode>& episodes, uint32_t n_objects, uint32_t n_words,
    const GoldLexicon& gold, const LearningCurveConfig& cfg) {
  if (cfg.eval_every == 0) throw ConfigError("eval_every must be >= 1");
  if (cfg.ks.empty()) throw ConfigError("need at least one k");

  CrossModalGraph graph(n_objects, n_words);
  std::vector<LearningCurvePoint> points;
  const auto emit = [&] {
    LearningCurvePoint p;
    p.episodes_seen = graph.episodes_ingested;
    p.accuracy = topk_accuracies(graph, gold, cfg.mode, cfg.ks);
    for (uint32_t o = 0; o < n_objects; ++o) p.objects_seen += graph.object_count(o) > 0;
    for (uint32_t w = 0; w < n_words; ++w) p.words_seen += graph.word_count(w) > 0;
    points.push_back(std::move(p));
  };

  for (size_t i = 0; i < episodes.size(); ++i) {
    ingest_episode(graph, episodes[i], cfg.window_size);
    if ((i + 1) % cfg.eval_every == 0) emit();
  }
  if (points.empty() || points.back().episodes_seen != episodes.size()) emit();
  return points;
}

inline void write_learning_curve_csv(const std::vector<LearningCurvePoint>& points,
                                     const std::vector<uint32_t>& ks,
                                     std::ostream& out) {
  out << "episodes";
  for (const uint32_t k : ks) out << ",top" << k;
  out << ",n_objects,n_words\n";
  for (const auto& p : points) {
    if (p.accuracy.size() != ks.size()) {
      throw ConfigError("curve point has the wrong number of accuracies");
    }
    out << p.episodes_seen;
    for (const double a : p.accuracy) out << ',' << detail::format_weight(a);
    out << ',' << p.objects_seen << ',' << p.words_seen << '\n';
  }
}

inline const char* zero_scope_name(ZeroScope scope) {
  switch (scope) {
    case ZeroScope::PairOnly: return "pair-only";
    case ZeroScope::RowAndColumn: return "row-and-column";
  }
  throw ConfigError("unknown zero scope");
}

enum class MappingMethod { Ours, NoAlign, Spearman, Random };

inline const char* mapping_method_name(MappingMethod m) {
  switch (m) {
    case MappingMethod::Ours: return "ours";
    case MappingMethod::NoAlign: return "no-align";
    case MappingMethod::Spearman: return "spearman";
    case MappingMethod::Random: return "random";
  }
  throw ConfigError("unknown mapping method");
}

inline MappingMethod mapping_method_from_name(const std::string& name) {
  if (name == "ours") return MappingMethod::Ours;
  if (name == "no-align") return MappingMethod::NoAlign;
  if (name == "spearman") return MappingMethod::Spearman;
  if (name == "random") return MappingMethod::Random;
  throw ConfigError("unknown mapping method '" + name + "'");
}

struct ZeroShotConfig {
  uint32_t z = 10;
  uint32_t trials = 30;
  std::vector<MappingMethod> methods = {MappingMethod::Ours, MappingMethod::NoAlign,
                                        MappingMethod::Spearman, MappingMethod::Random};
  ZeroScope scope = ZeroScope::PairOnly;
  uint64_t seed = 1;
  uint64_t max_samples = 100000;  // permutation budget for the spearman search
};

struct ZeroShotMethodResult {
  MappingMethod method = MappingMethod::Ours;
  std::vector<double> accuracies;  // percent, one per trial
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 under two trials
  bool has_model = false;
  std::vector<double> ppl_object, ppl_word;  // only when has_model
  double ppl_object_mean = 0.0, ppl_object_std = 0.0;
  double ppl_word_mean = 0.0, ppl_word_std = 0.0;
};

struct ZeroShotResult {
  ZeroShotConfig config;
  uint32_t eligible_pairs = 0;
  std::vector<ZeroShotMethodResult> methods;
  double train_ms = 0.0;
  double eval_ms = 0.0;
};

/// One trial's raw material, exposed for similarity exports and debugging.
struct ZeroShotTrial {
  std::vector<std::pair<uint32_t, uint32_t>> pairs;  // row/col i is pair i
  CrossModalGraph zeroed;
  RepresentationModel model;  // trained with alignment on the zeroed graph
};

namespace detail {

inline void validate_zero_shot(const ZeroShotConfig& cfg) {
  if (cfg.z == 0) throw ConfigError("z must be >= 1");
  if (cfg.trials == 0) throw ConfigError("trials must be >= 1");
  if (cfg.methods.empty()) throw ConfigError("need at least one mapping method");
  std::set<MappingMethod> seen;
  for (const MappingMethod m : cfg.methods) {
    if (!seen.insert(m).second) {
      throw ConfigError("mapping method listed twice");
    }
  }
}

inline std::vector<std::pair<uint32_t, uint32_t>> eligible_or_throw(
    const GraphBundle& bundle, const RawGold& raw, uint32_t z) {
  const GoldLexicon gold = resolve_gold(raw, bundle.objects, bundle.words);
  const auto eligible = unambiguous_pairs(gold);
  if (eligible.size() < z) {
    throw DataError("only " + std::to_string(eligible.size()) +
                    " unambiguous object-word pairs are available, need z = " +
                    std::to_string(z));
  }
  return eligible;
}

struct TrialSelection {
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  CrossModalGraph zeroed;
};

inline TrialSelection select_and_zero(
    const CrossModalGraph& g,
    const std::vector<std::pair<uint32_t, uint32_t>>& eligible, uint32_t z,
    ZeroScope scope, uint64_t trial_seed) {
  Rng rng(trial_seed);
  TrialSelection sel;
  for (const uint32_t idx :
       rng.sample_distinct(static_cast<uint32_t>(eligible.size()), z)) {
    sel.pairs.push_back(eligible[idx]);
  }
  std::sort(sel.pairs.begin(), sel.pairs.end());
  sel.zeroed = zero_out_pairs(g, sel.pairs, scope);
  return sel;
}

inline RepresentationModel train_for_trial(const CrossModalGraph& zeroed,
                                           TrainConfig cfg, uint64_t trial_seed,
                                           bool with_alignment) {
  cfg.seed = derive_seed(trial_seed, 1);
  if (!with_alignment) cfg.lambda_align = 0.0;
  RepresentationModel model = init_model(zeroed.n_objects, zeroed.n_words, cfg);
  train(model, zeroed);
  return model;
}

/// Aggregated vectors of the trial's objects and words as rows, in pair order.
struct TrialVectors {
  Eigen::MatrixXd objects, words;
};

inline TrialVectors trial_vectors(const RepresentationModel& model,
                                  const CrossModalGraph& zeroed,
                                  const std::vector<std::pair<uint32_t, uint32_t>>& pairs) {
  const Eigen::MatrixXd ao = aggregated_object_embeddings(model, zeroed);
  const Eigen::MatrixXd aw = aggregated_word_embeddings(model, zeroed);
  TrialVectors v;
  v.objects.resize(pairs.size(), ao.rows());
  v.words.resize(pairs.size(), aw.rows());
  for (size_t i = 0; i < pairs.size(); ++i) {
    v.objects.row(static_cast<Eigen::Index>(i)) = ao.col(pairs[i].first).transpose();
    v.words.row(static_cast<Eigen::Index>(i)) = aw.col(pairs[i].second).transpose();
  }
  return v;
}

inline double fixed_point_percent(const std::vector<uint32_t>& permutation) {
  size_t hits = 0;
  for (size_t i = 0; i < permutation.size(); ++i) {
    hits += permutation[i] == i;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(permutation.size());
}

inline double assignment_accuracy(const TrialVectors& v) {
  const Eigen::MatrixXd sim = cosine_similarity_matrix(v.objects, v.words);
  return fixed_point_percent(hungarian(sim, AssignmentObjective::Maximize).assignment);
}

inline double spearman_accuracy(const TrialVectors& v, uint64_t max_samples,
                                uint64_t seed) {
  const Eigen::MatrixXd sim_objects = cosine_similarity_matrix(v.objects, v.objects);
  const Eigen::MatrixXd sim_words = cosine_similarity_matrix(v.words, v.words);
  return fixed_point_percent(
      alignment_correlation_search(sim_objects, sim_words, max_samples, seed)
          .permutation);
}

inline double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (const double x : xs) sum += x;
  return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

inline double sample_std_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// Runs the zero-shot pairing protocol: per trial, hide z unambiguous
/// object-word pairs from the graph, retrain from scratch, and ask each
/// method to re-pair the held-out objects with the held-out words. Scores
/// are percent of exactly re-paired objects.
inline ZeroShotResult zero_shot_protocol(const GraphBundle& bundle, const RawGold& raw,
                                         const TrainConfig& train_cfg,
                                         const ZeroShotConfig& cfg) {
  detail::validate_zero_shot(cfg);
  validate(train_cfg);
  const auto eligible = detail::eligible_or_throw(bundle, raw, cfg.z);

  ZeroShotResult result;
  result.config = cfg;
  result.eligible_pairs = static_cast<uint32_t>(eligible.size());
  for (const MappingMethod m : cfg.methods) {
    ZeroShotMethodResult r;
    r.method = m;
    r.has_model = m != MappingMethod::Random;
    result.methods.push_back(std::move(r));
  }

  const bool want_aligned =
      std::any_of(cfg.methods.begin(), cfg.methods.end(), [](MappingMethod m) {
        return m == MappingMethod::Ours || m == MappingMethod::Spearman;
      });
  const bool want_plain = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                      [](MappingMethod m) { return m == MappingMethod::NoAlign; });

  using Clock = std::chrono::steady_clock;
  const auto ms_between = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  for (uint32_t trial = 0; trial < cfg.trials; ++trial) {
    const uint64_t trial_seed = derive_seed(cfg.seed, trial);
    const detail::TrialSelection sel =
        detail::select_and_zero(bundle.graph, eligible, cfg.z, cfg.scope, trial_seed);

    const auto t0 = Clock::now();
    RepresentationModel aligned, plain;
    PerplexityPair aligned_ppl, plain_ppl;
    if (want_aligned) {
      aligned = detail::train_for_trial(sel.zeroed, train_cfg, trial_seed, true);
      aligned_ppl = perplexity(aligned, sel.zeroed);
    }
    if (want_plain) {
      plain = detail::train_for_trial(sel.zeroed, train_cfg, trial_seed, false);
      plain_ppl = perplexity(plain, sel.zeroed);
    }
    const auto t1 = Clock::now();

    detail::TrialVectors aligned_v, plain_v;
    if (want_aligned) aligned_v = detail::trial_vectors(aligned, sel.zeroed, sel.pairs);
    if (want_plain) plain_v = detail::trial_vectors(plain, sel.zeroed, sel.pairs);

    for (ZeroShotMethodResult& r : result.methods) {
      double accuracy = 0.0;
      switch (r.method) {
        case MappingMethod::Ours:
          accuracy = detail::assignment_accuracy(aligned_v);
          r.ppl_object.push_back(aligned_ppl.object);
          r.ppl_word.push_back(aligned_ppl.word);
          break;
        case MappingMethod::NoAlign:
          accuracy = detail::assignment_accuracy(plain_v);
          r.ppl_object.push_back(plain_ppl.object);
          r.ppl_word.push_back(plain_ppl.word);
          break;
        case MappingMethod::Spearman:
          accuracy = detail::spearman_accuracy(aligned_v, cfg.max_samples,
                                               derive_seed(trial_seed, 3));
          r.ppl_object.push_back(aligned_ppl.object);
          r.ppl_word.push_back(aligned_ppl.word);
          break;
        case MappingMethod::Random: {
          std::vector<uint32_t> perm(cfg.z);
          for (uint32_t i = 0; i < cfg.z; ++i) perm[i] = i;
          Rng rng(derive_seed(trial_seed, 2));
          rng.shuffle(perm);
          accuracy = detail::fixed_point_percent(perm);
          break;
        }
      }
      r.accuracies.push_back(accuracy);
    }
    const auto t2 = Clock::now();
    result.train_ms += ms_between(t0, t1);
    result.eval_ms += ms_between(t1, t2);
  }

  for (ZeroShotMethodResult& r : result.methods) {
    r.mean = detail::mean_of(r.accuracies);
    r.stddev = detail::sample_std_of(r.accuracies, r.mean);
    if (r.has_model) {
      r.ppl_object_mean = detail::mean_of(r.ppl_object);
      r.ppl_object_std = detail::sample_std_of(r.ppl_object, r.ppl_object_mean);
      r.ppl_word_mean = detail::mean_of(r.ppl_word);
      r.ppl_word_std = detail::sample_std_of(r.ppl_word, r.ppl_word_mean);
    }
  }
  return result;
}

/// Reruns a single trial and hands back its selection, graph, and aligned
/// model, e.g. to export the similarity matrix the pairing was read from.
inline ZeroShotTrial run_zero_shot_trial(const GraphBundle& bundle, const RawGold& raw,
                                         const TrainConfig& train_cfg,
                                         const ZeroShotConfig& cfg, uint32_t trial) {
  detail::validate_zero_shot(cfg);
  validate(train_cfg);
  if (trial >= cfg.trials) throw ConfigError("trial index out of range");
  const auto eligible = detail::eligible_or_throw(bundle, raw, cfg.z);
  const uint64_t trial_seed = derive_seed(cfg.seed, trial);
  detail::TrialSelection sel =
      detail::select_and_zero(bundle.graph, eligible, cfg.z, cfg.scope, trial_seed);

  ZeroShotTrial result;
  result.pairs = std::move(sel.pairs);
  result.model = detail::train_for_trial(sel.zeroed, train_cfg, trial_seed, true);
  result.zeroed = std::move(sel.zeroed);
  return result;
}

inline void write_zero_shot_csv(const ZeroShotResult& result, std::ostream& out) {
  out << "method,trial,accuracy\n";
  for (const ZeroShotMethodResult& r : result.methods) {
    for (size_t i = 0; i < r.accuracies.size(); ++i) {
      out << mapping_method_name(r.method) << ',' << i << ','
          << detail::format_weight(r.accuracies[i]) << '\n';
    }
  }
}

inline nlohmann::json zero_shot_report_json(const ZeroShotResult& result,
                                            const TrainConfig& train_cfg) {
  nlohmann::json methods = nlohmann::json::object();
  for (const ZeroShotMethodResult& r : result.methods) {
    nlohmann::json entry{{"accuracy_mean", r.mean},
                         {"accuracy_std", r.stddev},
                         {"accuracies", r.accuracies}};
    if (r.has_model) {
      entry["perplexity"] = {{"object_mean", r.ppl_object_mean},
                             {"object_std", r.ppl_object_std},
                             {"word_mean", r.ppl_word_mean},
                             {"word_std", r.ppl_word_std}};
    }
    methods[mapping_method_name(r.method)] = std::move(entry);
  }
  return {{"z", result.config.z},
          {"trials", result.config.trials},
          {"scope", zero_scope_name(result.config.scope)},
          {"seed", result.config.seed},
          {"max_samples", result.config.max_samples},
          {"eligible_pairs", result.eligible_pairs},
          {"train_config", train_config_json(train_cfg)},
          {"methods", std::move(methods)},
          {"timings_ms", {{"train", result.train_ms}, {"eval", result.eval_ms}}}};
}

struct SweepConfig {
  std::vector<double> deltas;
  std::vector<uint32_t> layer_counts;
  std::vector<double> lambdas;
  ZeroShotConfig zero_shot;
};

struct SweepCell {
  double delta = 0.0;
  uint32_t layers = 0;
  double lambda_align = 0.0;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double ppl_object_mean = 0.0;
  double ppl_word_mean = 0.0;
};

/// Grid sweep over (delta, layers, lambda), scoring each cell with the
/// zero-shot protocol restricted to the aligned method. The zero-shot seed
/// is shared across cells so every cell re-pairs the same held-out sets.
inline std::vector<SweepCell> hyperparameter_sweep(const GraphBundle& bundle,
                                                   const RawGold& raw,
                                                   const TrainConfig& base,
                                                   const SweepConfig& sweep) {
  if (sweep.deltas.empty() || sweep.layer_counts.empty() || sweep.lambdas.empty()) {
    throw ConfigError("sweep grids must be nonempty");
  }
  ZeroShotConfig zs = sweep.zero_shot;
  zs.methods = {MappingMethod::Ours};

  std::vector<SweepCell> cells;
  for (const double delta : sweep.deltas) {
    for (const uint32_t layers : sweep.layer_counts) {
      for (const double lambda : sweep.lambdas) {
        TrainConfig cfg = base;
        cfg.delta = delta;
        cfg.layers = layers;
        cfg.lambda_align = lambda;
        const ZeroShotResult r = zero_shot_protocol(bundle, raw, cfg, zs);
        const ZeroShotMethodResult& ours = r.methods.front();
        cells.push_back({delta, layers, lambda, ours.mean, ours.stddev,
                         ours.ppl_object_mean, ours.ppl_word_mean});
      }
    }
  }
  return cells;
}

inline void write_sweep_csv(const std::vector<SweepCell>& cells,
                            const ZeroShotConfig& zs, std::ostream& out) {
  out << "delta,layers,lambda_align,z,trials,scope,acc_mean,acc_std,ppl_obj_mean,"
         "ppl_word_mean\n";
  for (const SweepCell& c : cells) {
    out << detail::format_weight(c.delta) << ',' << c.layers << ','
        << detail::format_weight(c.lambda_align) << ',' << zs.z << ',' << zs.trials
        << ',' << zero_scope_name(zs.scope) << ',' << detail::format_weight(c.acc_mean)
        << ',' << detail::format_weight(c.acc_std) << ','
        << detail::format_weight(c.ppl_object_mean) << ','
        << detail::format_weight(c.ppl_word_mean) << '\n';
  }
}

}  // namespace xsl
