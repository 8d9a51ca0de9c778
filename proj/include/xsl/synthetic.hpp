#pragma once

// Synthetic cross-situational corpus generator. Scenes draw a few objects;
// each present object emits one of its name words with a fixed probability,
// then distractor words are mixed in and the word order shuffled. Scene
// composition follows a latent object-affinity structure, mirroring real
// scenes where related objects recur together; that heterogeneity is what
// gives the co-occurrence graphs a recoverable topology. The defaults are
// the standard 50-object benchmark used by the evaluation harness.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "xsl/common.hpp"
#include "xsl/corpus.hpp"

namespace xsl {

struct SyntheticConfig {
  uint32_t n_objects = 50;
  uint32_t scene_min = 1;
  uint32_t scene_max = 4;
  double naming_probability = 0.75;
  uint32_t distractor_vocab_size = 150;
  uint32_t distractors_min = 2;
  uint32_t distractors_max = 6;
  uint32_t n_episodes = 20000;
  uint64_t seed = 7;

  /// Concentration of the latent scene structure. Pairwise object affinities
  /// are drawn once per corpus as exp(sharpness * g) with symmetric standard
  /// normal g; each scene anchors on a uniform object and fills the rest by
  /// affinity to the anchor. 0 selects objects uniformly, which leaves the
  /// within-modality graphs without usable topology.
  double affinity_sharpness = 2.0;

  /// Optional custom lexicon: lexicon[i] lists (name word id, probability)
  /// for object i, ids indexing name_words. Probabilities must sum to 1 per
  /// object. When empty, every object i gets the single name word "daxNNN".
  std::vector<std::vector<std::pair<uint32_t, double>>> lexicon;
  std::vector<std::string> name_words;
};

struct SyntheticCorpus {
  std::vector<RawEpisode> episodes;
  RawGold gold;
};

namespace detail {

inline std::string indexed_symbol(const char* prefix, uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03u", prefix, i);
  return buf;
}

/// Symmetric positive affinity matrix (row-major, zero diagonal), drawn from
/// a stream derived from the corpus seed so it never shifts episode draws.
inline std::vector<double> affinity_matrix(uint32_t n, double sharpness, uint64_t seed) {
  Rng rng(derive_seed(seed, 0xaff1u));
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i + 1; j < n; ++j) {
      const double e = std::exp(sharpness * rng.normal());
      a[static_cast<size_t>(i) * n + j] = e;
      a[static_cast<size_t>(j) * n + i] = e;
    }
  }
  return a;
}

/// Scene as an anchor plus affinity-weighted companions, without
/// replacement. Affinities are strictly positive off the diagonal, so the
/// remaining mass stays positive until every object is picked.
inline std::vector<uint32_t> sample_scene(Rng& rng, const std::vector<double>& affinity,
                                          uint32_t n, uint32_t size) {
  const auto anchor = static_cast<uint32_t>(rng.below(n));
  std::vector<uint32_t> scene{anchor};
  std::vector<double> w(affinity.begin() + static_cast<size_t>(anchor) * n,
                        affinity.begin() + static_cast<size_t>(anchor + 1) * n);
  for (uint32_t k = 1; k < size; ++k) {
    double total = 0.0;
    for (const double x : w) total += x;
    const double r = rng.uniform() * total;
    double cum = 0.0;
    uint32_t pick = anchor;
    for (uint32_t j = 0; j < n; ++j) {
      if (w[j] <= 0.0) continue;
      pick = j;  // survives rounding that pushes r past the last bucket
      cum += w[j];
      if (r < cum) break;
    }
    scene.push_back(pick);
    w[pick] = 0.0;
  }
  return scene;
}

}  // namespace detail

inline std::string object_symbol(uint32_t i) { return detail::indexed_symbol("obj", i); }
inline std::string default_name_word(uint32_t i) { return detail::indexed_symbol("dax", i); }
inline std::string distractor_word(uint32_t i) { return detail::indexed_symbol("fil", i); }

inline void validate(const SyntheticConfig& cfg) {
  if (cfg.n_objects == 0) throw ConfigError("n_objects must be >= 1");
  if (cfg.scene_min == 0) throw ConfigError("scene_min must be >= 1");
  if (cfg.scene_min > cfg.scene_max) throw ConfigError("scene_min > scene_max");
  if (cfg.scene_max > cfg.n_objects) throw ConfigError("scene_max exceeds n_objects");
  if (cfg.naming_probability < 0.0 || cfg.naming_probability > 1.0) {
    throw ConfigError("naming_probability must lie in [0, 1]");
  }
  if (cfg.distractors_min > cfg.distractors_max) {
    throw ConfigError("distractors_min > distractors_max");
  }
  if (cfg.distractors_max > 0 && cfg.distractor_vocab_size == 0) {
    throw ConfigError("distractor range requires distractor_vocab_size >= 1");
  }
  if (!(cfg.affinity_sharpness >= 0.0) || !std::isfinite(cfg.affinity_sharpness)) {
    throw ConfigError("affinity_sharpness must be finite and >= 0");
  }
  if (cfg.lexicon.empty() != cfg.name_words.empty()) {
    throw ConfigError("lexicon and name_words must be provided together");
  }
  if (!cfg.lexicon.empty()) {
    if (cfg.lexicon.size() != cfg.n_objects) {
      throw ConfigError("lexicon must list exactly n_objects entries");
    }
    for (const auto& entry : cfg.lexicon) {
      if (entry.empty()) throw ConfigError("lexicon entry must be nonempty");
      double sum = 0.0;
      for (const auto& [word, p] : entry) {
        if (word >= cfg.name_words.size()) {
          throw ConfigError("lexicon references a name word id out of range");
        }
        if (p < 0.0) throw ConfigError("negative emission probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("emission probabilities must sum to 1");
      }
    }
  }
}

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  validate(cfg);

  std::vector<std::string> name_words = cfg.name_words;
  auto lexicon = cfg.lexicon;
  if (lexicon.empty()) {
    name_words.reserve(cfg.n_objects);
    lexicon.resize(cfg.n_objects);
    for (uint32_t i = 0; i < cfg.n_objects; ++i) {
      name_words.push_back(default_name_word(i));
      lexicon[i] = {{i, 1.0}};
    }
  }

  SyntheticCorpus corpus;
  for (uint32_t i = 0; i < cfg.n_objects; ++i) {
    std::vector<std::string> aliases;
    for (const auto& [word, p] : lexicon[i]) {
      if (p <= 0.0) continue;
      const auto& sym = name_words[word];
      if (std::find(aliases.begin(), aliases.end(), sym) == aliases.end()) {
        aliases.push_back(sym);
      }
    }
    corpus.gold.emplace(object_symbol(i), std::move(aliases));
  }

  const bool structured = cfg.affinity_sharpness > 0.0 && cfg.n_objects > 1;
  const std::vector<double> affinity =
      structured ? detail::affinity_matrix(cfg.n_objects, cfg.affinity_sharpness, cfg.seed)
                 : std::vector<double>{};

  Rng rng(cfg.seed);
  corpus.episodes.reserve(cfg.n_episodes);
  for (uint32_t e = 0; e < cfg.n_episodes; ++e) {
    const uint32_t scene_size =
        cfg.scene_min + static_cast<uint32_t>(rng.below(cfg.scene_max - cfg.scene_min + 1));
    auto scene = structured
                     ? detail::sample_scene(rng, affinity, cfg.n_objects, scene_size)
                     : rng.sample_distinct(cfg.n_objects, scene_size);
    std::sort(scene.begin(), scene.end());

    RawEpisode ep;
    ep.objects.reserve(scene.size());
    for (const uint32_t o : scene) ep.objects.push_back(object_symbol(o));

    for (const uint32_t o : scene) {
      if (rng.uniform() >= cfg.naming_probability) continue;
      const double r = rng.uniform();
      double cum = 0.0;
      uint32_t chosen = lexicon[o].back().first;
      for (const auto& [word, p] : lexicon[o]) {
        cum += p;
        if (r < cum) {
          chosen = word;
          break;
        }
      }
      ep.words.push_back(name_words[chosen]);
    }

    uint32_t n_distractors = cfg.distractors_min;
    if (cfg.distractors_max > cfg.distractors_min) {
      n_distractors += static_cast<uint32_t>(
          rng.below(cfg.distractors_max - cfg.distractors_min + 1));
    }
    for (uint32_t k = 0; k < n_distractors; ++k) {
      ep.words.push_back(
          distractor_word(static_cast<uint32_t>(rng.below(cfg.distractor_vocab_size))));
    }

    rng.shuffle(ep.words);
    corpus.episodes.push_back(std::move(ep));
  }
  return corpus;
}

}  // namespace xsl
