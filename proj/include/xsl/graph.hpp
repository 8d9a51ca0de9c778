#pragma once

// Cross-modal co-occurrence graph. Occurrence counters d are per node;
// sparse co-occurrence counters c cover object-object and word-word pairs
// (symmetric, no self loops) and the object-word bipartite family. Absent
// keys mean zero. Object-side counters advance once per episode, word and
// cross counters once per context window. All edge weights are pure
// functions of the counters and are computed on demand.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xsl/common.hpp"
#include "xsl/corpus.hpp"

namespace xsl {

namespace detail {

/// Symmetric sparse pair counts; each pair is stored in both directions.
struct SymmetricCounts {
  std::vector<std::unordered_map<uint32_t, uint64_t>> adj;
  uint64_t pairs = 0;

  void resize(size_t n) {
    if (n < adj.size()) throw ConfigError("pair counts cannot shrink");
    adj.resize(n);
  }

  void add(uint32_t i, uint32_t j, uint64_t k) {
    auto [it, inserted] = adj[i].emplace(j, k);
    if (!inserted) it->second += k;
    auto [jt, jinserted] = adj[j].emplace(i, k);
    if (!jinserted) jt->second += k;
    if (inserted) pairs += 1;
  }

  uint64_t count(uint32_t i, uint32_t j) const {
    const auto it = adj[i].find(j);
    return it == adj[i].end() ? 0 : it->second;
  }

  bool operator==(const SymmetricCounts& o) const {
    return adj == o.adj && pairs == o.pairs;
  }
};

/// Bipartite sparse counts with both row (by object) and column (by word)
/// indexes kept in lockstep.
struct BipartiteCounts {
  std::vector<std::unordered_map<uint32_t, uint64_t>> rows, cols;
  uint64_t pairs = 0;

  void resize(size_t n_rows, size_t n_cols) {
    if (n_rows < rows.size() || n_cols < cols.size()) {
      throw ConfigError("pair counts cannot shrink");
    }
    rows.resize(n_rows);
    cols.resize(n_cols);
  }

  void add(uint32_t o, uint32_t w, uint64_t k) {
    auto [it, inserted] = rows[o].emplace(w, k);
    if (!inserted) it->second += k;
    auto [jt, jinserted] = cols[w].emplace(o, k);
    if (!jinserted) jt->second += k;
    if (inserted) pairs += 1;
  }

  void erase(uint32_t o, uint32_t w) {
    const auto it = rows[o].find(w);
    if (it == rows[o].end()) return;
    rows[o].erase(it);
    cols[w].erase(o);
    pairs -= 1;
  }

  uint64_t count(uint32_t o, uint32_t w) const {
    const auto it = rows[o].find(w);
    return it == rows[o].end() ? 0 : it->second;
  }

  bool operator==(const BipartiteCounts& o) const {
    return rows == o.rows && pairs == o.pairs;
  }
};

}  // namespace detail

struct CrossModalGraph {
  uint32_t n_objects = 0;
  uint32_t n_words = 0;
  std::vector<uint64_t> d_object, d_word;
  detail::SymmetricCounts oo, ww;
  detail::BipartiteCounts ow;
  uint64_t episodes_ingested = 0;
  uint64_t windows_ingested = 0;
  /// Mutation stamp; weight caches are valid only for a matching revision.
  uint64_t revision = 0;

  CrossModalGraph() = default;
  CrossModalGraph(uint32_t objects, uint32_t words) { resize(objects, words); }

  void resize(uint32_t objects, uint32_t words) {
    if (objects < n_objects || words < n_words) {
      throw ConfigError("graph cannot shrink");
    }
    n_objects = objects;
    n_words = words;
    d_object.resize(objects, 0);
    d_word.resize(words, 0);
    oo.resize(objects);
    ww.resize(words);
    ow.resize(objects, words);
    revision += 1;
  }

  void check_object(uint32_t o) const {
    if (o >= n_objects) {
      throw DataError("object id " + std::to_string(o) + " out of range (n_objects = " +
                      std::to_string(n_objects) + ")");
    }
  }
  void check_word(uint32_t w) const {
    if (w >= n_words) {
      throw DataError("word id " + std::to_string(w) + " out of range (n_words = " +
                      std::to_string(n_words) + ")");
    }
  }

  uint64_t object_count(uint32_t o) const {
    check_object(o);
    return d_object[o];
  }
  uint64_t word_count(uint32_t w) const {
    check_word(w);
    return d_word[w];
  }
  uint64_t object_pair_count(uint32_t i, uint32_t j) const {
    check_object(i);
    check_object(j);
    return i == j ? 0 : oo.count(i, j);
  }
  uint64_t word_pair_count(uint32_t i, uint32_t j) const {
    check_word(i);
    check_word(j);
    return i == j ? 0 : ww.count(i, j);
  }
  uint64_t cross_count(uint32_t o, uint32_t w) const {
    check_object(o);
    check_word(w);
    return ow.count(o, w);
  }

  uint64_t object_pair_edges() const { return oo.pairs; }
  uint64_t word_pair_edges() const { return ww.pairs; }
  uint64_t cross_edges() const { return ow.pairs; }

  const std::unordered_map<uint32_t, uint64_t>& object_neighbors(uint32_t o) const {
    check_object(o);
    return oo.adj[o];
  }
  const std::unordered_map<uint32_t, uint64_t>& word_neighbors(uint32_t w) const {
    check_word(w);
    return ww.adj[w];
  }
  const std::unordered_map<uint32_t, uint64_t>& cross_row(uint32_t o) const {
    check_object(o);
    return ow.rows[o];
  }
  const std::unordered_map<uint32_t, uint64_t>& cross_col(uint32_t w) const {
    check_word(w);
    return ow.cols[w];
  }

  /// Semantic equality; the revision stamp is deliberately ignored.
  bool operator==(const CrossModalGraph& o) const {
    return n_objects == o.n_objects && n_words == o.n_words &&
           d_object == o.d_object && d_word == o.d_word && oo == o.oo &&
           ww == o.ww && ow == o.ow && episodes_ingested == o.episodes_ingested &&
           windows_ingested == o.windows_ingested;
  }
};

/// Streams one episode into the graph: object counters once per episode,
/// word and cross counters once per context window. Validates every id
/// before mutating anything, so a rejected episode leaves no trace.
inline void ingest_episode(CrossModalGraph& g, const Episode& episode, uint32_t h) {
  if (h == 0) throw ConfigError("window size H must be >= 1");
  for (size_t k = 0; k < episode.objects.size(); ++k) {
    if (episode.objects[k] >= g.n_objects) {
      throw DataError("episode objects[" + std::to_string(k) + "] = " +
                      std::to_string(episode.objects[k]) + " out of range (n_objects = " +
                      std::to_string(g.n_objects) + ")");
    }
  }
  for (size_t k = 0; k < episode.words.size(); ++k) {
    if (episode.words[k] >= g.n_words) {
      throw DataError("episode words[" + std::to_string(k) + "] = " +
                      std::to_string(episode.words[k]) + " out of range (n_words = " +
                      std::to_string(g.n_words) + ")");
    }
  }

  std::vector<uint32_t> objects = episode.objects;
  std::sort(objects.begin(), objects.end());
  objects.erase(std::unique(objects.begin(), objects.end()), objects.end());

  for (const uint32_t b : objects) g.d_object[b] += 1;
  for (size_t i = 0; i < objects.size(); ++i) {
    for (size_t j = i + 1; j < objects.size(); ++j) {
      g.oo.add(objects[i], objects[j], 1);
    }
  }
  g.episodes_ingested += 1;

  for (const auto& q : context_windows(episode.words, h)) {
    g.windows_ingested += 1;
    for (const uint32_t w : q) g.d_word[w] += 1;
    for (size_t i = 0; i < q.size(); ++i) {
      for (size_t j = i + 1; j < q.size(); ++j) {
        g.ww.add(q[i], q[j], 1);
      }
    }
    for (const uint32_t b : objects) {
      for (const uint32_t w : q) g.ow.add(b, w, 1);
    }
  }
  g.revision += 1;
}

// ---------------------------------------------------------------------------
// Edge weights.

/// Within-modality weight c^2 / (d_i * d_j): 1 for nodes that always co-occur,
/// 0 for nodes that never do.
inline double within_weight(const CrossModalGraph& g, Modality m, uint32_t i, uint32_t j) {
  if (i == j) throw ConfigError("within-modality weight is undefined for i == j");
  uint64_t c, di, dj;
  if (m == Modality::Object) {
    c = g.object_pair_count(i, j);
    di = g.d_object[i];
    dj = g.d_object[j];
  } else {
    c = g.word_pair_count(i, j);
    di = g.d_word[i];
    dj = g.d_word[j];
  }
  if (c == 0 || di == 0 || dj == 0) return 0.0;
  const double cd = static_cast<double>(c);
  return cd * cd / (static_cast<double>(di) * static_cast<double>(dj));
}

/// Unnormalized cross-modal association s(o, w) = c_ow^2 / (d_o * d_w).
inline double cross_pair_strength(const CrossModalGraph& g, uint32_t o, uint32_t w) {
  const uint64_t c = g.cross_count(o, w);
  if (c == 0 || g.d_object[o] == 0 || g.d_word[w] == 0) return 0.0;
  const double cd = static_cast<double>(c);
  return cd * cd / (static_cast<double>(g.d_object[o]) * static_cast<double>(g.d_word[w]));
}

enum class CrossWeightMode {
  Product,         // a_o(w) * a_w(o)
  ObjectSideOnly,  // a_o(w)
  WordSideOnly,    // a_w(o)
  Prior,           // conditional-probability baseline p(o|w), row-normalized
};

inline const char* cross_weight_mode_name(CrossWeightMode m) {
  switch (m) {
    case CrossWeightMode::Product: return "product";
    case CrossWeightMode::ObjectSideOnly: return "object-side";
    case CrossWeightMode::WordSideOnly: return "word-side";
    case CrossWeightMode::Prior: return "prior";
  }
  return "?";
}

/// Precomputed row and column sums for cross-weight evaluation. Valid only
/// while the graph revision matches.
struct CrossWeightCache {
  std::vector<double> object_strength_sum;  // sum_w s(o, w) over row o
  std::vector<double> word_strength_sum;    // sum_o s(o, w) over column w
  std::vector<double> object_prior_sum;     // sum_w c_ow / d_w over row o
  uint64_t revision = 0;
};

inline CrossWeightCache build_cross_weight_cache(const CrossModalGraph& g) {
  CrossWeightCache cache;
  cache.object_strength_sum.assign(g.n_objects, 0.0);
  cache.word_strength_sum.assign(g.n_words, 0.0);
  cache.object_prior_sum.assign(g.n_objects, 0.0);
  for (uint32_t o = 0; o < g.n_objects; ++o) {
    for (const auto& [w, c] : g.cross_row(o)) {
      const double s = cross_pair_strength(g, o, w);
      cache.object_strength_sum[o] += s;
      cache.word_strength_sum[w] += s;
      if (g.d_word[w] > 0) {
        cache.object_prior_sum[o] +=
            static_cast<double>(c) / static_cast<double>(g.d_word[w]);
      }
    }
  }
  cache.revision = g.revision;
  return cache;
}

inline double cross_weight(const CrossModalGraph& g, const CrossWeightCache& cache,
                           uint32_t o, uint32_t w, CrossWeightMode mode) {
  if (cache.revision != g.revision) {
    throw ConfigError("cross weight cache is stale; rebuild after mutation");
  }
  g.check_object(o);
  g.check_word(w);

  if (mode == CrossWeightMode::Prior) {
    const uint64_t c = g.cross_count(o, w);
    if (c == 0 || g.d_word[w] == 0 || cache.object_prior_sum[o] <= 0.0) return 0.0;
    return (static_cast<double>(c) / static_cast<double>(g.d_word[w])) /
           cache.object_prior_sum[o];
  }

  const double s = cross_pair_strength(g, o, w);
  if (s == 0.0) return 0.0;
  const double row = cache.object_strength_sum[o];
  const double col = cache.word_strength_sum[w];
  switch (mode) {
    case CrossWeightMode::ObjectSideOnly:
      return row > 0.0 ? s / row : 0.0;
    case CrossWeightMode::WordSideOnly:
      return col > 0.0 ? s / col : 0.0;
    case CrossWeightMode::Product:
      return (row > 0.0 && col > 0.0) ? (s / row) * (s / col) : 0.0;
    case CrossWeightMode::Prior:
      break;
  }
  return 0.0;
}

inline double cross_weight(const CrossModalGraph& g, uint32_t o, uint32_t w,
                           CrossWeightMode mode) {
  g.check_object(o);
  g.check_word(w);
  CrossWeightCache cache;
  cache.revision = g.revision;
  cache.object_strength_sum.assign(g.n_objects, 0.0);
  cache.word_strength_sum.assign(g.n_words, 0.0);
  cache.object_prior_sum.assign(g.n_objects, 0.0);
  for (const auto& [w2, c] : g.cross_row(o)) {
    cache.object_strength_sum[o] += cross_pair_strength(g, o, w2);
    if (g.d_word[w2] > 0) {
      cache.object_prior_sum[o] +=
          static_cast<double>(c) / static_cast<double>(g.d_word[w2]);
    }
  }
  for (const auto& [o2, c] : g.cross_col(w)) {
    cache.word_strength_sum[w] += cross_pair_strength(g, o2, w);
  }
  return cross_weight(g, cache, o, w, mode);
}

/// p(w | o): cross weights over o's row, normalized to a distribution.
/// Entries are sorted by word id; empty when every weight is zero.
inline std::vector<std::pair<uint32_t, double>> mapping_distribution(
    const CrossModalGraph& g, const CrossWeightCache& cache, uint32_t o,
    CrossWeightMode mode) {
  g.check_object(o);
  std::vector<std::pair<uint32_t, double>> dist;
  dist.reserve(g.cross_row(o).size());
  for (const auto& [w, c] : g.cross_row(o)) {
    const double e = cross_weight(g, cache, o, w, mode);
    if (e > 0.0) dist.emplace_back(w, e);
  }
  std::sort(dist.begin(), dist.end());
  double total = 0.0;
  for (const auto& [w, e] : dist) total += e;
  if (total <= 0.0) return {};
  for (auto& [w, e] : dist) e /= total;
  return dist;
}

inline std::vector<std::pair<uint32_t, double>> mapping_distribution(
    const CrossModalGraph& g, uint32_t o, CrossWeightMode mode) {
  const CrossWeightCache cache = build_cross_weight_cache(g);
  return mapping_distribution(g, cache, o, mode);
}

// ---------------------------------------------------------------------------
// Zeroing for zero-shot evaluation.

enum class ZeroScope { PairOnly, RowAndColumn };

/// Returns a copy of the graph with the listed object-word co-occurrence
/// counts removed. PairOnly erases exactly the listed pairs; RowAndColumn
/// erases every cross pair sharing an object or a word with a listed pair.
/// Occurrence counters and within-modality counters are never touched.
inline CrossModalGraph zero_out_pairs(
    const CrossModalGraph& g,
    const std::vector<std::pair<uint32_t, uint32_t>>& pairs, ZeroScope scope) {
  for (const auto& [o, w] : pairs) {
    g.check_object(o);
    g.check_word(w);
  }
  CrossModalGraph out = g;
  for (const auto& [o, w] : pairs) {
    if (scope == ZeroScope::PairOnly) {
      out.ow.erase(o, w);
      continue;
    }
    std::vector<uint32_t> row_words;
    row_words.reserve(out.ow.rows[o].size());
    for (const auto& [w2, c] : out.ow.rows[o]) row_words.push_back(w2);
    for (const uint32_t w2 : row_words) out.ow.erase(o, w2);
    std::vector<uint32_t> col_objects;
    col_objects.reserve(out.ow.cols[w].size());
    for (const auto& [o2, c] : out.ow.cols[w]) col_objects.push_back(o2);
    for (const uint32_t o2 : col_objects) out.ow.erase(o2, w);
  }
  out.revision = g.revision + 1;
  return out;
}

namespace detail {

inline std::string format_weight(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Map>
inline std::vector<uint32_t> sorted_keys(const Map& m) {
  std::vector<uint32_t> keys;
  keys.reserve(m.size());
  for (const auto& [k, v] : m) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace detail

}  // namespace xsl
