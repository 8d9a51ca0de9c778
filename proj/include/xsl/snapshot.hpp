#pragma once

// Versioned binary snapshot of a graph bundle (both vocabularies plus the
// co-occurrence graph), and the CSV edge-list export. The file layout is a
// magic tag, a length-prefixed JSON header carrying structural counts, the
// payload sections in a fixed order, then a trailer tag. Loading validates
// every length against the header so a truncated or damaged file fails with
// a corrupt-file error and never yields partial state.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xsl/binio.hpp"
#include "xsl/common.hpp"
#include "xsl/corpus.hpp"
#include "xsl/graph.hpp"

namespace xsl {

/// Everything downstream stages need from ingestion: symbol tables, the
/// counters, and the window size the counters were built with.
struct GraphBundle {
  Vocabulary objects{Modality::Object};
  Vocabulary words{Modality::Word};
  CrossModalGraph graph;
  uint32_t window_size = 10;
};

namespace detail {

constexpr char kSnapshotMagic[8] = {'X', 'S', 'L', 'S', 'N', 'A', 'P', '1'};
constexpr char kSnapshotTrailer[8] = {'X', 'S', 'L', 'E', 'N', 'D', '.', '\n'};
constexpr uint32_t kSnapshotVersion = 1;

inline void put_vocabulary(std::ostream& out, const Vocabulary& v) {
  put_u32(out, v.min_count);
  put_u32(out, static_cast<uint32_t>(v.symbols.size()));
  for (size_t i = 0; i < v.symbols.size(); ++i) {
    put_string(out, v.symbols[i]);
    put_u64(out, v.frequencies[i]);
  }
  const std::map<std::string, uint64_t> pending(v.pending.begin(), v.pending.end());
  put_u32(out, static_cast<uint32_t>(pending.size()));
  for (const auto& [sym, n] : pending) {
    put_string(out, sym);
    put_u64(out, n);
  }
}

inline Vocabulary get_vocabulary(std::istream& in, Modality modality) {
  Vocabulary v(modality);
  v.min_count = get_u32(in);
  const uint32_t n = get_u32(in);
  for (uint32_t i = 0; i < n; ++i) {
    const std::string sym = get_string(in);
    const uint64_t freq = get_u64(in);
    v.add_symbol(sym, freq);
  }
  const uint32_t n_pending = get_u32(in);
  for (uint32_t i = 0; i < n_pending; ++i) {
    const std::string sym = get_string(in);
    v.pending[sym] = get_u64(in);
  }
  return v;
}

/// Pairs of a symmetric family, each once with i < j, sorted.
inline std::vector<std::pair<std::pair<uint32_t, uint32_t>, uint64_t>> sorted_pairs(
    const SymmetricCounts& c) {
  std::vector<std::pair<std::pair<uint32_t, uint32_t>, uint64_t>> out;
  out.reserve(c.pairs);
  for (uint32_t i = 0; i < c.adj.size(); ++i) {
    for (const auto& [j, n] : c.adj[i]) {
      if (i < j) out.push_back({{i, j}, n});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::pair<std::pair<uint32_t, uint32_t>, uint64_t>> sorted_pairs(
    const BipartiteCounts& c) {
  std::vector<std::pair<std::pair<uint32_t, uint32_t>, uint64_t>> out;
  out.reserve(c.pairs);
  for (uint32_t o = 0; o < c.rows.size(); ++o) {
    for (const auto& [w, n] : c.rows[o]) out.push_back({{o, w}, n});
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline void save_snapshot(const GraphBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw IoError("cannot write snapshot: " + path);

  const auto oo = detail::sorted_pairs(bundle.graph.oo);
  const auto ww = detail::sorted_pairs(bundle.graph.ww);
  const auto ow = detail::sorted_pairs(bundle.graph.ow);

  nlohmann::json header;
  header["version"] = detail::kSnapshotVersion;
  header["window_size"] = bundle.window_size;
  header["n_objects"] = bundle.graph.n_objects;
  header["n_words"] = bundle.graph.n_words;
  header["oo_pairs"] = oo.size();
  header["ww_pairs"] = ww.size();
  header["ow_pairs"] = ow.size();
  header["episodes"] = bundle.graph.episodes_ingested;
  header["windows"] = bundle.graph.windows_ingested;

  out.write(detail::kSnapshotMagic, 8);
  detail::put_string(out, header.dump());
  detail::put_vocabulary(out, bundle.objects);
  detail::put_vocabulary(out, bundle.words);
  for (const uint64_t d : bundle.graph.d_object) detail::put_u64(out, d);
  for (const uint64_t d : bundle.graph.d_word) detail::put_u64(out, d);
  for (const auto& family : {oo, ww, ow}) {
    for (const auto& [pair, n] : family) {
      detail::put_u32(out, pair.first);
      detail::put_u32(out, pair.second);
      detail::put_u64(out, n);
    }
  }
  out.write(detail::kSnapshotTrailer, 8);
  if (!out) throw IoError("failed writing snapshot: " + path);
}

inline GraphBundle load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw IoError("cannot open snapshot: " + path);

  try {
    char magic[8];
    if (!in.read(magic, 8)) throw SnapshotCorruptError("snapshot truncated");
    if (!std::equal(magic, magic + 8, detail::kSnapshotMagic)) {
      throw SnapshotCorruptError("not a graph snapshot: " + path);
    }

    const std::string header_text = detail::get_string(in);
    const nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("version")) {
      throw SnapshotCorruptError("snapshot header unreadable");
    }
    const auto version = header.at("version").get<uint32_t>();
    if (version != detail::kSnapshotVersion) {
      throw SnapshotVersionError("snapshot version " + std::to_string(version) +
                                 ", expected " + std::to_string(detail::kSnapshotVersion));
    }

    GraphBundle bundle;
    bundle.window_size = header.at("window_size").get<uint32_t>();
    const auto n_objects = header.at("n_objects").get<uint32_t>();
    const auto n_words = header.at("n_words").get<uint32_t>();

    bundle.objects = detail::get_vocabulary(in, Modality::Object);
    bundle.words = detail::get_vocabulary(in, Modality::Word);
    if (bundle.objects.size() != n_objects || bundle.words.size() != n_words) {
      throw SnapshotCorruptError("snapshot vocabulary sizes disagree with header");
    }

    bundle.graph.resize(n_objects, n_words);
    for (uint32_t i = 0; i < n_objects; ++i) bundle.graph.d_object[i] = detail::get_u64(in);
    for (uint32_t i = 0; i < n_words; ++i) bundle.graph.d_word[i] = detail::get_u64(in);

    const auto read_pairs = [&](uint64_t count, uint32_t max_i, uint32_t max_j, auto&& add) {
      for (uint64_t k = 0; k < count; ++k) {
        const uint32_t i = detail::get_u32(in);
        const uint32_t j = detail::get_u32(in);
        const uint64_t n = detail::get_u64(in);
        if (i >= max_i || j >= max_j || n == 0) {
          throw SnapshotCorruptError("snapshot pair entry out of range");
        }
        add(i, j, n);
      }
    };
    read_pairs(header.at("oo_pairs").get<uint64_t>(), n_objects, n_objects,
               [&](uint32_t i, uint32_t j, uint64_t n) {
                 if (i >= j) throw SnapshotCorruptError("snapshot pair order invalid");
                 bundle.graph.oo.add(i, j, n);
               });
    read_pairs(header.at("ww_pairs").get<uint64_t>(), n_words, n_words,
               [&](uint32_t i, uint32_t j, uint64_t n) {
                 if (i >= j) throw SnapshotCorruptError("snapshot pair order invalid");
                 bundle.graph.ww.add(i, j, n);
               });
    read_pairs(header.at("ow_pairs").get<uint64_t>(), n_objects, n_words,
               [&](uint32_t i, uint32_t j, uint64_t n) { bundle.graph.ow.add(i, j, n); });

    bundle.graph.episodes_ingested = header.at("episodes").get<uint64_t>();
    bundle.graph.windows_ingested = header.at("windows").get<uint64_t>();

    char trailer[8];
    if (!in.read(trailer, 8) || !std::equal(trailer, trailer + 8, detail::kSnapshotTrailer)) {
      throw SnapshotCorruptError("snapshot trailer missing");
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
      throw SnapshotCorruptError("snapshot has trailing garbage");
    }
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotCorruptError(std::string("snapshot header unreadable: ") + e.what());
  } catch (const DataError& e) {
    throw SnapshotCorruptError(std::string("snapshot inconsistent: ") + e.what());
  }
}

/// Edge list CSV: modality,i_symbol,j_symbol,count,weight. Within-modality
/// rows carry the c^2/(d_i d_j) weight, cross rows the Product-mode weight.
inline void export_graph_csv(const GraphBundle& bundle, std::ostream& out) {
  const CrossModalGraph& g = bundle.graph;
  out << "modality,i_symbol,j_symbol,count,weight\n";
  for (const auto& [pair, n] : detail::sorted_pairs(g.oo)) {
    out << "object," << bundle.objects.symbol_of(pair.first) << ','
        << bundle.objects.symbol_of(pair.second) << ',' << n << ','
        << detail::format_weight(within_weight(g, Modality::Object, pair.first, pair.second))
        << '\n';
  }
  for (const auto& [pair, n] : detail::sorted_pairs(g.ww)) {
    out << "word," << bundle.words.symbol_of(pair.first) << ','
        << bundle.words.symbol_of(pair.second) << ',' << n << ','
        << detail::format_weight(within_weight(g, Modality::Word, pair.first, pair.second))
        << '\n';
  }
  const CrossWeightCache cache = build_cross_weight_cache(g);
  for (const auto& [pair, n] : detail::sorted_pairs(g.ow)) {
    out << "cross," << bundle.objects.symbol_of(pair.first) << ','
        << bundle.words.symbol_of(pair.second) << ',' << n << ','
        << detail::format_weight(
               cross_weight(g, cache, pair.first, pair.second, CrossWeightMode::Product))
        << '\n';
  }
}

}  // namespace xsl
