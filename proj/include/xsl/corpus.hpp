#pragma once

// Episode corpus handling: tokenization, vocabulary construction, local
// context windowing, and the JSONL episode / JSON gold-lexicon file formats.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "xsl/common.hpp"

namespace xsl {

enum class Modality { Object, Word };

inline const char* modality_name(Modality m) {
  return m == Modality::Object ? "object" : "word";
}

/// Bijection between symbols and dense ids, ids assigned in first-seen order.
/// Words below min_count are excluded from the id space; their raw counts are
/// kept in `pending` so a resumed ingestion can promote them once they cross
/// the threshold. Objects are never frequency-filtered.
struct Vocabulary {
  Modality modality = Modality::Word;
  uint32_t min_count = 1;
  std::vector<std::string> symbols;
  std::vector<uint64_t> frequencies;
  std::unordered_map<std::string, uint32_t> ids;
  std::unordered_map<std::string, uint64_t> pending;

  Vocabulary() = default;
  explicit Vocabulary(Modality m, uint32_t min_count_ = 1)
      : modality(m), min_count(min_count_) {}

  size_t size() const { return symbols.size(); }

  std::optional<uint32_t> find(const std::string& symbol) const {
    const auto it = ids.find(symbol);
    if (it == ids.end()) return std::nullopt;
    return it->second;
  }

  const std::string& symbol_of(uint32_t id) const {
    if (id >= symbols.size()) throw DataError("vocabulary id out of range");
    return symbols[id];
  }

  uint32_t add_symbol(const std::string& symbol, uint64_t frequency) {
    if (ids.count(symbol)) throw DataError("duplicate vocabulary symbol: " + symbol);
    const uint32_t id = static_cast<uint32_t>(symbols.size());
    symbols.push_back(symbol);
    frequencies.push_back(frequency);
    ids.emplace(symbol, id);
    return id;
  }

  bool operator==(const Vocabulary& o) const {
    return modality == o.modality && min_count == o.min_count &&
           symbols == o.symbols && frequencies == o.frequencies &&
           pending == o.pending;
  }
};

/// Raw (symbolic) episode as read from disk or emitted by the generator.
struct RawEpisode {
  std::vector<std::string> objects;
  std::vector<std::string> words;
};

/// Id-mapped episode: sorted unique object set plus the word sequence.
struct Episode {
  std::vector<uint32_t> objects;
  std::vector<uint32_t> words;
};

/// One local context: the episode's object set with up to H context words.
struct WindowedInput {
  std::vector<uint32_t> objects;
  std::vector<uint32_t> context;
};

/// Lowercased tokens; splits on any run of non-alphanumeric ASCII, drops
/// empty tokens. Bytes >= 0x80 count as word characters so UTF-8 passes
/// through untouched.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (uc >= 0x80 || std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace detail {

/// Occurrence counts per symbol plus first-seen order.
struct SymbolTally {
  std::vector<std::string> order;
  std::unordered_map<std::string, uint64_t> counts;

  void note(const std::string& symbol) {
    auto [it, inserted] = counts.emplace(symbol, 1);
    if (inserted) {
      order.push_back(symbol);
    } else {
      it->second += 1;
    }
  }
};

inline void tally_stream(const std::vector<RawEpisode>& episodes,
                         SymbolTally& objects, SymbolTally& words) {
  for (const auto& ep : episodes) {
    for (const auto& o : ep.objects) objects.note(o);
    for (const auto& w : ep.words) words.note(w);
  }
}

}  // namespace detail

/// Offline two-pass vocabulary construction over a finite episode stream.
inline std::pair<Vocabulary, Vocabulary> build_vocabulary(
    const std::vector<RawEpisode>& episodes, uint32_t min_count = 1) {
  if (min_count == 0) throw ConfigError("min_count must be >= 1");
  detail::SymbolTally objects, words;
  detail::tally_stream(episodes, objects, words);

  Vocabulary object_vocab(Modality::Object, 1);
  for (const auto& sym : objects.order) {
    object_vocab.add_symbol(sym, objects.counts.at(sym));
  }

  Vocabulary word_vocab(Modality::Word, min_count);
  for (const auto& sym : words.order) {
    const uint64_t n = words.counts.at(sym);
    if (n >= min_count) {
      word_vocab.add_symbol(sym, n);
    } else {
      word_vocab.pending.emplace(sym, n);
    }
  }
  return {std::move(object_vocab), std::move(word_vocab)};
}

/// Folds a further episode stream into existing vocabularies. New symbols get
/// fresh ids in first-seen order; pending words are promoted once their
/// cumulative count reaches min_count.
inline void extend_vocabularies(Vocabulary& object_vocab, Vocabulary& word_vocab,
                                const std::vector<RawEpisode>& episodes) {
  detail::SymbolTally objects, words;
  detail::tally_stream(episodes, objects, words);

  for (const auto& sym : objects.order) {
    const uint64_t n = objects.counts.at(sym);
    if (auto id = object_vocab.find(sym)) {
      object_vocab.frequencies[*id] += n;
    } else {
      object_vocab.add_symbol(sym, n);
    }
  }
  for (const auto& sym : words.order) {
    const uint64_t n = words.counts.at(sym);
    if (auto id = word_vocab.find(sym)) {
      word_vocab.frequencies[*id] += n;
      continue;
    }
    const auto pending_it = word_vocab.pending.find(sym);
    const uint64_t total =
        n + (pending_it == word_vocab.pending.end() ? 0 : pending_it->second);
    if (total >= word_vocab.min_count) {
      if (pending_it != word_vocab.pending.end()) word_vocab.pending.erase(pending_it);
      word_vocab.add_symbol(sym, total);
    } else {
      word_vocab.pending[sym] = total;
    }
  }
}

/// Maps a raw episode onto vocabulary ids. Unknown objects are an error;
/// words outside the vocabulary (filtered or unseen) are dropped from the
/// sequence before windowing ever sees them.
inline Episode map_episode(const RawEpisode& raw, const Vocabulary& object_vocab,
                           const Vocabulary& word_vocab) {
  Episode ep;
  ep.objects.reserve(raw.objects.size());
  for (const auto& sym : raw.objects) {
    const auto id = object_vocab.find(sym);
    if (!id) throw DataError("unknown object symbol: " + sym);
    ep.objects.push_back(*id);
  }
  std::sort(ep.objects.begin(), ep.objects.end());
  ep.objects.erase(std::unique(ep.objects.begin(), ep.objects.end()), ep.objects.end());

  ep.words.reserve(raw.words.size());
  for (const auto& sym : raw.words) {
    if (const auto id = word_vocab.find(sym)) ep.words.push_back(*id);
  }
  return ep;
}

/// Context word sets for every window position. The sequence is conceptually
/// prefixed with H-1 dummy positions, giving N + H - 1 windows; window t
/// covers padded positions [t, t + H - 1], truncated at the sequence end.
/// Dummies never appear in the output and duplicate words collapse per
/// window (set semantics). Each word takes part in exactly H windows.
inline std::vector<std::vector<uint32_t>> context_windows(
    const std::vector<uint32_t>& words, uint32_t h) {
  if (h == 0) throw ConfigError("window size H must be >= 1");
  std::vector<std::vector<uint32_t>> windows;
  if (words.empty()) return windows;
  const size_t n = words.size();
  const size_t total = n + h - 1;
  windows.reserve(total);
  for (size_t t = 0; t < total; ++t) {
    std::vector<uint32_t> context;
    const size_t hi = std::min(t + h - 1, total - 1);
    for (size_t p = t; p <= hi; ++p) {
      if (p >= static_cast<size_t>(h) - 1) context.push_back(words[p - (h - 1)]);
    }
    std::sort(context.begin(), context.end());
    context.erase(std::unique(context.begin(), context.end()), context.end());
    windows.push_back(std::move(context));
  }
  return windows;
}

inline std::vector<WindowedInput> window_episode(const Episode& episode, uint32_t h) {
  std::vector<WindowedInput> out;
  for (auto& context : context_windows(episode.words, h)) {
    out.push_back(WindowedInput{episode.objects, std::move(context)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats.

/// Episode JSONL: one JSON object per line with an "objects" array and either
/// a raw "text" string (tokenized on read) or a pre-tokenized "words" array.
/// Objects-only episodes carry neither. Blank lines are skipped.
inline std::vector<RawEpisode> read_episodes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw IoError("cannot open episode file: " + path);

  const auto fail = [&](size_t line_no, const std::string& why) -> void {
    throw DataError(path + ": line " + std::to_string(line_no) + ": " + why);
  };

  std::vector<RawEpisode> episodes;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(line_no, "invalid JSON object");

    RawEpisode ep;
    if (!j.contains("objects") || !j.at("objects").is_array()) {
      fail(line_no, "missing \"objects\" array");
    }
    for (const auto& o : j.at("objects")) {
      if (!o.is_string()) fail(line_no, "non-string object symbol");
      ep.objects.push_back(o.get<std::string>());
    }

    const bool has_text = j.contains("text");
    const bool has_words = j.contains("words");
    if (has_text && has_words) fail(line_no, "both \"text\" and \"words\" present");
    if (has_text) {
      if (!j.at("text").is_string()) fail(line_no, "\"text\" must be a string");
      ep.words = tokenize(j.at("text").get<std::string>());
    } else if (has_words) {
      if (!j.at("words").is_array()) fail(line_no, "\"words\" must be an array");
      for (const auto& w : j.at("words")) {
        if (!w.is_string()) fail(line_no, "non-string word token");
        ep.words.push_back(w.get<std::string>());
      }
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

inline void write_episodes_jsonl(const std::string& path,
                                 const std::vector<RawEpisode>& episodes) {
  std::ofstream out(path);
  if (!out.is_open()) throw IoError("cannot write episode file: " + path);
  for (const auto& ep : episodes) {
    nlohmann::json j;
    j["objects"] = ep.objects;
    if (!ep.words.empty()) j["words"] = ep.words;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing episode file: " + path);
}

/// Gold lexicon: object symbol -> acceptable name words (alias set).
using RawGold = std::map<std::string, std::vector<std::string>>;

inline RawGold load_gold_json(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw IoError("cannot open gold lexicon: " + path);
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError(path + ": gold lexicon must be a JSON object");
  }
  RawGold gold;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_array()) throw DataError(path + ": alias set must be an array");
    std::vector<std::string> aliases;
    for (const auto& a : value) {
      if (!a.is_string()) throw DataError(path + ": non-string alias");
      aliases.push_back(a.get<std::string>());
    }
    gold.emplace(key, std::move(aliases));
  }
  return gold;
}

inline void save_gold_json(const std::string& path, const RawGold& gold) {
  std::ofstream out(path);
  if (!out.is_open()) throw IoError("cannot write gold lexicon: " + path);
  out << nlohmann::json(gold).dump(2) << "\n";
  if (!out) throw IoError("failed writing gold lexicon: " + path);
}

}  // namespace xsl
