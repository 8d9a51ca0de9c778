#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "temp_dir.hpp"
#include "xsl/corpus.hpp"
#include "xsl/synthetic.hpp"

using namespace xsl;

TEST_CASE("tokenize lowercases and splits on non-alphanumeric runs") {
  CHECK(tokenize("A dog runs.") == std::vector<std::string>{"a", "dog", "runs"});
  CHECK(tokenize("Strawberries, STRAWBERRIES!") ==
        std::vector<std::string>{"strawberries", "strawberries"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don", "t", "stop"});
  CHECK(tokenize("x86_64 rocks") == std::vector<std::string>{"x86", "64", "rocks"});
  CHECK(tokenize("2 dogs") == std::vector<std::string>{"2", "dogs"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("?!., ;").empty());
  CHECK(tokenize("   spaced\tout\nwords ") ==
        std::vector<std::string>{"spaced", "out", "words"});
  // Bytes above 0x7f are treated as word characters, so UTF-8 survives.
  CHECK(tokenize("caf\xc3\xa9 time") == std::vector<std::string>{"caf\xc3\xa9", "time"});
}

static std::vector<RawEpisode> two_episode_stream() {
  return {
      RawEpisode{{"dog"}, {"the", "dog", "runs"}},
      RawEpisode{{"cat"}, {"the", "cat", "sat"}},
  };
}

TEST_CASE("build_vocabulary assigns dense ids in first-seen order") {
  auto [objects, words] = build_vocabulary(two_episode_stream(), 1);

  REQUIRE(objects.size() == 2);
  CHECK(objects.symbols == std::vector<std::string>{"dog", "cat"});
  CHECK(objects.find("dog").value() == 0);
  CHECK(objects.find("cat").value() == 1);
  CHECK(objects.frequencies == std::vector<uint64_t>{1, 1});

  REQUIRE(words.size() == 5);
  CHECK(words.symbols == std::vector<std::string>{"the", "dog", "runs", "cat", "sat"});
  CHECK(words.frequencies == std::vector<uint64_t>{2, 1, 1, 1, 1});
  CHECK_FALSE(words.find("missing").has_value());
}

TEST_CASE("build_vocabulary min_count filters words but never objects") {
  auto [objects, words] = build_vocabulary(two_episode_stream(), 2);

  CHECK(objects.size() == 2);
  REQUIRE(words.size() == 1);
  CHECK(words.symbols == std::vector<std::string>{"the"});
  // Sub-threshold raw counts are retained for later resumption.
  CHECK(words.pending.at("dog") == 1);
  CHECK(words.pending.at("sat") == 1);

  const Episode ep = map_episode(two_episode_stream()[0], objects, words);
  CHECK(ep.objects == std::vector<uint32_t>{0});
  CHECK(ep.words == std::vector<uint32_t>{0});  // only "the" survives
}

TEST_CASE("build_vocabulary on an empty stream yields empty vocabularies") {
  auto [objects, words] = build_vocabulary({}, 1);
  CHECK(objects.size() == 0);
  CHECK(words.size() == 0);
}

TEST_CASE("map_episode sorts and deduplicates the object set") {
  Vocabulary objects(Modality::Object);
  objects.add_symbol("a", 1);
  objects.add_symbol("b", 1);
  Vocabulary words(Modality::Word);
  words.add_symbol("w", 1);

  const Episode ep = map_episode(RawEpisode{{"b", "a", "b"}, {"w", "w"}}, objects, words);
  CHECK(ep.objects == std::vector<uint32_t>{0, 1});
  CHECK(ep.words == std::vector<uint32_t>{0, 0});  // word sequence keeps duplicates
}

TEST_CASE("map_episode rejects unknown object symbols") {
  Vocabulary objects(Modality::Object);
  Vocabulary words(Modality::Word);
  CHECK_THROWS_AS(map_episode(RawEpisode{{"ghost"}, {}}, objects, words), DataError);
}

TEST_CASE("window_episode matches the worked two-word example") {
  const Episode ep{{7}, {0, 1}};
  const auto windows = window_episode(ep, 2);

  REQUIRE(windows.size() == 3);
  CHECK(windows[0].context == std::vector<uint32_t>{0});
  CHECK(windows[1].context == std::vector<uint32_t>{0, 1});
  CHECK(windows[2].context == std::vector<uint32_t>{1});
  for (const auto& w : windows) CHECK(w.objects == std::vector<uint32_t>{7});
}

TEST_CASE("window_episode window count is N + H - 1, zero for empty text") {
  const Episode ep{{0}, {3, 4, 5}};
  CHECK(window_episode(ep, 1).size() == 3);
  CHECK(window_episode(ep, 4).size() == 6);
  CHECK(window_episode(Episode{{0}, {}}, 5).empty());
  CHECK_THROWS_AS(window_episode(ep, 0), ConfigError);
}

TEST_CASE("window_episode has set semantics inside a window") {
  const Episode ep{{}, {9, 9}};
  const auto windows = window_episode(ep, 2);
  REQUIRE(windows.size() == 3);
  for (const auto& w : windows) CHECK(w.context == std::vector<uint32_t>{9});
}

TEST_CASE("windowing properties on random duplicate-free sequences") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const uint32_t n = 1 + static_cast<uint32_t>(rng.below(12));
    const uint32_t h = 1 + static_cast<uint32_t>(rng.below(6));
    // Distinct ids so per-word window membership is unambiguous.
    std::vector<uint32_t> words(n);
    for (uint32_t i = 0; i < n; ++i) words[i] = i * 10;
    rng.shuffle(words);

    const auto windows = context_windows(words, h);
    REQUIRE(windows.size() == n + h - 1);

    std::vector<uint32_t> appearances(n * 10 + 1, 0);
    for (const auto& w : windows) {
      CHECK(!w.empty());
      CHECK(w.size() <= h);
      CHECK(std::is_sorted(w.begin(), w.end()));
      for (uint32_t id : w) appearances[id] += 1;
    }
    // Every word participates in exactly H windows; begin-padding plus the
    // truncated tail windows make the count exact at both boundaries.
    for (uint32_t id : words) CHECK(appearances[id] == h);
  }
}

TEST_CASE("episode JSONL round trip supports text, words, and objects-only forms") {
  TempDir tmp;
  const std::string path = tmp.file("episodes.jsonl");
  {
    std::ofstream out(path);
    out << R"({"objects": ["dog", "cup"], "text": "A dog by a cup."})" << "\n";
    out << R"({"objects": ["sun"], "words": ["warm", "sun"]})" << "\n";
    out << R"({"objects": ["moon"]})" << "\n";
  }

  const auto episodes = read_episodes_jsonl(path);
  REQUIRE(episodes.size() == 3);
  CHECK(episodes[0].objects == std::vector<std::string>{"dog", "cup"});
  CHECK(episodes[0].words == std::vector<std::string>{"a", "dog", "by", "a", "cup"});
  CHECK(episodes[1].words == std::vector<std::string>{"warm", "sun"});
  CHECK(episodes[2].objects == std::vector<std::string>{"moon"});
  CHECK(episodes[2].words.empty());
}

TEST_CASE("episode JSONL write then read is lossless") {
  TempDir tmp;
  const std::string path = tmp.file("episodes.jsonl");
  const std::vector<RawEpisode> episodes = {
      {{"a", "b"}, {"one", "two", "one"}},
      {{"c"}, {}},
  };
  write_episodes_jsonl(path, episodes);
  const auto back = read_episodes_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].objects == episodes[0].objects);
  CHECK(back[0].words == episodes[0].words);
  CHECK(back[1].objects == episodes[1].objects);
  CHECK(back[1].words.empty());
}

TEST_CASE("episode JSONL errors carry the offending line number") {
  TempDir tmp;

  SECTION("syntax error") {
    const std::string path = tmp.file("bad.jsonl");
    std::ofstream(path) << R"({"objects": ["a"]})" << "\n"
                        << "{not json\n";
    try {
      read_episodes_jsonl(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SECTION("both text and words present") {
    const std::string path = tmp.file("dual.jsonl");
    std::ofstream(path) << R"({"objects": ["a"], "text": "x", "words": ["x"]})" << "\n";
    CHECK_THROWS_AS(read_episodes_jsonl(path), DataError);
  }

  SECTION("missing objects field") {
    const std::string path = tmp.file("noobj.jsonl");
    std::ofstream(path) << R"({"text": "x"})" << "\n";
    CHECK_THROWS_AS(read_episodes_jsonl(path), DataError);
  }

  SECTION("missing file") {
    CHECK_THROWS_AS(read_episodes_jsonl(tmp.file("absent.jsonl")), IoError);
  }
}

TEST_CASE("gold lexicon JSON round trip") {
  TempDir tmp;
  const std::string path = tmp.file("gold.json");
  const RawGold gold = {{"dog", {"dog", "dogs"}}, {"sun", {"sun"}}};
  save_gold_json(path, gold);
  CHECK(load_gold_json(path) == gold);
  CHECK_THROWS_AS(load_gold_json(tmp.file("absent.json")), IoError);
}

TEST_CASE("generate_synthetic_corpus is deterministic per seed") {
  SyntheticConfig cfg;
  cfg.n_objects = 8;
  cfg.distractor_vocab_size = 10;
  cfg.n_episodes = 200;
  cfg.scene_max = 3;
  cfg.seed = 42;

  const auto a = generate_synthetic_corpus(cfg);
  const auto b = generate_synthetic_corpus(cfg);
  REQUIRE(a.episodes.size() == 200);
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].objects == b.episodes[i].objects);
    CHECK(a.episodes[i].words == b.episodes[i].words);
  }
  CHECK(a.gold == b.gold);

  cfg.seed = 43;
  const auto c = generate_synthetic_corpus(cfg);
  bool any_diff = false;
  for (size_t i = 0; i < a.episodes.size() && !any_diff; ++i) {
    any_diff = a.episodes[i].objects != c.episodes[i].objects ||
               a.episodes[i].words != c.episodes[i].words;
  }
  CHECK(any_diff);
}

TEST_CASE("synthetic episodes respect scene and distractor ranges") {
  SyntheticConfig cfg;
  cfg.n_objects = 12;
  cfg.scene_min = 2;
  cfg.scene_max = 5;
  cfg.naming_probability = 1.0;
  cfg.distractor_vocab_size = 9;
  cfg.distractors_min = 1;
  cfg.distractors_max = 3;
  cfg.n_episodes = 300;
  cfg.seed = 5;

  const auto corpus = generate_synthetic_corpus(cfg);
  for (const auto& ep : corpus.episodes) {
    CHECK(ep.objects.size() >= 2);
    CHECK(ep.objects.size() <= 5);
    CHECK(std::set<std::string>(ep.objects.begin(), ep.objects.end()).size() ==
          ep.objects.size());
    size_t names = 0, fillers = 0;
    for (const auto& w : ep.words) {
      if (w.rfind("fil", 0) == 0) {
        ++fillers;
      } else {
        ++names;
      }
    }
    // naming_probability 1 emits exactly one name per scene object.
    CHECK(names == ep.objects.size());
    CHECK(fillers >= 1);
    CHECK(fillers <= 3);
  }
}

TEST_CASE("synthetic corpus with naming 0 and no distractors is objects-only") {
  SyntheticConfig cfg;
  cfg.n_objects = 4;
  cfg.naming_probability = 0.0;
  cfg.distractor_vocab_size = 0;
  cfg.distractors_min = 0;
  cfg.distractors_max = 0;
  cfg.n_episodes = 50;
  cfg.scene_max = 2;
  cfg.seed = 1;

  const auto corpus = generate_synthetic_corpus(cfg);
  for (const auto& ep : corpus.episodes) {
    CHECK(!ep.objects.empty());
    CHECK(ep.words.empty());
  }
}

TEST_CASE("synthetic gold lexicon lists every object with its name words") {
  SyntheticConfig cfg;
  cfg.n_objects = 3;
  cfg.n_episodes = 10;
  cfg.scene_max = 2;
  cfg.distractor_vocab_size = 5;
  const auto corpus = generate_synthetic_corpus(cfg);
  REQUIRE(corpus.gold.size() == 3);
  for (const auto& [obj, aliases] : corpus.gold) {
    REQUIRE(aliases.size() == 1);
    CHECK(obj.rfind("obj", 0) == 0);
    CHECK(aliases[0].rfind("dax", 0) == 0);
  }
}

TEST_CASE("synthetic config with alias lexicon emits only listed words") {
  SyntheticConfig cfg;
  cfg.n_objects = 2;
  cfg.scene_max = 1;
  cfg.naming_probability = 1.0;
  cfg.distractor_vocab_size = 0;
  cfg.distractors_min = 0;
  cfg.distractors_max = 0;
  cfg.n_episodes = 400;
  cfg.seed = 9;
  cfg.name_words = {"doggo", "pup", "kitty"};
  cfg.lexicon = {{{0, 0.5}, {1, 0.5}}, {{2, 1.0}}};

  const auto corpus = generate_synthetic_corpus(cfg);
  CHECK(corpus.gold.at("obj000") == std::vector<std::string>{"doggo", "pup"});
  CHECK(corpus.gold.at("obj001") == std::vector<std::string>{"kitty"});
  size_t doggo = 0, pup = 0;
  for (const auto& ep : corpus.episodes) {
    REQUIRE(ep.words.size() == 1);
    if (ep.objects[0] == "obj000") {
      REQUIRE((ep.words[0] == "doggo" || ep.words[0] == "pup"));
      (ep.words[0] == "doggo" ? doggo : pup) += 1;
    } else {
      CHECK(ep.words[0] == "kitty");
    }
  }
  // Both aliases are actually sampled.
  CHECK(doggo > 0);
  CHECK(pup > 0);
}

TEST_CASE("scene affinity skews pair co-occurrence, zero sharpness stays flat") {
  SyntheticConfig cfg;
  cfg.n_objects = 20;
  cfg.scene_min = 2;
  cfg.scene_max = 4;
  cfg.naming_probability = 0.0;
  cfg.distractor_vocab_size = 0;
  cfg.distractors_min = 0;
  cfg.distractors_max = 0;
  cfg.n_episodes = 4000;
  cfg.seed = 31;

  const auto pair_counts = [](const SyntheticCorpus& corpus) {
    std::map<std::pair<std::string, std::string>, uint64_t> counts;
    for (const auto& ep : corpus.episodes) {
      for (size_t i = 0; i < ep.objects.size(); ++i) {
        for (size_t j = i + 1; j < ep.objects.size(); ++j) {
          counts[{ep.objects[i], ep.objects[j]}] += 1;
        }
      }
    }
    uint64_t max = 0, total = 0;
    for (const auto& [pair, c] : counts) {
      max = std::max(max, c);
      total += c;
    }
    // Ratio of the hottest pair to the all-pair average; 190 unordered pairs.
    return static_cast<double>(max) * 190.0 / static_cast<double>(total);
  };

  cfg.affinity_sharpness = 0.0;
  const double flat = pair_counts(generate_synthetic_corpus(cfg));
  cfg.affinity_sharpness = 2.0;
  const double skewed = pair_counts(generate_synthetic_corpus(cfg));

  // Uniform scenes keep every pair near the mean; affinity concentrates
  // co-occurrence on the high-affinity pairs by an order of magnitude.
  CHECK(flat < 2.0);
  CHECK(skewed > 5.0);
  CHECK(skewed > 3.0 * flat);
}

TEST_CASE("synthetic config validation rejects inconsistent settings") {
  const auto invalid = [](auto mutate) {
    SyntheticConfig cfg;
    cfg.n_objects = 4;
    cfg.scene_max = 2;
    cfg.distractor_vocab_size = 5;
    cfg.n_episodes = 1;
    mutate(cfg);
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigError);
  };
  invalid([](SyntheticConfig& c) { c.n_objects = 0; });
  invalid([](SyntheticConfig& c) { c.scene_min = 0; });
  invalid([](SyntheticConfig& c) { c.scene_min = 3; c.scene_max = 2; });
  invalid([](SyntheticConfig& c) { c.scene_max = 5; });  // exceeds n_objects
  invalid([](SyntheticConfig& c) { c.naming_probability = 1.5; });
  invalid([](SyntheticConfig& c) { c.distractors_min = 4; c.distractors_max = 2; });
  invalid([](SyntheticConfig& c) { c.distractor_vocab_size = 0; });  // range needs words
  invalid([](SyntheticConfig& c) { c.affinity_sharpness = -0.5; });
  invalid([](SyntheticConfig& c) {
    c.affinity_sharpness = std::numeric_limits<double>::quiet_NaN();
  });
  invalid([](SyntheticConfig& c) {
    c.name_words = {"a"};
    c.lexicon = {{{0, 0.6}, {0, 0.3}}};  // probabilities do not sum to 1
  });
  invalid([](SyntheticConfig& c) {
    c.name_words = {"a"};
    c.lexicon = {{{5, 1.0}}};  // word id out of range
  });
  invalid([](SyntheticConfig& c) {
    c.name_words = {"a"};
    c.lexicon = {{{0, 1.0}}};  // lexicon size != n_objects
  });
}
