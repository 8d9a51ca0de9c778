// End-to-end tour of the library on a small synthetic world: build the
// co-occurrence graph, read off the count-based mapping, then train aligned
// embeddings and recover held-out pairs zero-shot.

#include <iostream>

#include "xsl/corpus.hpp"
#include "xsl/eval.hpp"
#include "xsl/graph.hpp"
#include "xsl/model.hpp"
#include "xsl/snapshot.hpp"
#include "xsl/synthetic.hpp"
#include "xsl/train.hpp"

int main() {
  // A 12-object world: scenes of 1-3 objects, each named 90% of the time,
  // with a few distractor words mixed into every utterance.
  xsl::SyntheticConfig world;
  world.n_objects = 12;
  world.scene_max = 3;
  world.naming_probability = 0.9;
  world.distractor_vocab_size = 20;
  world.n_episodes = 1500;
  world.seed = 42;
  const xsl::SyntheticCorpus corpus = xsl::generate_synthetic_corpus(world);

  // One streaming pass over the episodes fills the graph.
  xsl::GraphBundle bundle;
  bundle.window_size = 5;
  std::tie(bundle.objects, bundle.words) = xsl::build_vocabulary(corpus.episodes);
  bundle.graph.resize(static_cast<uint32_t>(bundle.objects.size()),
                      static_cast<uint32_t>(bundle.words.size()));
  for (const xsl::RawEpisode& raw : corpus.episodes) {
    xsl::ingest_episode(bundle.graph,
                        xsl::map_episode(raw, bundle.objects, bundle.words),
                        bundle.window_size);
  }
  std::cout << "graph: " << bundle.graph.n_objects << " objects, "
            << bundle.graph.n_words << " words, " << bundle.graph.ow.pairs
            << " cross edges\n";

  // Counts alone already rank each object's name first most of the time.
  const xsl::GoldLexicon gold =
      xsl::resolve_gold(corpus.gold, bundle.objects, bundle.words);
  std::cout << "count-based top-1 accuracy: "
            << xsl::topk_accuracy(bundle.graph, gold, xsl::CrossWeightMode::Product, 1)
            << "%\n";

  const auto dist =
      xsl::mapping_distribution(bundle.graph, 0, xsl::CrossWeightMode::Product);
  std::cout << "p(word | " << bundle.objects.symbol_of(0) << "), top guess: ";
  const auto best = std::max_element(
      dist.begin(), dist.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  std::cout << bundle.words.symbol_of(best->first) << " (" << best->second << ")\n";

  // Train aligned embeddings on the graph.
  xsl::TrainConfig cfg;
  cfg.dim = 32;
  cfg.steps = 400;
  cfg.lr = 5e-3;
  xsl::RepresentationModel model =
      xsl::init_model(bundle.graph.n_objects, bundle.graph.n_words, cfg);
  const auto trace = xsl::train(model, bundle.graph);
  const xsl::PerplexityPair ppl = xsl::perplexity(model, bundle.graph);
  std::cout << "trained " << trace.size() << " steps, total loss "
            << trace.back().losses.total << ", perplexity " << ppl.object << "/"
            << ppl.word << "\n";

  // Zero-shot: erase three object-word co-occurrence entries, retrain, and
  // ask the optimal assignment over embedding similarities to restore them.
  xsl::ZeroShotConfig zs;
  zs.z = 3;
  zs.trials = 5;
  zs.methods = {xsl::MappingMethod::Ours, xsl::MappingMethod::Random};
  const xsl::ZeroShotResult result =
      xsl::zero_shot_protocol(bundle, corpus.gold, cfg, zs);
  for (const xsl::ZeroShotMethodResult& method : result.methods) {
    std::cout << "zero-shot " << xsl::mapping_method_name(method.method) << ": "
              << method.mean << "% +/- " << method.stddev << "\n";
  }
  return 0;
}
