#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "temp_dir.hpp"
#include "xsl/graph.hpp"
#include "xsl/model.hpp"
#include "xsl/snapshot.hpp"
#include "xsl/synthetic.hpp"
#include "xsl/train.hpp"

using namespace xsl;
using Catch::Matchers::ContainsSubstring;

namespace {

// Small world with every counter family populated: 5 objects named
// deterministically, 3 filler words, short scenes. Sized so a finite
// difference sweep over every parameter stays cheap.
GraphBundle make_toy_world() {
  SyntheticConfig cfg;
  cfg.n_objects = 5;
  cfg.scene_min = 1;
  cfg.scene_max = 2;
  cfg.naming_probability = 1.0;
  cfg.distractor_vocab_size = 3;
  cfg.distractors_min = 1;
  cfg.distractors_max = 2;
  cfg.n_episodes = 40;
  cfg.seed = 11;
  const SyntheticCorpus corpus = generate_synthetic_corpus(cfg);

  GraphBundle bundle;
  bundle.window_size = 3;
  std::tie(bundle.objects, bundle.words) = build_vocabulary(corpus.episodes);
  REQUIRE(bundle.objects.symbols.size() == 5);
  REQUIRE(bundle.words.symbols.size() == 8);
  bundle.graph.resize(5, 8);
  for (const auto& raw : corpus.episodes) {
    ingest_episode(bundle.graph, map_episode(raw, bundle.objects, bundle.words),
                   bundle.window_size);
  }
  return bundle;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.dim = 6;
  cfg.hidden = 0;  // resolves to dim
  cfg.layers = 3;
  cfg.delta = 0.3;
  cfg.lambda_align = 1.6;
  cfg.init_scale = 0.3;
  cfg.seed = 19;
  return cfg;
}

}  // namespace

TEST_CASE("train config validation and defaults") {
  TrainConfig cfg;
  CHECK(cfg.dim == 100);
  CHECK(cfg.hidden == 0);
  CHECK(cfg.resolved_hidden() == 100);
  CHECK(cfg.layers == 5);
  CHECK(cfg.delta == 0.3);
  CHECK(cfg.lambda_align == 1.6);
  CHECK(cfg.lr == 1e-3);
  CHECK(cfg.weight_decay == 1e-5);
  CHECK(cfg.init_scale == 0.1);
  CHECK(cfg.steps == 2000);
  validate(cfg);

  cfg.hidden = 32;
  CHECK(cfg.resolved_hidden() == 32);

  TrainConfig bad = toy_config();
  bad.dim = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = toy_config();
  bad.delta = -0.1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = toy_config();
  bad.lambda_align = -1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = toy_config();
  bad.lr = -1e-3;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = toy_config();
  bad.weight_decay = -1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = toy_config();
  bad.init_scale = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("model initialization is seeded and shaped") {
  TrainConfig cfg = toy_config();
  RepresentationModel m = init_model(5, 8, cfg);
  CHECK(m.n_objects == 5);
  CHECK(m.n_words == 8);
  CHECK(m.object_base().rows() == 6);
  CHECK(m.object_base().cols() == 5);
  CHECK(m.word_base().cols() == 8);
  CHECK(m.object_w1().rows() == 6);   // hidden resolves to dim
  CHECK(m.object_w1().cols() == 6);
  CHECK(m.object_b1().size() == 6);
  CHECK(m.object_w2().rows() == 5);   // one logit per object
  CHECK(m.object_w2().cols() == 6);
  CHECK(m.object_b2().size() == 5);
  CHECK(m.word_w2().rows() == 8);
  CHECK(m.params.allFinite());
  CHECK(m.adam_m.size() == 0);  // optimizer state allocated lazily
  CHECK(m.adam_step == 0);

  // Same seed reproduces every parameter bit for bit; a different seed does not.
  RepresentationModel m2 = init_model(5, 8, cfg);
  CHECK(m.params == m2.params);
  cfg.seed += 1;
  RepresentationModel m3 = init_model(5, 8, cfg);
  CHECK(m.params != m3.params);

  // Scale tracks init_scale: samples are Gaussian draws times the scale.
  CHECK(m.params.cwiseAbs().maxCoeff() < 0.3 * 6.0);
  CHECK_THROWS_AS(init_model(0, 8, cfg), ConfigError);
  CHECK_THROWS_AS(init_model(5, 0, cfg), ConfigError);
}

TEST_CASE("aggregation worked example on an always-cooccurring object pair") {
  // One episode with both objects makes e_01 exactly 1.
  CrossModalGraph g(2, 1);
  ingest_episode(g, Episode{{0, 1}, {0}}, 1);
  REQUIRE(within_weight(g, Modality::Object, 0, 1) == 1.0);

  Eigen::MatrixXd base(2, 2);  // columns are node vectors
  base << 1.0, 0.0,
          0.0, 1.0;

  // One round: r_i' = r_i + delta * sum_j e_ij r_j.
  const Eigen::MatrixXd one = aggregate(g, Modality::Object, base, 0.5, 1);
  CHECK(one(0, 0) == 1.0);
  CHECK(one(1, 0) == 0.5);
  CHECK(one(0, 1) == 0.5);
  CHECK(one(1, 1) == 1.0);

  // Two rounds apply (I + delta W)^2 = [[1.25, 1], [1, 1.25]].
  const Eigen::MatrixXd two = aggregate(g, Modality::Object, base, 0.5, 2);
  CHECK(two(0, 0) == 1.25);
  CHECK(two(1, 0) == 1.0);
  CHECK(two(0, 1) == 1.0);
  CHECK(two(1, 1) == 1.25);
}

TEST_CASE("aggregation worked example on a word pair") {
  // Words 0 and 1 in one episode with H = 2: windows {0}, {0,1}, {1},
  // so d = (2, 2), c_01 = 1, e_01 = 1/4.
  CrossModalGraph g(1, 2);
  ingest_episode(g, Episode{{}, {0, 1}}, 2);
  REQUIRE(within_weight(g, Modality::Word, 0, 1) == 0.25);

  Eigen::MatrixXd base(2, 2);
  base << 1.0, 0.0,
          0.0, 1.0;
  const Eigen::MatrixXd out = aggregate(g, Modality::Word, base, 1.0, 1);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(1, 0) == 0.25);
  CHECK(out(0, 1) == 0.25);
  CHECK(out(1, 1) == 1.0);
}

TEST_CASE("aggregation with zero delta or zero rounds is the identity") {
  const GraphBundle world = make_toy_world();
  Rng rng(5);
  Eigen::MatrixXd base(4, 8);
  for (Eigen::Index j = 0; j < base.cols(); ++j) {
    for (Eigen::Index i = 0; i < base.rows(); ++i) base(i, j) = rng.normal();
  }
  CHECK(aggregate(world.graph, Modality::Word, base, 0.0, 5) == base);
  CHECK(aggregate(world.graph, Modality::Word, base, 0.3, 0) == base);
}

TEST_CASE("aggregation is linear in the base embeddings") {
  const GraphBundle world = make_toy_world();
  Rng rng(6);
  Eigen::MatrixXd x(3, 8), y(3, 8);
  for (Eigen::Index j = 0; j < 8; ++j) {
    for (Eigen::Index i = 0; i < 3; ++i) {
      x(i, j) = rng.normal();
      y(i, j) = rng.normal();
    }
  }
  const Eigen::MatrixXd lhs =
      aggregate(world.graph, Modality::Word, 2.0 * x - 0.5 * y, 0.3, 4);
  const Eigen::MatrixXd rhs = 2.0 * aggregate(world.graph, Modality::Word, x, 0.3, 4) -
                              0.5 * aggregate(world.graph, Modality::Word, y, 0.3, 4);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("aggregation only mixes nodes within round-count hops") {
  // Word path graph 0-1-2-3-4-5 built from adjacent-pair episodes.
  CrossModalGraph g(1, 6);
  for (uint32_t w = 0; w + 1 < 6; ++w) {
    ingest_episode(g, Episode{{}, {w, w + 1}}, 2);
  }
  REQUIRE(g.word_pair_edges() == 5);

  Rng rng(7);
  Eigen::MatrixXd base(4, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    for (Eigen::Index i = 0; i < 4; ++i) base(i, j) = rng.normal();
  }
  Eigen::MatrixXd nudged = base;
  nudged.col(5).array() += 1.0;

  const Eigen::MatrixXd a = aggregate(g, Modality::Word, base, 0.3, 3);
  const Eigen::MatrixXd b = aggregate(g, Modality::Word, nudged, 0.3, 3);

  // Nodes 0 and 1 are more than three hops from node 5: identical bit for bit.
  CHECK(a.col(0) == b.col(0));
  CHECK(a.col(1) == b.col(1));
  // Nodes within reach pick up the perturbation.
  for (Eigen::Index j = 2; j < 6; ++j) CHECK(a.col(j) != b.col(j));
}

TEST_CASE("aggregation rejects a base with the wrong node count") {
  const GraphBundle world = make_toy_world();
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(3, 7);
  CHECK_THROWS_AS(aggregate(world.graph, Modality::Word, base, 0.3, 1), ConfigError);
  CHECK_THROWS_AS(aggregate(world.graph, Modality::Object, base, 0.3, 1), ConfigError);
}

TEST_CASE("cosine distance basics") {
  Eigen::VectorXd x(3), y(3), z(3);
  x << 1.0, 2.0, 3.0;
  y << 2.0, 4.0, 6.0;
  z << 0.0, 0.0, 0.0;
  CHECK(std::abs(cosine_distance(x, x)) < 1e-12);
  CHECK(std::abs(cosine_distance(x, y)) < 1e-12);  // scale invariant
  CHECK(cosine_distance(x, -y) == Catch::Approx(2.0).margin(1e-12));
  CHECK(cosine_distance(x, z) == 1.0);  // zero norm pins the distance to 1
  CHECK(cosine_distance(z, z) == 1.0);
}

TEST_CASE("training context lists positive product-mode pairs in sorted order") {
  const GraphBundle world = make_toy_world();
  const TrainingContext ctx = make_training_context(world.graph, toy_config());
  REQUIRE(!ctx.pairs.empty());
  const CrossWeightCache cache = build_cross_weight_cache(world.graph);
  for (size_t k = 0; k < ctx.pairs.size(); ++k) {
    const AlignPair& p = ctx.pairs[k];
    CHECK(p.weight > 0.0);
    CHECK(p.weight == cross_weight(world.graph, cache, p.object, p.word,
                                   CrossWeightMode::Product));
    if (k > 0) {
      const AlignPair& q = ctx.pairs[k - 1];
      CHECK(std::pair{q.object, q.word} < std::pair{p.object, p.word});
    }
  }
  // Every stored cross pair has positive strength here, so all appear.
  CHECK(ctx.pairs.size() == world.graph.cross_edges());
}

TEST_CASE("loss decomposition holds exactly") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  const RepresentationModel model = init_model(5, 8, cfg);
  const Losses l = forward_losses(model, world.graph);
  CHECK(l.ss_object > 0.0);
  CHECK(l.ss_word > 0.0);
  CHECK(l.align > 0.0);
  CHECK(l.total == l.ss_object + l.ss_word + cfg.lambda_align * l.align);

  // The fused forward/backward pass reports the same losses as forward only.
  const TrainingContext ctx = make_training_context(world.graph, cfg);
  const ForwardBackward fb = forward_backward(model, ctx);
  CHECK(fb.losses.total == l.total);
  CHECK(fb.losses.ss_object == l.ss_object);
  CHECK(fb.losses.ss_word == l.ss_word);
  CHECK(fb.losses.align == l.align);
}

TEST_CASE("alignment term vanishes for identical vectors and is 1 for a dead one") {
  // Single object, single word, one co-occurrence: product weight is 1.
  CrossModalGraph g(1, 1);
  ingest_episode(g, Episode{{0}, {0}}, 1);
  TrainConfig cfg = toy_config();
  cfg.dim = 3;
  cfg.layers = 0;  // no mixing, losses read the bases directly
  RepresentationModel model = init_model(1, 1, cfg);
  model.object_base().col(0) << 1.0, 2.0, 3.0;
  model.word_base().col(0) << 1.0, 2.0, 3.0;
  Losses l = forward_losses(model, g);
  CHECK(std::abs(l.align) < 1e-12);

  model.object_base().col(0).setZero();
  l = forward_losses(model, g);
  CHECK(l.align == 1.0);

  // With lambda 0 the alignment term is still reported but not totalled.
  cfg.lambda_align = 0.0;
  RepresentationModel plain = init_model(1, 1, cfg);
  plain.params = model.params;
  const Losses l0 = forward_losses(plain, g);
  CHECK(l0.align == 1.0);
  CHECK(l0.total == l0.ss_object + l0.ss_word);
}

TEST_CASE("analytic gradient matches central finite differences everywhere") {
  const GraphBundle world = make_toy_world();
  const TrainConfig cfg = toy_config();
  RepresentationModel model = init_model(5, 8, cfg);
  const TrainingContext ctx = make_training_context(world.graph, cfg);
  const ForwardBackward fb = forward_backward(model, ctx);
  REQUIRE(fb.grad.size() == model.params.size());

  const double h = 1e-4;
  double max_rel = 0.0;
  for (Eigen::Index k = 0; k < model.params.size(); ++k) {
    const double orig = model.params[k];
    model.params[k] = orig + h;
    const double up = forward_losses(model, ctx).total;
    model.params[k] = orig - h;
    const double down = forward_losses(model, ctx).total;
    model.params[k] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double rel =
        std::abs(fb.grad[k] - fd) / std::max(1.0, std::abs(fb.grad[k]) + std::abs(fd));
    max_rel = std::max(max_rel, rel);
  }
  INFO("max relative gradient error " << max_rel);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("gradient check still passes without alignment or without mixing") {
  const GraphBundle world = make_toy_world();
  for (const bool no_align : {true, false}) {
    TrainConfig cfg = toy_config();
    cfg.seed = 23;
    if (no_align) {
      cfg.lambda_align = 0.0;
    } else {
      cfg.layers = 0;
    }
    RepresentationModel model = init_model(5, 8, cfg);
    const TrainingContext ctx = make_training_context(world.graph, cfg);
    const ForwardBackward fb = forward_backward(model, ctx);
    const double h = 1e-4;
    double max_rel = 0.0;
    for (Eigen::Index k = 0; k < model.params.size(); ++k) {
      const double orig = model.params[k];
      model.params[k] = orig + h;
      const double up = forward_losses(model, ctx).total;
      model.params[k] = orig - h;
      const double down = forward_losses(model, ctx).total;
      model.params[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      max_rel = std::max(max_rel, std::abs(fb.grad[k] - fd) /
                                      std::max(1.0, std::abs(fb.grad[k]) + std::abs(fd)));
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("adamw update with a zero gradient is pure decay") {
  TrainConfig cfg = toy_config();
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  Eigen::VectorXd params(3), m(3), v(3);
  params << 1.0, -2.0, 0.5;
  m.setZero();
  v.setZero();
  const Eigen::VectorXd before = params;
  detail::adamw_update(params, Eigen::VectorXd::Zero(3), m, v, 1, cfg);
  for (int i = 0; i < 3; ++i) {
    CHECK(params[i] == before[i] - cfg.lr * cfg.weight_decay * before[i]);
  }
  CHECK(m.isZero(0.0));
  CHECK(v.isZero(0.0));
}

TEST_CASE("training with zero learning rate changes nothing") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.lr = 0.0;
  cfg.steps = 5;
  RepresentationModel model = init_model(5, 8, cfg);
  const Eigen::VectorXd before = model.params;
  const auto trace = train(model, world.graph);
  CHECK(trace.size() == 5);
  CHECK(model.params == before);
  // Constant parameters mean a constant loss.
  CHECK(trace.front().losses.total == trace.back().losses.total);
}

TEST_CASE("training reduces the loss almost every step on the toy world") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.steps = 300;
  cfg.lr = 5e-3;
  RepresentationModel model = init_model(5, 8, cfg);
  const auto trace = train(model, world.graph);
  REQUIRE(trace.size() == 300);
  CHECK(trace.front().step == 1);
  CHECK(trace.back().step == 300);

  size_t drops = 0;
  for (size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].losses.total < trace[i - 1].losses.total) drops += 1;
  }
  CHECK(drops >= (trace.size() - 1) * 9 / 10);
  CHECK(trace.back().losses.total < trace.front().losses.total);
}

TEST_CASE("training is bit-reproducible") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.steps = 120;
  RepresentationModel a = init_model(5, 8, cfg);
  RepresentationModel b = init_model(5, 8, cfg);
  const auto trace_a = train(a, world.graph);
  const auto trace_b = train(b, world.graph);
  CHECK(a.params == b.params);
  CHECK(a.adam_m == b.adam_m);
  CHECK(a.adam_v == b.adam_v);
  REQUIRE(trace_a.size() == trace_b.size());
  for (size_t i = 0; i < trace_a.size(); ++i) {
    CHECK(trace_a[i].losses.total == trace_b[i].losses.total);
  }
}

TEST_CASE("training continues from the optimizer state it left off with") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.steps = 40;
  RepresentationModel whole = init_model(5, 8, cfg);
  train(whole, world.graph);

  cfg.steps = 25;
  RepresentationModel split = init_model(5, 8, cfg);
  train(split, world.graph);
  split.config.steps = 15;
  train(split, world.graph);
  CHECK(split.adam_step == 40);
  CHECK(split.params == whole.params);
}

TEST_CASE("a diverging run aborts with a numerical error naming the step") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.lr = 1e155;
  cfg.steps = 50;
  RepresentationModel model = init_model(5, 8, cfg);
  CHECK_THROWS_AS(train(model, world.graph), NumericalError);
  RepresentationModel again = init_model(5, 8, cfg);
  CHECK_THROWS_WITH(train(again, world.graph), ContainsSubstring("step"));
}

TEST_CASE("training rejects a model sized for a different graph") {
  const GraphBundle world = make_toy_world();
  RepresentationModel model = init_model(4, 8, toy_config());
  CHECK_THROWS_AS(train(model, world.graph), ConfigError);
  CHECK_THROWS_AS(forward_losses(model, world.graph), ConfigError);
}

TEST_CASE("zeroed heads give uniform predictions and perplexity equal to n") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  RepresentationModel model = init_model(5, 8, cfg);
  model.object_w1().setZero();
  model.object_b1().setZero();
  model.object_w2().setZero();
  model.object_b2().setZero();
  model.word_w1().setZero();
  model.word_b1().setZero();
  model.word_w2().setZero();
  model.word_b2().setZero();
  const PerplexityPair ppl = perplexity(model, world.graph);
  CHECK(ppl.object == Catch::Approx(5.0).margin(1e-9));
  CHECK(ppl.word == Catch::Approx(8.0).margin(1e-9));
}

TEST_CASE("training drives perplexity down and identification accuracy up") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.steps = 600;
  cfg.lr = 5e-3;
  RepresentationModel model = init_model(5, 8, cfg);
  const PerplexityPair before = perplexity(model, world.graph);
  CHECK(before.object >= 1.0);
  CHECK(before.word >= 1.0);
  train(model, world.graph);
  const PerplexityPair after = perplexity(model, world.graph);
  CHECK(after.object < before.object);
  CHECK(after.word < before.word);
  CHECK(after.object >= 1.0 - 1e-12);
  CHECK(after.word >= 1.0 - 1e-12);

  const AccuracyPair acc = identification_accuracy(model, world.graph);
  CHECK(acc.object >= 0.9);
  CHECK(acc.word >= 0.9);
}

TEST_CASE("aggregated embedding helpers match aggregate on the bases") {
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  const RepresentationModel model = init_model(5, 8, cfg);
  CHECK(aggregated_object_embeddings(model, world.graph) ==
        aggregate(world.graph, Modality::Object, model.object_base(), cfg.delta,
                  cfg.layers));
  CHECK(aggregated_word_embeddings(model, world.graph) ==
        aggregate(world.graph, Modality::Word, model.word_base(), cfg.delta,
                  cfg.layers));
}

TEST_CASE("loss trace renders to a fixed csv layout") {
  std::vector<TraceRow> trace;
  trace.push_back({1, {0.5, 0.25, 2.0, 3.95}});
  trace.push_back({2, {0.5, 0.25, 1.0, 2.35}});
  std::ostringstream out;
  write_loss_trace_csv(trace, out);
  CHECK(out.str() ==
        "step,loss_ss_o,loss_ss_w,loss_align,loss_total\n"
        "1,0.5,0.25,2,3.9500000000000002\n"
        "2,0.5,0.25,1,2.3500000000000001\n");
}

TEST_CASE("model files round trip exactly") {
  TempDir tmp;
  const GraphBundle world = make_toy_world();
  TrainConfig cfg = toy_config();
  cfg.steps = 30;
  RepresentationModel model = init_model(5, 8, cfg);
  train(model, world.graph);

  const std::string path = tmp.file("model.bin");
  save_model(path, model);
  const RepresentationModel back = load_model(path);
  CHECK(back.n_objects == model.n_objects);
  CHECK(back.n_words == model.n_words);
  CHECK(back.config.dim == model.config.dim);
  CHECK(back.config.hidden == model.config.hidden);
  CHECK(back.config.layers == model.config.layers);
  CHECK(back.config.delta == model.config.delta);
  CHECK(back.config.lambda_align == model.config.lambda_align);
  CHECK(back.config.lr == model.config.lr);
  CHECK(back.config.weight_decay == model.config.weight_decay);
  CHECK(back.config.init_scale == model.config.init_scale);
  CHECK(back.config.steps == model.config.steps);
  CHECK(back.config.seed == model.config.seed);
  CHECK(back.params == model.params);
  // Optimizer state is ephemeral by design.
  CHECK(back.adam_m.size() == 0);
  CHECK(back.adam_step == 0);

  // The loaded model computes the very same losses.
  CHECK(forward_losses(back, world.graph).total ==
        forward_losses(model, world.graph).total);

  // Writing twice produces identical bytes.
  const std::string path2 = tmp.file("model2.bin");
  save_model(path2, model);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::stringstream b1, b2;
  b1 << f1.rdbuf();
  b2 << f2.rdbuf();
  CHECK(b1.str() == b2.str());
}

TEST_CASE("damaged model files are rejected") {
  TempDir tmp;
  TrainConfig cfg = toy_config();
  RepresentationModel model = init_model(5, 8, cfg);
  const std::string path = tmp.file("model.bin");
  save_model(path, model);

  CHECK_THROWS_AS(load_model(tmp.file("absent.bin")), IoError);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }

  const std::string truncated = tmp.file("truncated.bin");
  for (const size_t keep : {size_t{4}, bytes.size() / 2, bytes.size() - 3}) {
    std::ofstream out(truncated, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(keep));
    out.close();
    CHECK_THROWS_AS(load_model(truncated), SnapshotCorruptError);
  }

  std::string flipped = bytes;
  flipped[0] = 'Y';
  const std::string bad_magic = tmp.file("magic.bin");
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out.write(flipped.data(), static_cast<std::streamsize>(flipped.size()));
  }
  CHECK_THROWS_AS(load_model(bad_magic), SnapshotCorruptError);

  const size_t at = bytes.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  std::string future = bytes;
  future[at + 10] = '9';
  const std::string vpath = tmp.file("future.bin");
  {
    std::ofstream out(vpath, std::ios::binary);
    out.write(future.data(), static_cast<std::streamsize>(future.size()));
  }
  CHECK_THROWS_AS(load_model(vpath), SnapshotVersionError);
}

TEST_CASE("embedding export writes one labelled row per node") {
  GraphBundle bundle;
  bundle.objects.add_symbol("a", 1);
  bundle.words.add_symbol("x", 1);
  bundle.graph.resize(1, 1);
  ingest_episode(bundle.graph, Episode{{0}, {0}}, 1);

  TrainConfig cfg;
  cfg.dim = 2;
  cfg.layers = 0;
  RepresentationModel model = init_model(1, 1, cfg);
  model.object_base().col(0) << 1.0, 0.5;
  model.word_base().col(0) << 2.0, -1.0;

  std::ostringstream out;
  export_embeddings_tsv(model, bundle, false, out);
  CHECK(out.str() == "object\ta\t1\t0.5\nword\tx\t2\t-1\n");

  // No mixing rounds configured, so the aggregated view is identical.
  std::ostringstream agg;
  export_embeddings_tsv(model, bundle, true, agg);
  CHECK(agg.str() == out.str());
}

TEST_CASE("embedding export covers the toy world deterministically") {
  const GraphBundle world = make_toy_world();
  const RepresentationModel model = init_model(5, 8, toy_config());
  std::ostringstream a, b;
  export_embeddings_tsv(model, world, true, a);
  export_embeddings_tsv(model, world, true, b);
  CHECK(a.str() == b.str());

  size_t lines = 0;
  std::string line;
  std::istringstream in(a.str());
  while (std::getline(in, line)) {
    lines += 1;
    size_t tabs = 0;
    for (char c : line) tabs += (c == '\t');
    CHECK(tabs == 1 + 6);  // modality, symbol, then dim values
  }
  CHECK(lines == 13);

  // Aggregation changes the word rows here (the graph has word-word edges).
  std::ostringstream base_out;
  export_embeddings_tsv(model, world, false, base_out);
  CHECK(base_out.str() != a.str());
}

TEST_CASE("train config json round trips") {
  TrainConfig cfg = toy_config();
  cfg.hidden = 12;
  cfg.steps = 77;
  cfg.seed = 123456789012345ull;
  const nlohmann::json j = train_config_json(cfg);
  const TrainConfig back = train_config_from_json(j);
  CHECK(back.dim == cfg.dim);
  CHECK(back.hidden == cfg.hidden);
  CHECK(back.layers == cfg.layers);
  CHECK(back.delta == cfg.delta);
  CHECK(back.lambda_align == cfg.lambda_align);
  CHECK(back.lr == cfg.lr);
  CHECK(back.weight_decay == cfg.weight_decay);
  CHECK(back.init_scale == cfg.init_scale);
  CHECK(back.steps == cfg.steps);
  CHECK(back.seed == cfg.seed);

  // Unknown keys are rejected so typos in config files surface loudly.
  nlohmann::json extra = j;
  extra["learning_rate"] = 0.1;
  CHECK_THROWS_AS(train_config_from_json(extra), ConfigError);
}
