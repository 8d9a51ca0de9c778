#pragma once

// Aligned cross-modal representation model. Each modality owns a base
// embedding per node plus a one-hidden-layer linear head that must identify
// the node from its neighborhood-mixed vector. Mixing applies rounds of
// r <- r + delta * W r with W the within-modality weight matrix, so a node's
// final vector blends the nodes reachable within `layers` hops.
//
// All parameters live in one flat vector with named matrix views over it
// (columns are nodes). That keeps the optimizer a pair of elementwise
// updates and makes finite-difference probes of single coordinates trivial.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "xsl/common.hpp"
#include "xsl/graph.hpp"

namespace xsl {

struct TrainConfig {
  uint32_t dim = 100;
  uint32_t hidden = 0;  // 0 means "same as dim"
  uint32_t layers = 5;
  double delta = 0.3;
  double lambda_align = 1.6;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double init_scale = 0.1;
  uint32_t steps = 2000;
  uint64_t seed = 1;

  uint32_t resolved_hidden() const { return hidden == 0 ? dim : hidden; }
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.dim == 0) throw ConfigError("embedding dim must be >= 1");
  if (cfg.delta < 0.0) throw ConfigError("delta must be >= 0");
  if (cfg.lambda_align < 0.0) throw ConfigError("lambda_align must be >= 0");
  if (cfg.lr < 0.0) throw ConfigError("learning rate must be >= 0");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (cfg.init_scale <= 0.0) throw ConfigError("init_scale must be > 0");
}

namespace detail {

/// Offsets of every parameter block inside the flat vector. Column-major
/// matrices, nodes as columns.
struct ParamLayout {
  uint32_t dim = 0, hidden = 0, n_objects = 0, n_words = 0;
  Eigen::Index object_base = 0, word_base = 0;
  Eigen::Index o_w1 = 0, o_b1 = 0, o_w2 = 0, o_b2 = 0;
  Eigen::Index w_w1 = 0, w_b1 = 0, w_w2 = 0, w_b2 = 0;
  Eigen::Index total = 0;
};

inline ParamLayout make_layout(uint32_t n_objects, uint32_t n_words, uint32_t dim,
                               uint32_t hidden) {
  ParamLayout l;
  l.dim = dim;
  l.hidden = hidden;
  l.n_objects = n_objects;
  l.n_words = n_words;
  Eigen::Index at = 0;
  const auto block = [&at](Eigen::Index count) {
    const Eigen::Index here = at;
    at += count;
    return here;
  };
  l.object_base = block(Eigen::Index(dim) * n_objects);
  l.word_base = block(Eigen::Index(dim) * n_words);
  l.o_w1 = block(Eigen::Index(hidden) * dim);
  l.o_b1 = block(hidden);
  l.o_w2 = block(Eigen::Index(n_objects) * hidden);
  l.o_b2 = block(n_objects);
  l.w_w1 = block(Eigen::Index(hidden) * dim);
  l.w_b1 = block(hidden);
  l.w_w2 = block(Eigen::Index(n_words) * hidden);
  l.w_b2 = block(n_words);
  l.total = at;
  return l;
}

}  // namespace detail

struct RepresentationModel {
  TrainConfig config;
  uint32_t n_objects = 0;
  uint32_t n_words = 0;
  detail::ParamLayout layout;
  Eigen::VectorXd params;
  // AdamW moments; allocated on the first training step, never persisted.
  Eigen::VectorXd adam_m, adam_v;
  uint64_t adam_step = 0;

  using Mat = Eigen::Map<Eigen::MatrixXd>;
  using CMat = Eigen::Map<const Eigen::MatrixXd>;
  using Vec = Eigen::Map<Eigen::VectorXd>;
  using CVec = Eigen::Map<const Eigen::VectorXd>;

  Mat object_base() { return {params.data() + layout.object_base, layout.dim, layout.n_objects}; }
  CMat object_base() const { return {params.data() + layout.object_base, layout.dim, layout.n_objects}; }
  Mat word_base() { return {params.data() + layout.word_base, layout.dim, layout.n_words}; }
  CMat word_base() const { return {params.data() + layout.word_base, layout.dim, layout.n_words}; }

  Mat object_w1() { return {params.data() + layout.o_w1, layout.hidden, layout.dim}; }
  CMat object_w1() const { return {params.data() + layout.o_w1, layout.hidden, layout.dim}; }
  Vec object_b1() { return {params.data() + layout.o_b1, layout.hidden}; }
  CVec object_b1() const { return {params.data() + layout.o_b1, layout.hidden}; }
  Mat object_w2() { return {params.data() + layout.o_w2, layout.n_objects, layout.hidden}; }
  CMat object_w2() const { return {params.data() + layout.o_w2, layout.n_objects, layout.hidden}; }
  Vec object_b2() { return {params.data() + layout.o_b2, layout.n_objects}; }
  CVec object_b2() const { return {params.data() + layout.o_b2, layout.n_objects}; }

  Mat word_w1() { return {params.data() + layout.w_w1, layout.hidden, layout.dim}; }
  CMat word_w1() const { return {params.data() + layout.w_w1, layout.hidden, layout.dim}; }
  Vec word_b1() { return {params.data() + layout.w_b1, layout.hidden}; }
  CVec word_b1() const { return {params.data() + layout.w_b1, layout.hidden}; }
  Mat word_w2() { return {params.data() + layout.w_w2, layout.n_words, layout.hidden}; }
  CMat word_w2() const { return {params.data() + layout.w_w2, layout.n_words, layout.hidden}; }
  Vec word_b2() { return {params.data() + layout.w_b2, layout.n_words}; }
  CVec word_b2() const { return {params.data() + layout.w_b2, layout.n_words}; }
};

inline RepresentationModel init_model(uint32_t n_objects, uint32_t n_words,
                                      const TrainConfig& cfg) {
  validate(cfg);
  if (n_objects == 0 || n_words == 0) {
    throw ConfigError("a model needs at least one object and one word");
  }
  RepresentationModel m;
  m.config = cfg;
  m.n_objects = n_objects;
  m.n_words = n_words;
  m.layout = detail::make_layout(n_objects, n_words, cfg.dim, cfg.resolved_hidden());
  m.params.resize(m.layout.total);
  Rng rng(cfg.seed);
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    m.params[i] = rng.normal() * cfg.init_scale;
  }
  return m;
}

/// Applies (I + delta W)^layers to embeddings laid out as one column per
/// node. W is symmetric, so the operator is its own transpose and the same
/// apply serves forward mixing and gradient backpropagation. Small graphs
/// precompute the dense power once; that turns a training step's mixing into
/// a single matrix product.
struct Propagator {
  double delta = 0.0;
  uint32_t layers = 0;
  uint32_t nodes = 0;
  bool identity = true;
  Eigen::MatrixXd power;           // (I + delta W)^layers when nodes are few
  Eigen::SparseMatrix<double> w;   // raw weights otherwise

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != nodes) {
      throw ConfigError("embeddings have " + std::to_string(x.cols()) +
                        " columns but the graph has " + std::to_string(nodes) + " nodes");
    }
    if (identity) return x;
    if (power.size() > 0) return x * power;
    Eigen::MatrixXd y = x;
    for (uint32_t l = 0; l < layers; ++l) {
      y += delta * (y * w).eval();
    }
    return y;
  }
};

namespace detail {

// Above this many nodes the dense (I + delta W)^layers matrix stops paying
// for itself and mixing falls back to sparse products per round.
constexpr uint32_t kDensePropagatorLimit = 1024;

}  // namespace detail

inline Propagator make_propagator(const CrossModalGraph& g, Modality m, double delta,
                                  uint32_t layers) {
  if (delta < 0.0) throw ConfigError("delta must be >= 0");
  const uint32_t n = m == Modality::Object ? g.n_objects : g.n_words;
  Propagator prop;
  prop.delta = delta;
  prop.layers = layers;
  prop.nodes = n;
  prop.identity = delta == 0.0 || layers == 0;
  if (prop.identity) return prop;

  std::vector<Eigen::Triplet<double>> triplets;
  for (uint32_t i = 0; i < n; ++i) {
    const auto& neighbors =
        m == Modality::Object ? g.object_neighbors(i) : g.word_neighbors(i);
    for (const uint32_t j : detail::sorted_keys(neighbors)) {
      triplets.emplace_back(i, j, within_weight(g, m, i, j));
    }
  }

  if (n <= detail::kDensePropagatorLimit) {
    Eigen::MatrixXd step = Eigen::MatrixXd::Identity(n, n);
    for (const auto& t : triplets) step(t.row(), t.col()) += delta * t.value();
    prop.power = step;
    for (uint32_t l = 1; l < layers; ++l) prop.power = (prop.power * step).eval();
  } else {
    prop.w.resize(n, n);
    prop.w.setFromTriplets(triplets.begin(), triplets.end());
  }
  return prop;
}

inline Eigen::MatrixXd aggregate(const CrossModalGraph& g, Modality m,
                                 const Eigen::MatrixXd& base, double delta,
                                 uint32_t layers) {
  return make_propagator(g, m, delta, layers).apply(base);
}

/// 1 - cos(x, y); a zero-norm operand pins the distance to 1 (and its
/// gradient to zero, since direction is undefined there).
inline double cosine_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 1.0;
  return 1.0 - x.dot(y) / (nx * ny);
}

/// One object-word pair the alignment loss pulls together, with its
/// product-form cross weight.
struct AlignPair {
  uint32_t object = 0;
  uint32_t word = 0;
  double weight = 0.0;
};

/// Everything about the graph a training step needs, precomputed once:
/// mixing operators for both modalities and the positively-weighted cross
/// pairs in (object, word) order.
struct TrainingContext {
  uint32_t n_objects = 0;
  uint32_t n_words = 0;
  Propagator object_prop, word_prop;
  std::vector<AlignPair> pairs;
};

inline TrainingContext make_training_context(const CrossModalGraph& g,
                                             const TrainConfig& cfg) {
  validate(cfg);
  TrainingContext ctx;
  ctx.n_objects = g.n_objects;
  ctx.n_words = g.n_words;
  ctx.object_prop = make_propagator(g, Modality::Object, cfg.delta, cfg.layers);
  ctx.word_prop = make_propagator(g, Modality::Word, cfg.delta, cfg.layers);

  const CrossWeightCache cache = build_cross_weight_cache(g);
  for (uint32_t o = 0; o < g.n_objects; ++o) {
    for (const uint32_t w : detail::sorted_keys(g.cross_row(o))) {
      const double e = cross_weight(g, cache, o, w, CrossWeightMode::Product);
      if (e > 0.0) ctx.pairs.push_back({o, w, e});
    }
  }
  return ctx;
}

}  // namespace xsl
