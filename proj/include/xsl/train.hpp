#pragma once

// Full-batch training of the representation model. Every step evaluates the
// two self-identification losses (softmax cross-entropy over the nodes of
// each modality) plus the weighted cross-modal alignment loss, backpropagates
// analytically, and applies an AdamW update to the flat parameter vector.
// No randomness enters after initialization, so a (graph, config) pair fixes
// the whole trajectory bit for bit.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "xsl/binio.hpp"
#include "xsl/common.hpp"
#include "xsl/model.hpp"
#include "xsl/snapshot.hpp"

namespace xsl {

struct Losses {
  double ss_object = 0.0;
  double ss_word = 0.0;
  double align = 0.0;
  double total = 0.0;
};

struct TraceRow {
  uint32_t step = 0;
  Losses losses;
};

struct ForwardBackward {
  Losses losses;
  Eigen::VectorXd grad;
};

namespace detail {

/// Softmax cross-entropy of a linear head whose target for column j is j.
/// Fills `probs` (and consumes it as dZ) only when gradients are requested.
struct HeadPass {
  double ce = 0.0;
  Eigen::MatrixXd hidden;  // h x n
  Eigen::MatrixXd probs;   // n x n, only when grads are on
};

template <typename A, typename W1, typename B1, typename W2, typename B2>
HeadPass head_forward(const A& a, const W1& w1, const B1& b1, const W2& w2,
                      const B2& b2, bool want_grads) {
  HeadPass pass;
  pass.hidden = (w1 * a).colwise() + b1;
  Eigen::MatrixXd logits = (w2 * pass.hidden).colwise() + b2;
  const Eigen::Index n = logits.cols();
  const Eigen::RowVectorXd colmax = logits.colwise().maxCoeff();
  Eigen::MatrixXd ex = (logits.rowwise() - colmax).array().exp();
  const Eigen::RowVectorXd sums = ex.colwise().sum();
  for (Eigen::Index j = 0; j < n; ++j) {
    pass.ce += std::log(sums[j]) + colmax[j] - logits(j, j);
  }
  if (want_grads) {
    ex.array().rowwise() /= sums.array();
    pass.probs = std::move(ex);
  }
  return pass;
}

/// Evaluates the losses; when `grad` is non-null also fills it with
/// d total / d params (same layout as the parameter vector).
inline Losses evaluate(const RepresentationModel& model, const TrainingContext& ctx,
                       Eigen::VectorXd* grad) {
  if (model.n_objects != ctx.n_objects || model.n_words != ctx.n_words) {
    throw ConfigError("model and graph disagree on node counts");
  }
  const bool g = grad != nullptr;
  const double lambda = model.config.lambda_align;

  const Eigen::MatrixXd ao = ctx.object_prop.apply(model.object_base());
  const Eigen::MatrixXd aw = ctx.word_prop.apply(model.word_base());

  HeadPass oh = head_forward(ao, model.object_w1(), model.object_b1(),
                             model.object_w2(), model.object_b2(), g);
  HeadPass wh = head_forward(aw, model.word_w1(), model.word_b1(), model.word_w2(),
                             model.word_b2(), g);

  // Alignment: weighted cosine distances between aggregated vectors.
  const Eigen::RowVectorXd onorm = ao.colwise().norm();
  const Eigen::RowVectorXd wnorm = aw.colwise().norm();
  Eigen::MatrixXd dao, daw;
  if (g) {
    dao = Eigen::MatrixXd::Zero(ao.rows(), ao.cols());
    daw = Eigen::MatrixXd::Zero(aw.rows(), aw.cols());
  }
  double align = 0.0;
  for (const AlignPair& p : ctx.pairs) {
    const double no = onorm[p.object];
    const double nw = wnorm[p.word];
    if (no == 0.0 || nw == 0.0) {
      align += p.weight;  // distance pinned to 1, gradient to 0
      continue;
    }
    const auto x = ao.col(p.object);
    const auto y = aw.col(p.word);
    const double cosine = x.dot(y) / (no * nw);
    align += p.weight * (1.0 - cosine);
    if (g && lambda != 0.0) {
      const double coef = lambda * p.weight;
      dao.col(p.object) += coef * (cosine / (no * no) * x - y / (no * nw));
      daw.col(p.word) += coef * (cosine / (nw * nw) * y - x / (no * nw));
    }
  }

  Losses losses;
  losses.ss_object = oh.ce;
  losses.ss_word = wh.ce;
  losses.align = align;
  losses.total = losses.ss_object + losses.ss_word + lambda * losses.align;
  if (!g) return losses;

  grad->setZero(model.params.size());
  RepresentationModel::Mat g_ob{grad->data() + model.layout.object_base,
                                model.layout.dim, model.layout.n_objects};
  RepresentationModel::Mat g_wb{grad->data() + model.layout.word_base,
                                model.layout.dim, model.layout.n_words};
  RepresentationModel::Mat g_ow1{grad->data() + model.layout.o_w1, model.layout.hidden,
                                 model.layout.dim};
  RepresentationModel::Vec g_ob1{grad->data() + model.layout.o_b1, model.layout.hidden};
  RepresentationModel::Mat g_ow2{grad->data() + model.layout.o_w2,
                                 model.layout.n_objects, model.layout.hidden};
  RepresentationModel::Vec g_ob2{grad->data() + model.layout.o_b2,
                                 model.layout.n_objects};
  RepresentationModel::Mat g_ww1{grad->data() + model.layout.w_w1, model.layout.hidden,
                                 model.layout.dim};
  RepresentationModel::Vec g_wb1{grad->data() + model.layout.w_b1, model.layout.hidden};
  RepresentationModel::Mat g_ww2{grad->data() + model.layout.w_w2, model.layout.n_words,
                                 model.layout.hidden};
  RepresentationModel::Vec g_wb2{grad->data() + model.layout.w_b2, model.layout.n_words};

  // Head backprop; dZ = probs - I for the diagonal targets.
  oh.probs.diagonal().array() -= 1.0;
  wh.probs.diagonal().array() -= 1.0;

  g_ow2 = oh.probs * oh.hidden.transpose();
  g_ob2 = oh.probs.rowwise().sum();
  Eigen::MatrixXd dh = model.object_w2().transpose() * oh.probs;
  g_ow1 = dh * ao.transpose();
  g_ob1 = dh.rowwise().sum();
  dao += model.object_w1().transpose() * dh;

  g_ww2 = wh.probs * wh.hidden.transpose();
  g_wb2 = wh.probs.rowwise().sum();
  dh = model.word_w2().transpose() * wh.probs;
  g_ww1 = dh * aw.transpose();
  g_wb1 = dh.rowwise().sum();
  daw += model.word_w1().transpose() * dh;

  // Mixing is symmetric, so its transpose is itself.
  g_ob = ctx.object_prop.apply(dao);
  g_wb = ctx.word_prop.apply(daw);
  return losses;
}

/// One AdamW step (decoupled weight decay), t is the 1-based step count.
inline void adamw_update(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                         Eigen::VectorXd& m, Eigen::VectorXd& v, uint64_t t,
                         const TrainConfig& cfg) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v.array() = kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
  params.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps) +
                    cfg.lr * cfg.weight_decay * params.array();
}

inline void check_model_graph(const RepresentationModel& model,
                              const CrossModalGraph& graph) {
  if (model.n_objects != graph.n_objects || model.n_words != graph.n_words) {
    throw ConfigError("model was built for " + std::to_string(model.n_objects) + "x" +
                      std::to_string(model.n_words) + " nodes but the graph has " +
                      std::to_string(graph.n_objects) + "x" +
                      std::to_string(graph.n_words));
  }
}

}  // namespace detail

inline Losses forward_losses(const RepresentationModel& model,
                             const TrainingContext& ctx) {
  return detail::evaluate(model, ctx, nullptr);
}

inline Losses forward_losses(const RepresentationModel& model,
                             const CrossModalGraph& graph) {
  detail::check_model_graph(model, graph);
  return forward_losses(model, make_training_context(graph, model.config));
}

inline ForwardBackward forward_backward(const RepresentationModel& model,
                                        const TrainingContext& ctx) {
  ForwardBackward fb;
  fb.losses = detail::evaluate(model, ctx, &fb.grad);
  return fb;
}

/// Runs config.steps full-batch updates, mutating the model in place
/// (parameters and optimizer state both persist across calls, so two
/// consecutive runs continue one trajectory). Returns one trace row per
/// step with the losses at that step's parameters. Non-finite losses or
/// parameters abort with the offending step in the message.
inline std::vector<TraceRow> train(RepresentationModel& model,
                                   const CrossModalGraph& graph) {
  validate(model.config);
  detail::check_model_graph(model, graph);
  const TrainingContext ctx = make_training_context(graph, model.config);

  if (model.adam_m.size() == 0) {
    model.adam_m = Eigen::VectorXd::Zero(model.params.size());
    model.adam_v = Eigen::VectorXd::Zero(model.params.size());
  } else if (model.adam_m.size() != model.params.size()) {
    throw ConfigError("optimizer state does not match the parameter count");
  }

  std::vector<TraceRow> trace;
  trace.reserve(model.config.steps);
  Eigen::VectorXd grad;
  for (uint32_t step = 1; step <= model.config.steps; ++step) {
    const Losses losses = detail::evaluate(model, ctx, &grad);
    if (!std::isfinite(losses.total)) {
      throw NumericalError("loss is not finite at step " +
                           std::to_string(model.adam_step + 1));
    }
    model.adam_step += 1;
    detail::adamw_update(model.params, grad, model.adam_m, model.adam_v,
                         model.adam_step, model.config);
    if (!model.params.allFinite()) {
      throw NumericalError("parameters overflowed at step " +
                           std::to_string(model.adam_step));
    }
    trace.push_back({step, losses});
  }
  return trace;
}

inline Eigen::MatrixXd aggregated_object_embeddings(const RepresentationModel& model,
                                                    const CrossModalGraph& graph) {
  detail::check_model_graph(model, graph);
  return aggregate(graph, Modality::Object, model.object_base(), model.config.delta,
                   model.config.layers);
}

inline Eigen::MatrixXd aggregated_word_embeddings(const RepresentationModel& model,
                                                  const CrossModalGraph& graph) {
  detail::check_model_graph(model, graph);
  return aggregate(graph, Modality::Word, model.word_base(), model.config.delta,
                   model.config.layers);
}

struct PerplexityPair {
  double object = 0.0;
  double word = 0.0;
};

/// exp of the mean self-identification cross-entropy per modality; 1 means
/// every node is identified with certainty.
inline PerplexityPair perplexity(const RepresentationModel& model,
                                 const CrossModalGraph& graph) {
  detail::check_model_graph(model, graph);
  const Eigen::MatrixXd ao = aggregated_object_embeddings(model, graph);
  const Eigen::MatrixXd aw = aggregated_word_embeddings(model, graph);
  const detail::HeadPass oh =
      detail::head_forward(ao, model.object_w1(), model.object_b1(), model.object_w2(),
                           model.object_b2(), false);
  const detail::HeadPass wh =
      detail::head_forward(aw, model.word_w1(), model.word_b1(), model.word_w2(),
                           model.word_b2(), false);
  return {std::exp(oh.ce / static_cast<double>(model.n_objects)),
          std::exp(wh.ce / static_cast<double>(model.n_words))};
}

struct AccuracyPair {
  double object = 0.0;
  double word = 0.0;
};

/// Fraction of nodes whose head ranks their own logit first.
inline AccuracyPair identification_accuracy(const RepresentationModel& model,
                                            const CrossModalGraph& graph) {
  detail::check_model_graph(model, graph);
  const auto top1 = [](const Eigen::MatrixXd& logits) {
    Eigen::Index hits = 0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Eigen::Index best;
      logits.col(j).maxCoeff(&best);
      hits += best == j;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.cols());
  };
  const Eigen::MatrixXd ao = aggregated_object_embeddings(model, graph);
  const Eigen::MatrixXd aw = aggregated_word_embeddings(model, graph);
  const Eigen::MatrixXd zo =
      (model.object_w2() * ((model.object_w1() * ao).colwise() + model.object_b1()))
          .colwise() +
      model.object_b2();
  const Eigen::MatrixXd zw =
      (model.word_w2() * ((model.word_w1() * aw).colwise() + model.word_b1()))
          .colwise() +
      model.word_b2();
  return {top1(zo), top1(zw)};
}

inline void write_loss_trace_csv(const std::vector<TraceRow>& trace,
                                 std::ostream& out) {
  out << "step,loss_ss_o,loss_ss_w,loss_align,loss_total\n";
  for (const TraceRow& row : trace) {
    out << row.step << ',' << detail::format_weight(row.losses.ss_object) << ','
        << detail::format_weight(row.losses.ss_word) << ','
        << detail::format_weight(row.losses.align) << ','
        << detail::format_weight(row.losses.total) << '\n';
  }
}

inline nlohmann::json train_config_json(const TrainConfig& cfg) {
  return {{"dim", cfg.dim},
          {"hidden", cfg.hidden},
          {"layers", cfg.layers},
          {"delta", cfg.delta},
          {"lambda_align", cfg.lambda_align},
          {"lr", cfg.lr},
          {"weight_decay", cfg.weight_decay},
          {"init_scale", cfg.init_scale},
          {"steps", cfg.steps},
          {"seed", cfg.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::set<std::string> known = {
      "dim",          "hidden",     "layers", "delta", "lambda_align",
      "weight_decay", "init_scale", "steps",  "seed",  "lr"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown training config key '" + key + "'");
  }
  TrainConfig cfg;
  try {
    cfg.dim = j.value("dim", cfg.dim);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.lambda_align = j.value("lambda_align", cfg.lambda_align);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.init_scale = j.value("init_scale", cfg.init_scale);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

namespace detail {

constexpr char kModelMagic[8] = {'X', 'S', 'M', 'O', 'D', 'E', 'L', '1'};
constexpr char kModelTrailer[8] = {'X', 'S', 'M', 'E', 'N', 'D', '.', '\n'};
constexpr uint32_t kModelVersion = 1;

}  // namespace detail

/// Model files carry the config, the node counts, and the raw parameter
/// vector. Optimizer state is deliberately left out: a loaded model resumes
/// with fresh moments.
inline void save_model(const std::string& path, const RepresentationModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(detail::kModelMagic, sizeof detail::kModelMagic);

  nlohmann::json header{{"version", detail::kModelVersion},
                        {"n_objects", model.n_objects},
                        {"n_words", model.n_words},
                        {"config", train_config_json(model.config)}};
  detail::put_string(out, header.dump());

  detail::put_u64(out, static_cast<uint64_t>(model.params.size()));
  for (Eigen::Index i = 0; i < model.params.size(); ++i) {
    detail::put_f64(out, model.params[i]);
  }
  out.write(detail::kModelTrailer, sizeof detail::kModelTrailer);
  if (!out) throw IoError("failed while writing '" + path + "'");
}

inline RepresentationModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  char magic[sizeof detail::kModelMagic];
  if (!in.read(magic, sizeof magic) ||
      !std::equal(magic, magic + sizeof magic, detail::kModelMagic)) {
    throw SnapshotCorruptError("'" + path + "' is not a model file");
  }

  RepresentationModel model;
  try {
    const nlohmann::json header = nlohmann::json::parse(detail::get_string(in));
    const uint32_t version = header.at("version").get<uint32_t>();
    if (version != detail::kModelVersion) {
      throw SnapshotVersionError("model file version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(detail::kModelVersion) + ")");
    }
    model.config = train_config_from_json(header.at("config"));
    model.n_objects = header.at("n_objects").get<uint32_t>();
    model.n_words = header.at("n_words").get<uint32_t>();
  } catch (const SnapshotVersionError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotCorruptError(std::string("model header is damaged: ") + e.what());
  } catch (const ConfigError& e) {
    throw SnapshotCorruptError(std::string("model header is damaged: ") + e.what());
  }
  if (model.n_objects == 0 || model.n_words == 0) {
    throw SnapshotCorruptError("model header names an empty modality");
  }

  model.layout = detail::make_layout(model.n_objects, model.n_words, model.config.dim,
                                     model.config.resolved_hidden());
  const uint64_t count = detail::get_u64(in);
  if (count != static_cast<uint64_t>(model.layout.total)) {
    throw SnapshotCorruptError("parameter count does not match the model shape");
  }
  model.params.resize(model.layout.total);
  for (Eigen::Index i = 0; i < model.params.size(); ++i) {
    model.params[i] = detail::get_f64(in);
  }

  char trailer[sizeof detail::kModelTrailer];
  if (!in.read(trailer, sizeof trailer) ||
      !std::equal(trailer, trailer + sizeof trailer, detail::kModelTrailer)) {
    throw SnapshotCorruptError("model trailer is missing or damaged");
  }
  in.peek();
  if (!in.eof()) throw SnapshotCorruptError("trailing bytes after the model trailer");
  return model;
}

/// One row per node: modality, symbol, then the vector (base or aggregated)
/// tab-separated.
inline void export_embeddings_tsv(const RepresentationModel& model,
                                  const GraphBundle& bundle, bool aggregated,
                                  std::ostream& out) {
  detail::check_model_graph(model, bundle.graph);
  const Eigen::MatrixXd objects = aggregated
                                      ? aggregated_object_embeddings(model, bundle.graph)
                                      : Eigen::MatrixXd(model.object_base());
  const Eigen::MatrixXd words = aggregated
                                    ? aggregated_word_embeddings(model, bundle.graph)
                                    : Eigen::MatrixXd(model.word_base());
  const auto rows = [&out](const Eigen::MatrixXd& m, const Vocabulary& vocab,
                           const char* label) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << label << '\t' << vocab.symbol_of(static_cast<uint32_t>(j));
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << '\t' << detail::format_weight(m(i, j));
      }
      out << '\n';
    }
  };
  rows(objects, bundle.objects, "object");
  rows(words, bundle.words, "word");
}

}  // namespace xsl
