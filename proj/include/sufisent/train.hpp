#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sufisent/data.hpp"
#include "sufisent/gradcheck.hpp"
#include "sufisent/model.hpp"

namespace sufisent {

struct TrainConfig {
  double lr0 = 0.1;
  double epoch_decay = 0.99;  // multiplier after an epoch without a drop
  double drop_decay = 0.2;    // multiplier after a validation-accuracy drop
  double clip_norm = 5.0;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 20;
  double min_lr = 1e-5;
  std::uint64_t seed = 1;

  void validate() const {
    if (lr0 <= 0.0) throw DataError("TrainConfig: lr0 must be positive");
    if (epoch_decay <= 0.0 || epoch_decay > 1.0 || drop_decay <= 0.0 || drop_decay > 1.0) {
      throw DataError("TrainConfig: decay factors must lie in (0, 1]");
    }
    if (clip_norm <= 0.0) throw DataError("TrainConfig: clip_norm must be positive");
    if (batch_size < 1) throw DataError("TrainConfig: batch_size must be >= 1");
  }
};

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr_used = 0.0;
  double lr_next = 0.0;
};

inline nlohmann::json epoch_report_json(const EpochReport& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["train_acc"] = r.train_acc;
  j["val_acc"] = r.val_acc;
  j["lr_used"] = r.lr_used;
  j["lr_next"] = r.lr_next;
  return j;
}

// Scale all gradients by max_norm/g when the global L2 norm g exceeds
// max_norm; returns the pre-clip norm. Direction is preserved.
inline double clip_global_norm(std::vector<NumArray>& grads, double max_norm) {
  if (max_norm <= 0.0) throw NumericError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const NumArray& gradient : grads) {
    for (double v : gradient.data) sq += v * v;
  }
  if (!std::isfinite(sq)) throw NumericError("clip_global_norm: non-finite gradients");
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (NumArray& gradient : grads) {
      for (double& v : gradient.data) v *= s;
    }
  }
  return norm;
}

// p <- p - lr * grad. Tied storages appear once in params, so they receive
// their (already summed) gradient exactly once.
inline void sgd_step(const std::vector<ParamRef>& params, const std::vector<NumArray>& grads,
                     double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    NumArray& p = *params[i].array;
    const NumArray& gradient = grads[i];
    if (!p.same_shape(gradient)) {
      throw ShapeError("sgd_step: " + params[i].name + " shape " + shape_str(p.shape) +
                       " vs gradient " + shape_str(gradient.shape));
    }
    for (std::size_t k = 0; k < p.numel(); ++k) p[k] -= lr * gradient[k];
  }
}

// Multiply by drop_decay when validation accuracy dropped, else by
// epoch_decay. Equal accuracy counts as no drop; the first epoch has no
// previous accuracy and uses epoch_decay.
inline double lr_update(double lr, std::optional<double> prev_val_acc, double new_val_acc,
                        double epoch_decay = 0.99, double drop_decay = 0.2) {
  if (lr <= 0.0) throw NumericError("lr_update: lr must be positive");
  if (prev_val_acc && new_val_acc < *prev_val_acc) return lr * drop_decay;
  return lr * epoch_decay;
}

// Forward pass over one batch: per-example encodings, pair features, logits
// and losses; the graph loss is the batch mean.
struct BatchGraph {
  ValueGraph graph;
  ModelNodes nodes;
  Value mean_loss;
  std::size_t correct = 0;
};

inline void build_batch_graph(BatchGraph& bg, const Model& m, const NliBatch& batch) {
  bg.nodes = bind_model(bg.graph, m);
  ValueGraph& g = bg.graph;
  std::vector<Value> losses;
  losses.reserve(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    Value u = encode_tokens(g, m.encoder_config, bg.nodes.encoder, bg.nodes.embedding,
                            batch.premise_row(i), batch.premise_mask_row(i));
    Value v = encode_tokens(g, m.encoder_config, bg.nodes.encoder, bg.nodes.embedding,
                            batch.hyp_row(i), batch.hyp_mask_row(i));
    Value logits = head_logits(g, bg.nodes.head, build_features(g, u, v));
    losses.push_back(g.softmax_cross_entropy(logits, static_cast<int>(batch.labels[i])));
    if (predict(g.value(logits)) == static_cast<int>(batch.labels[i])) ++bg.correct;
  }
  Value total = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) total = g.add(total, losses[i]);
  bg.mean_loss = g.scale(total, 1.0 / static_cast<double>(batch.size));
}

// Gradients for the batch mean loss, aligned with trainable_params(). The
// padding embedding row is pinned to zero.
inline std::vector<NumArray> batch_gradients(BatchGraph& bg, const Model& m) {
  bg.graph.backward(bg.mean_loss);
  std::vector<NumArray> grads;
  grads.reserve(bg.nodes.param_values.size());
  for (Value v : bg.nodes.param_values) grads.push_back(bg.graph.grad(v));
  if (m.embeddings.trainable) {
    for (std::size_t j = 0; j < m.embeddings.dim(); ++j) grads[0].at(0, j) = 0.0;
  }
  return grads;
}

inline double evaluate_accuracy(const Model& m, const std::vector<NliExample>& dataset) {
  if (dataset.empty()) throw DataError("evaluate_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const NliExample& ex : dataset) {
    ValueGraph g;
    Value table = g.constant(m.embeddings.table);
    EncoderNodes enc = bind_encoder(g, m.encoder_config, m.encoder, /*as_param=*/false);
    HeadNodes head = bind_head(g, m.head, /*as_param=*/false);
    Value u = encode_tokens(g, m.encoder_config, enc, table, as_row_ids(ex.premise),
                            Mask(ex.premise.size(), true));
    Value v = encode_tokens(g, m.encoder_config, enc, table, as_row_ids(ex.hypothesis),
                            Mask(ex.hypothesis.size(), true));
    Value logits = head_logits(g, head, build_features(g, u, v));
    if (predict(g.value(logits)) == static_cast<int>(ex.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

struct FitResult {
  std::vector<EpochReport> epochs;
  Model best_model;
  double best_val_acc = -1.0;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string message;
};

// SGD with the epoch-wise schedule: shuffled mini-batches, clip, step; after
// each epoch evaluate validation accuracy and decay the learning rate (0.99,
// or 0.2 on a drop). Stops at max_epochs or when lr falls below min_lr.
// Keeps the snapshot with the best validation accuracy. A non-finite loss or
// gradient aborts with diverged=true and the reports so far.
inline FitResult fit(Model model, const std::vector<NliExample>& train,
                     const std::vector<NliExample>& val, const TrainConfig& cfg,
                     std::ostream* metrics = nullptr) {
  cfg.validate();
  if (train.empty()) throw DataError("fit: empty training set");
  if (val.empty()) throw DataError("fit: empty validation set");

  FitResult result;
  result.best_model = model;
  std::vector<ParamRef> params = trainable_params(model);

  double lr = cfg.lr0;
  std::optional<double> prev_val;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<NliBatch> batches = make_batches(train, cfg.batch_size, cfg.seed + epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const NliBatch& batch = batches[bi];
      BatchGraph bg;
      build_batch_graph(bg, model, batch);
      double loss = bg.graph.value(bg.mean_loss)[0];
      if (!std::isfinite(loss)) {
        result.diverged = true;
        result.message = "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(bi);
        return result;
      }
      std::vector<NumArray> grads;
      try {
        grads = batch_gradients(bg, model);
        clip_global_norm(grads, cfg.clip_norm);
      } catch (const NumericError& e) {
        result.diverged = true;
        result.message = std::string(e.what()) + " in epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(bi);
        return result;
      }
      sgd_step(params, grads, lr);
      loss_sum += loss * static_cast<double>(batch.size);
      correct += bg.correct;
    }

    double val_acc = evaluate_accuracy(model, val);
    double lr_next = lr_update(lr, prev_val, val_acc, cfg.epoch_decay, cfg.drop_decay);
    EpochReport report{epoch,
                       loss_sum / static_cast<double>(train.size()),
                       static_cast<double>(correct) / static_cast<double>(train.size()),
                       val_acc,
                       lr,
                       lr_next};
    result.epochs.push_back(report);
    if (metrics) *metrics << epoch_report_json(report).dump() << '\n';

    if (val_acc > result.best_val_acc) {
      result.best_val_acc = val_acc;
      result.best_model = model;
      result.best_epoch = epoch;
    }
    prev_val = val_acc;
    lr = lr_next;
    if (lr < cfg.min_lr) break;
  }
  return result;
}

// One padded batch holding the given examples, in order.
inline NliBatch batch_from_examples(const std::vector<NliExample>& examples) {
  NliBatch batch;
  batch.size = examples.size();
  for (const NliExample& ex : examples) {
    batch.premise_len = std::max(batch.premise_len, ex.premise.size());
    batch.hyp_len = std::max(batch.hyp_len, ex.hypothesis.size());
  }
  batch.premise.assign(batch.size * batch.premise_len, Vocab::kPad);
  batch.hypothesis.assign(batch.size * batch.hyp_len, Vocab::kPad);
  batch.premise_mask.assign(batch.size * batch.premise_len, false);
  batch.hyp_mask.assign(batch.size * batch.hyp_len, false);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (std::size_t j = 0; j < examples[i].premise.size(); ++j) {
      batch.premise[i * batch.premise_len + j] = examples[i].premise[j];
      batch.premise_mask[i * batch.premise_len + j] = true;
    }
    for (std::size_t j = 0; j < examples[i].hypothesis.size(); ++j) {
      batch.hypothesis[i * batch.hyp_len + j] = examples[i].hypothesis[j];
      batch.hyp_mask[i * batch.hyp_len + j] = true;
    }
    batch.labels.push_back(examples[i].label);
  }
  return batch;
}

// Gradient check of the full pipeline (embeddings -> encoder -> features ->
// head -> mean loss) on a small batch, against central differences.
inline GradCheckReport model_grad_check(Model& model, const std::vector<NliExample>& examples,
                                        double h = 1e-6, double tolerance = 1e-5) {
  NliBatch batch = batch_from_examples(examples);
  std::vector<ParamRef> params = trainable_params(model);
  LossFn loss_fn = [&](std::vector<NumArray>* grads_out) {
    BatchGraph bg;
    build_batch_graph(bg, model, batch);
    if (grads_out) *grads_out = batch_gradients(bg, model);
    return bg.graph.value(bg.mean_loss)[0];
  };
  return grad_check(loss_fn, params, h, tolerance);
}

}  // namespace sufisent
