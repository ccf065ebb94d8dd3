#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sufisent/model.hpp"
#include "sufisent/train.hpp"

namespace sufisent {

// A probe task: labeled single sentences or sentence pairs, with a declared
// train/validation split (train examples first).
struct ProbeExample {
  std::vector<std::string> first;
  std::vector<std::string> second;  // empty unless is_pair
  bool is_pair = false;
  int label = 0;
};

struct ProbeTask {
  std::string name;
  std::vector<ProbeExample> examples;
  std::vector<std::string> class_names;
  std::size_t train_count = 0;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t val_count() const { return examples.size() - train_count; }
};

// JSONL task file: {"sentence": ..., "label": ...} or
// {"sentence1": ..., "sentence2": ..., "label": ...}; an optional
// "split": "train"|"val" field overrides the default 80/20 split. Class ids
// follow the sorted order of the label strings.
inline ProbeTask load_probe_task(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  struct Row {
    ProbeExample ex;
    std::string label;
    int split = -1;  // -1 unspecified, 0 train, 1 val
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  bool any_split = false;
  while (std::getline(in, line)) {
    ++lineno;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
    }
    Row r;
    if (j.contains("sentence")) {
      r.ex.first = tokenize(j.at("sentence").get<std::string>());
    } else if (j.contains("sentence1") && j.contains("sentence2")) {
      r.ex.first = tokenize(j.at("sentence1").get<std::string>());
      r.ex.second = tokenize(j.at("sentence2").get<std::string>());
      r.ex.is_pair = true;
    } else {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": need 'sentence' or 'sentence1'/'sentence2'");
    }
    if (r.ex.first.empty()) r.ex.first.emplace_back(kUnkToken);
    if (r.ex.is_pair && r.ex.second.empty()) r.ex.second.emplace_back(kUnkToken);
    if (!j.contains("label")) {
      throw DataError(path + ":" + std::to_string(lineno) + ": missing 'label'");
    }
    r.label = j.at("label").is_string() ? j.at("label").get<std::string>()
                                        : j.at("label").dump();
    if (j.contains("split")) {
      std::string s = j.at("split").get<std::string>();
      if (s != "train" && s != "val") {
        throw DataError(path + ":" + std::to_string(lineno) + ": split must be train or val");
      }
      r.split = s == "train" ? 0 : 1;
      any_split = true;
    }
    rows.push_back(std::move(r));
  }
  if (rows.size() < 2) throw DataError(path + ": need at least 2 examples");

  ProbeTask task;
  task.name = name;
  std::map<std::string, int> classes;
  for (const Row& r : rows) classes.emplace(r.label, 0);
  int next = 0;
  for (auto& [label, id] : classes) {
    id = next++;
    task.class_names.push_back(label);
  }
  if (classes.size() < 2) throw DataError(path + ": need at least 2 classes");

  if (any_split) {
    for (Row& r : rows) {
      if (r.split == -1) {
        throw DataError(path + ": either all lines or no lines may carry 'split'");
      }
    }
    for (int want : {0, 1}) {
      for (Row& r : rows) {
        if (r.split == want) {
          r.ex.label = classes[r.label];
          task.examples.push_back(r.ex);
          if (want == 0) ++task.train_count;
        }
      }
    }
  } else {
    task.train_count = (rows.size() * 4) / 5;
    if (task.train_count == rows.size()) --task.train_count;
    if (task.train_count == 0) task.train_count = 1;
    for (Row& r : rows) {
      r.ex.label = classes[r.label];
      task.examples.push_back(r.ex);
    }
  }
  if (task.train_count == 0 || task.val_count() == 0) {
    throw DataError(path + ": empty train or validation split");
  }
  return task;
}

// One encoding row per sentence; the model is untouched.
inline NumArray encode_dataset(const Model& m, const std::vector<std::vector<int>>& sentences) {
  if (sentences.empty()) throw DataError("encode_dataset: empty input");
  std::size_t width = encoding_dim(m.encoder_config.variant, m.encoder_config.d);
  NumArray out({sentences.size(), width});
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    NumArray enc = encode_ids(m, sentences[i]);
    for (std::size_t j = 0; j < width; ++j) out.at(i, j) = enc[j];
  }
  return out;
}

inline NumArray encode_sentences(const Model& m, const std::vector<std::string>& sentences) {
  std::vector<std::vector<int>> ids;
  ids.reserve(sentences.size());
  for (const std::string& s : sentences) {
    std::vector<std::string> toks = tokenize(s);
    if (toks.empty()) toks.emplace_back(kUnkToken);
    ids.push_back(to_ids(toks, m.vocab));
  }
  return encode_dataset(m, ids);
}

// Multinomial logistic regression on frozen feature rows, trained with the
// same SGD / clipping / decay schedule as the main loop. Returns the best
// validation accuracy. The first train_count rows are the training split.
inline double probe_train(const NumArray& features, const std::vector<int>& labels,
                          std::size_t train_count, std::size_t num_classes, std::uint64_t seed) {
  if (!features.is_matrix() || features.rows() != labels.size()) {
    throw ShapeError("probe_train: features " + shape_str(features.shape) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (train_count == 0 || train_count >= labels.size()) {
    throw DataError("probe_train: bad train split " + std::to_string(train_count) + " of " +
                    std::to_string(labels.size()));
  }
  std::vector<bool> seen(num_classes, false);
  for (std::size_t i = 0; i < train_count; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("probe_train: label out of range");
    }
    seen[static_cast<std::size_t>(labels[i])] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw DataError("probe_train: single-class training split");
  }

  std::size_t k = features.cols();
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 50;
  cfg.seed = seed;
  NumArray w({k, num_classes});
  NumArray b({num_classes});
  std::vector<ParamRef> params{{"probe.w", &w}, {"probe.b", &b}};

  auto logits_of = [&](std::size_t row) {
    NumArray out({num_classes});
    for (std::size_t c = 0; c < num_classes; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += features.at(row, j) * w.at(j, c);
      out[c] = acc + b[c];
    }
    return out;
  };
  auto val_accuracy = [&]() {
    std::size_t correct = 0;
    for (std::size_t i = train_count; i < labels.size(); ++i) {
      if (predict(logits_of(i)) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size() - train_count);
  };

  double lr = cfg.lr0;
  std::optional<double> prev;
  double best = val_accuracy();  // zero weights predict class 0 everywhere
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train_count);
    for (std::size_t i = 0; i < train_count; ++i) order[i] = i;
    Rng rng(cfg.seed + epoch);
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      std::size_t end = std::min(begin + cfg.batch_size, order.size());
      ValueGraph g;
      Value wn = g.param(w);
      Value bn = g.param(b);
      std::vector<Value> losses;
      for (std::size_t bi = begin; bi < end; ++bi) {
        std::size_t row = order[bi];
        NumArray x({k});
        for (std::size_t j = 0; j < k; ++j) x[j] = features.at(row, j);
        Value logits = g.add(g.matmul(g.constant(std::move(x)), wn), bn);
        losses.push_back(g.softmax_cross_entropy(logits, labels[row]));
      }
      Value total = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i) total = g.add(total, losses[i]);
      Value mean = g.scale(total, 1.0 / static_cast<double>(end - begin));
      g.backward(mean);
      std::vector<NumArray> grads{g.grad(wn), g.grad(bn)};
      clip_global_norm(grads, cfg.clip_norm);
      sgd_step(params, grads, lr);
    }
    double acc = val_accuracy();
    best = std::max(best, acc);
    lr = lr_update(lr, prev, acc, cfg.epoch_decay, cfg.drop_decay);
    prev = acc;
    if (lr < cfg.min_lr) break;
  }
  return best;
}

// macro = unweighted mean, micro = size-weighted mean, both in percent.
inline std::pair<double, double> micro_macro(const std::vector<double>& accuracies,
                                             const std::vector<std::size_t>& sizes) {
  if (accuracies.empty() || accuracies.size() != sizes.size()) {
    throw ShapeError("micro_macro: " + std::to_string(accuracies.size()) + " accuracies vs " +
                     std::to_string(sizes.size()) + " sizes");
  }
  double macro = 0.0, weighted = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < accuracies.size(); ++i) {
    if (sizes[i] == 0) throw ShapeError("micro_macro: zero task size");
    macro += accuracies[i];
    weighted += accuracies[i] * static_cast<double>(sizes[i]);
    total += sizes[i];
  }
  macro /= static_cast<double>(accuracies.size());
  double micro = weighted / static_cast<double>(total);
  return {micro, macro};
}

struct TaskResult {
  std::string name;
  double accuracy = 0.0;  // percent
  std::size_t val_examples = 0;
};

struct TransferReport {
  std::vector<TaskResult> tasks;
  double micro = 0.0;
  double macro = 0.0;
};

// Encode each task with the frozen model, train a probe per task, aggregate.
// Micro weights tasks by their validation example counts.
inline TransferReport evaluate_transfer(const Model& m, const std::vector<ProbeTask>& tasks,
                                        std::uint64_t seed) {
  if (tasks.empty()) throw DataError("evaluate_transfer: no tasks");
  TransferReport report;
  std::vector<double> accs;
  std::vector<std::size_t> sizes;
  for (const ProbeTask& task : tasks) {
    std::vector<std::vector<int>> first, second;
    std::vector<int> labels;
    for (const ProbeExample& ex : task.examples) {
      first.push_back(to_ids(ex.first, m.vocab));
      if (ex.is_pair) second.push_back(to_ids(ex.second, m.vocab));
      labels.push_back(ex.label);
    }
    NumArray u = encode_dataset(m, first);
    NumArray feats;
    if (second.empty()) {
      feats = u;
    } else {
      if (second.size() != first.size()) {
        throw DataError("task " + task.name + ": mixed single and pair examples");
      }
      NumArray v = encode_dataset(m, second);
      std::size_t kdim = u.cols();
      feats = NumArray({u.rows(), 4 * kdim});
      for (std::size_t i = 0; i < u.rows(); ++i) {
        for (std::size_t j = 0; j < kdim; ++j) {
          double a = u.at(i, j), bb = v.at(i, j);
          feats.at(i, j) = a;
          feats.at(i, kdim + j) = bb;
          feats.at(i, 2 * kdim + j) = std::abs(a - bb);
          feats.at(i, 3 * kdim + j) = a * bb;
        }
      }
    }
    double acc = probe_train(feats, labels, task.train_count, task.num_classes(), seed);
    report.tasks.push_back({task.name, 100.0 * acc, task.val_count()});
    accs.push_back(100.0 * acc);
    sizes.push_back(task.val_count());
  }
  auto [micro, macro] = micro_macro(accs, sizes);
  report.micro = micro;
  report.macro = macro;
  return report;
}

inline void write_transfer_report(const std::string& path, const TransferReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const TaskResult& t : report.tasks) {
    nlohmann::json j{{"task", t.name}, {"accuracy", t.accuracy}, {"val_examples", t.val_examples}};
    out << j.dump() << '\n';
  }
  nlohmann::json j{{"micro", report.micro}, {"macro", report.macro}};
  out << j.dump() << '\n';
}

inline void print_transfer_table(std::ostream& os, const TransferReport& report) {
  std::size_t width = 4;
  for (const TaskResult& t : report.tasks) width = std::max(width, t.name.size());
  os << std::left << std::setw(static_cast<int>(width)) << "task"
     << "  accuracy  val-examples\n";
  for (const TaskResult& t : report.tasks) {
    os << std::left << std::setw(static_cast<int>(width)) << t.name << "  " << std::right
       << std::setw(8) << std::fixed << std::setprecision(1) << t.accuracy << "  " << std::setw(12)
       << t.val_examples << "\n";
  }
  os << "micro / macro: " << std::fixed << std::setprecision(1) << report.micro << " / "
     << report.macro << "\n";
}

}  // namespace sufisent
