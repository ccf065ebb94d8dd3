// Command-line driver: gen-toy | train | encode | eval | gradcheck.
// Exit codes: 0 success, 1 usage error, 2 runtime/data error, 3 numeric
// failure (divergence or a failed gradient check).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sufisent/sufisent.hpp"

namespace fs = std::filesystem;
using namespace sufisent;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void print_kv(const std::string& key, const std::string& value) {
  std::cout << "  " << key << " = " << value << "\n";
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// ---- gen-toy ----

struct GenToyArgs {
  std::uint64_t seed = 7;
  std::size_t count = 300;
  std::string out;
};

int run_gen_toy(const GenToyArgs& a) {
  std::cout << "gen-toy\n";
  print_kv("seed", std::to_string(a.seed));
  print_kv("count", std::to_string(a.count));
  print_kv("out", a.out);
  std::vector<RawNliExample> examples = gen_toy_nli(a.seed, a.count);
  write_snli_file(a.out, examples);
  std::size_t counts[3] = {0, 0, 0};
  for (const RawNliExample& ex : examples) ++counts[static_cast<int>(ex.label)];
  std::cout << "wrote " << examples.size() << " examples (entailment " << counts[0] << ", neutral "
            << counts[1] << ", contradiction " << counts[2] << ")\n";
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string train_path, val_path;
  std::string variant = "sufisent-tied";
  std::size_t d = 16, e = 16;
  std::string embeddings_path;
  bool finetune_embeddings = false;
  bool freeze_embeddings = false;
  double emb_scale = 1.0;
  std::size_t min_count = 1;
  std::size_t fc_dim = 512;
  std::string fc_activation = "tanh";
  TrainConfig cfg;
  std::string checkpoint_out = "model.ckpt";
  std::string metrics_out = "metrics.jsonl";
};

int run_train(const TrainArgs& a) {
  EncoderConfig enc_cfg{parse_variant(a.variant), a.d, a.e};
  HeadActivation act = parse_activation(a.fc_activation);
  a.cfg.validate();

  std::cout << "train\n";
  print_kv("train", a.train_path);
  print_kv("val", a.val_path);
  print_kv("variant", variant_name(enc_cfg.variant));
  print_kv("d", std::to_string(a.d));
  print_kv("e", std::to_string(a.e));
  print_kv("encoding_dim", std::to_string(encoding_dim(enc_cfg.variant, a.d)));
  print_kv("embeddings", a.embeddings_path.empty() ? "(random)" : a.embeddings_path);
  print_kv("fc", std::to_string(a.fc_dim) + "x2, activation " + a.fc_activation);
  print_kv("lr0", fmt_double(a.cfg.lr0));
  print_kv("epoch_decay", fmt_double(a.cfg.epoch_decay));
  print_kv("drop_decay", fmt_double(a.cfg.drop_decay));
  print_kv("clip_norm", fmt_double(a.cfg.clip_norm));
  print_kv("batch_size", std::to_string(a.cfg.batch_size));
  print_kv("max_epochs", std::to_string(a.cfg.max_epochs));
  print_kv("min_lr", fmt_double(a.cfg.min_lr));
  print_kv("seed", std::to_string(a.cfg.seed));
  print_kv("checkpoint", a.checkpoint_out);
  print_kv("metrics", a.metrics_out);

  SnliData train_data = parse_snli(a.train_path);
  SnliData val_data = parse_snli(a.val_path);
  std::cout << "parsed " << train_data.examples.size() << " train (+" << train_data.skipped
            << " skipped), " << val_data.examples.size() << " val (+" << val_data.skipped
            << " skipped)\n";

  Vocab vocab = build_vocab(train_data.examples, a.min_count);
  std::cout << "vocab size " << vocab.size() << "\n";

  EmbeddingTable table;
  if (a.embeddings_path.empty()) {
    table = EmbeddingTable::random(vocab.size(), a.e, a.cfg.seed, a.emb_scale);
    if (a.freeze_embeddings) table.trainable = false;
  } else {
    std::size_t dups = 0;
    table = load_embeddings(a.embeddings_path, vocab, a.e, a.cfg.seed, &dups);
    std::cout << "embeddings: " << table.pretrained_count() << "/" << (vocab.size() - 2)
              << " pretrained";
    if (dups) std::cout << " (" << dups << " duplicate tokens, last wins)";
    std::cout << "\n";
    if (a.finetune_embeddings) table.trainable = true;
  }

  Model model = make_model(enc_cfg, a.fc_dim, act, vocab, std::move(table), a.cfg.seed);
  std::vector<NliExample> train = to_examples(train_data.examples, model.vocab);
  std::vector<NliExample> val = to_examples(val_data.examples, model.vocab);

  std::ofstream metrics(a.metrics_out);
  if (!metrics) throw DataError("cannot write " + a.metrics_out);
  FitResult result = fit(std::move(model), train, val, a.cfg, &metrics);

  for (const EpochReport& r : result.epochs) {
    std::printf("epoch %3zu  loss %.4f  train %.4f  val %.4f  lr %.3g -> %.3g\n", r.epoch,
                r.train_loss, r.train_acc, r.val_acc, r.lr_used, r.lr_next);
  }
  if (result.diverged) {
    std::cerr << "training diverged: " << result.message << "\n";
    return kExitNumeric;
  }
  Checkpoint ckpt{std::move(result.best_model), a.cfg, result.best_val_acc};
  checkpoint_save(a.checkpoint_out, ckpt);
  std::cout << "best val accuracy " << result.best_val_acc << " (epoch " << result.best_epoch
            << "), checkpoint written to " << a.checkpoint_out << "\n";
  return kExitOk;
}

// ---- encode ----

struct EncodeArgs {
  std::string checkpoint, input, out;
};

int run_encode(const EncodeArgs& a) {
  std::cout << "encode\n";
  print_kv("checkpoint", a.checkpoint);
  print_kv("input", a.input);
  print_kv("out", a.out);
  Checkpoint ckpt = checkpoint_load(a.checkpoint);
  std::ifstream in(a.input);
  if (!in) throw DataError("cannot open " + a.input);
  std::vector<std::string> sentences;
  std::string line;
  while (std::getline(in, line)) sentences.push_back(line);
  if (sentences.empty()) throw DataError(a.input + ": no sentences");
  NumArray enc = encode_sentences(ckpt.model, sentences);
  std::ofstream out(a.out);
  if (!out) throw DataError("cannot write " + a.out);
  char buf[32];
  for (std::size_t i = 0; i < enc.rows(); ++i) {
    for (std::size_t j = 0; j < enc.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", enc.at(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
  std::cout << "wrote " << enc.rows() << " rows of dim " << enc.cols() << "\n";
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, tasks_dir;
  std::string report_out;
  std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
  std::cout << "eval\n";
  print_kv("checkpoint", a.checkpoint);
  print_kv("tasks", a.tasks_dir);
  print_kv("seed", std::to_string(a.seed));
  if (!a.report_out.empty()) print_kv("report", a.report_out);
  Checkpoint ckpt = checkpoint_load(a.checkpoint);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.tasks_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(a.tasks_dir + ": no .jsonl task files");

  std::vector<ProbeTask> tasks;
  for (const fs::path& f : files) tasks.push_back(load_probe_task(f.string(), f.stem().string()));
  TransferReport report = evaluate_transfer(ckpt.model, tasks, a.seed);
  print_transfer_table(std::cout, report);
  if (!a.report_out.empty()) write_transfer_report(a.report_out, report);
  return kExitOk;
}

// ---- gradcheck ----

struct GradCheckArgs {
  std::string variant = "sufisent";
  std::size_t d = 8, e = 6, n = 5;
  std::uint64_t seed = 1;
  std::size_t fc_dim = 32;
  double tol = 1e-5;
  double step = 1e-6;
  bool corrupt = false;
};

int run_gradcheck(const GradCheckArgs& a) {
  EncoderConfig cfg{parse_variant(a.variant), a.d, a.e};
  std::cout << "gradcheck\n";
  print_kv("variant", variant_name(cfg.variant));
  print_kv("d", std::to_string(a.d));
  print_kv("e", std::to_string(a.e));
  print_kv("n", std::to_string(a.n));
  print_kv("seed", std::to_string(a.seed));
  print_kv("fc_dim", std::to_string(a.fc_dim));
  print_kv("tol", fmt_double(a.tol));
  print_kv("h", fmt_double(a.step));
  if (a.corrupt) print_kv("corrupt", "true");

  Vocab vocab;
  for (int i = 0; i < 12; ++i) vocab.add("t" + std::to_string(i));
  EmbeddingTable table = EmbeddingTable::random(vocab.size(), a.e, a.seed + 1);
  Model model = make_model(cfg, a.fc_dim, HeadActivation::Tanh, vocab, std::move(table), a.seed);

  Rng rng(a.seed + 2);
  std::vector<NliExample> batch;
  for (int i = 0; i < 2; ++i) {
    NliExample ex;
    for (std::size_t j = 0; j < a.n; ++j) ex.premise.push_back(2 + static_cast<int>(rng.index(12)));
    for (std::size_t j = 0; j < a.n; ++j) {
      ex.hypothesis.push_back(2 + static_cast<int>(rng.index(12)));
    }
    ex.label = static_cast<NliLabel>(rng.index(3));
    batch.push_back(ex);
  }

  GradCheckReport report;
  if (a.corrupt) {
    // negative control: inject an error into one analytic gradient entry
    NliBatch nb = batch_from_examples(batch);
    std::vector<ParamRef> params = trainable_params(model);
    LossFn broken = [&](std::vector<NumArray>* grads_out) {
      BatchGraph bg;
      build_batch_graph(bg, model, nb);
      if (grads_out) {
        *grads_out = batch_gradients(bg, model);
        grads_out->back()[0] += 0.5;
      }
      return bg.graph.value(bg.mean_loss)[0];
    };
    report = grad_check(broken, params, a.step, a.tol);
  } else {
    report = model_grad_check(model, batch, a.step, a.tol);
  }

  std::cout << "per-parameter max relative error:\n";
  for (const auto& [name, err] : report.per_param) {
    std::printf("  %-24s %.3e\n", name.c_str(), err);
  }
  std::cout << "worst entries:\n";
  for (const GradCheckEntry& w : report.worst) {
    std::printf("  %-24s [%6zu]  analytic % .6e  numeric % .6e  rel %.3e\n", w.param.c_str(),
                w.index, w.analytic, w.numeric, w.rel_err);
  }
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", report.max_rel_err, report.tolerance,
              report.pass() ? "PASS" : "FAIL");
  return report.pass() ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sufisent: suffix-window sentence encoders and their NLI training pipeline"};
  app.require_subcommand(1);

  GenToyArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-toy", "generate a synthetic NLI dataset");
  gen->add_option("--seed", gen_args.seed, "PRNG seed");
  gen->add_option("--count", gen_args.count, "number of examples (>= 3)");
  gen->add_option("--out", gen_args.out, "output file (SNLI line format)")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train an encoder on an NLI dataset");
  train->add_option("--train", train_args.train_path, "training set")->required();
  train->add_option("--val", train_args.val_path, "validation set")->required();
  train->add_option("--variant", train_args.variant,
                    "sufisent | sufisent-tied | sufisent-cat | sufisent-cat-tied | bilstm-max");
  train->add_option("--d", train_args.d, "LSTM hidden size");
  train->add_option("--e", train_args.e, "embedding size");
  train->add_option("--embeddings", train_args.embeddings_path, "pretrained embedding file");
  train->add_flag("--finetune-embeddings", train_args.finetune_embeddings,
                  "update pretrained embeddings during training");
  train->add_flag("--freeze-embeddings", train_args.freeze_embeddings,
                  "keep random embeddings fixed during training");
  train->add_option("--emb-scale", train_args.emb_scale, "random embedding init scale");
  train->add_option("--min-count", train_args.min_count, "vocabulary frequency threshold");
  train->add_option("--fc-dim", train_args.fc_dim, "classifier layer width");
  train->add_option("--fc-activation", train_args.fc_activation, "tanh | none");
  train->add_option("--lr0", train_args.cfg.lr0, "initial learning rate");
  train->add_option("--epoch-decay", train_args.cfg.epoch_decay, "per-epoch lr multiplier");
  train->add_option("--drop-decay", train_args.cfg.drop_decay, "lr multiplier on accuracy drop");
  train->add_option("--clip-norm", train_args.cfg.clip_norm, "gradient clipping norm");
  train->add_option("--batch-size", train_args.cfg.batch_size, "mini-batch size");
  train->add_option("--max-epochs", train_args.cfg.max_epochs, "epoch cap");
  train->add_option("--min-lr", train_args.cfg.min_lr, "stop when lr falls below this");
  train->add_option("--seed", train_args.cfg.seed, "PRNG seed");
  train->add_option("--checkpoint-out", train_args.checkpoint_out, "checkpoint path");
  train->add_option("--metrics-out", train_args.metrics_out, "metrics file path");

  EncodeArgs encode_args;
  CLI::App* encode = app.add_subcommand("encode", "encode sentences with a trained checkpoint");
  encode->add_option("--checkpoint", encode_args.checkpoint, "checkpoint path")->required();
  encode->add_option("--input", encode_args.input, "text file, one sentence per line")->required();
  encode->add_option("--out", encode_args.out, "output matrix file")->required();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "transfer evaluation with linear probes");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint path")->required();
  eval->add_option("--tasks", eval_args.tasks_dir, "directory of .jsonl probe tasks")->required();
  eval->add_option("--seed", eval_args.seed, "probe training seed");
  eval->add_option("--report-out", eval_args.report_out, "report file (JSON lines)");

  GradCheckArgs gc_args;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--variant", gc_args.variant, "encoder variant");
  gc->add_option("--d", gc_args.d, "LSTM hidden size");
  gc->add_option("--e", gc_args.e, "embedding size");
  gc->add_option("--n", gc_args.n, "sentence length");
  gc->add_option("--seed", gc_args.seed, "PRNG seed");
  gc->add_option("--fc-dim", gc_args.fc_dim, "classifier layer width");
  gc->add_option("--tol", gc_args.tol, "relative error tolerance");
  gc->add_option("--h", gc_args.step, "finite-difference step");
  gc->add_flag("--corrupt", gc_args.corrupt, "inject a gradient error (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      if (gen_args.count < 3) {
        std::cerr << "gen-toy: --count must be >= 3\n";
        return kExitUsage;
      }
      return run_gen_toy(gen_args);
    }
    if (train->parsed()) return run_train(train_args);
    if (encode->parsed()) return run_encode(encode_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (gc->parsed()) return run_gradcheck(gc_args);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
