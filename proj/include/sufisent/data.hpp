#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sufisent/graph.hpp"
#include "sufisent/nli.hpp"
#include "sufisent/numarray.hpp"
#include "sufisent/rng.hpp"

namespace sufisent {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

inline bool is_ascii_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

// Lowercase, split on whitespace, peel leading/trailing ASCII punctuation
// into separate tokens. Non-empty input never yields an empty list; it falls
// back to the unknown token. Real tokens can never collide with the reserved
// "<pad>"/"<unk>" strings because '<' is peeled.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) continue;
    std::string_view word = text.substr(start, i - start);

    std::size_t lo = 0, hi = word.size();
    while (lo < hi && is_ascii_punct(word[lo])) ++lo;
    while (hi > lo && is_ascii_punct(word[hi - 1])) --hi;
    for (std::size_t k = 0; k < lo; ++k) out.emplace_back(1, word[k]);
    if (lo < hi) {
      std::string core(word.substr(lo, hi - lo));
      for (char& c : core) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(core));
    }
    for (std::size_t k = hi; k < word.size(); ++k) out.emplace_back(1, word[k]);
  }
  if (out.empty() && !text.empty()) out.emplace_back(kUnkToken);
  return out;
}

// Token ids: 0 = padding, 1 = unknown; real tokens start at 2.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> id_to_token{kPadToken, kUnkToken};
  std::unordered_map<std::string, int> token_to_id{{kPadToken, kPad}, {kUnkToken, kUnk}};

  std::size_t size() const { return id_to_token.size(); }

  int id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return token_to_id.count(token) > 0; }

  int add(const std::string& token) {
    auto it = token_to_id.find(token);
    if (it != token_to_id.end()) return it->second;
    int id = static_cast<int>(id_to_token.size());
    id_to_token.push_back(token);
    token_to_id.emplace(token, id);
    return id;
  }
};

struct RawNliExample {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  NliLabel label = NliLabel::Entailment;
};

struct NliExample {
  std::vector<int> premise;
  std::vector<int> hypothesis;
  NliLabel label = NliLabel::Entailment;
};

struct SnliData {
  std::vector<RawNliExample> examples;
  std::size_t skipped = 0;  // "-" gold labels (no annotator consensus)
};

inline NliLabel parse_gold_label(const std::string& s) {
  if (s == "entailment") return NliLabel::Entailment;
  if (s == "neutral") return NliLabel::Neutral;
  if (s == "contradiction") return NliLabel::Contradiction;
  throw DataError("unknown gold_label '" + s + "'");
}

// One JSON object per line with string fields sentence1, sentence2,
// gold_label. Lines labeled "-" are skipped and counted. A sentence that
// tokenizes to nothing becomes the unknown token, keeping both sides
// non-empty.
inline SnliData parse_snli(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  SnliData out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
    }
    for (const char* field : {"sentence1", "sentence2", "gold_label"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        throw DataError(path + ":" + std::to_string(lineno) + ": missing string field '" +
                        field + "'");
      }
    }
    std::string gold = j["gold_label"].get<std::string>();
    if (gold == "-") {
      ++out.skipped;
      continue;
    }
    RawNliExample ex;
    try {
      ex.label = parse_gold_label(gold);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ex.premise = tokenize(j["sentence1"].get<std::string>());
    ex.hypothesis = tokenize(j["sentence2"].get<std::string>());
    if (ex.premise.empty()) ex.premise.emplace_back(kUnkToken);
    if (ex.hypothesis.empty()) ex.hypothesis.emplace_back(kUnkToken);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

// Ids assigned by descending frequency, ties broken lexicographically.
inline Vocab build_vocab(const std::vector<RawNliExample>& examples, std::size_t min_count = 1) {
  if (min_count < 1) throw DataError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const RawNliExample& ex : examples) {
    for (const std::string& t : ex.premise) ++freq[t];
    for (const std::string& t : ex.hypothesis) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [tok, count] : freq) {
    if (count >= min_count && tok != kPadToken && tok != kUnkToken) items.emplace_back(tok, count);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& item : items) v.add(item.first);
  return v;
}

inline std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(vocab.id(t));
  return out;
}

inline std::vector<NliExample> to_examples(const std::vector<RawNliExample>& raw,
                                           const Vocab& vocab) {
  std::vector<NliExample> out;
  out.reserve(raw.size());
  for (const RawNliExample& ex : raw) {
    out.push_back({to_ids(ex.premise, vocab), to_ids(ex.hypothesis, vocab), ex.label});
  }
  return out;
}

// |V| x e embedding matrix. The padding row stays all-zero and is never
// updated; each row records whether it came from a pretrained file.
struct EmbeddingTable {
  NumArray table;
  std::vector<bool> pretrained;
  bool trainable = false;

  std::size_t dim() const { return table.cols(); }
  std::size_t vocab_size() const { return table.rows(); }

  // coverage over real (non-reserved) vocabulary rows
  std::size_t pretrained_count() const {
    std::size_t n = 0;
    for (std::size_t i = 2; i < pretrained.size(); ++i) {
      if (pretrained[i]) ++n;
    }
    return n;
  }

  // From-scratch table for training without pretrained vectors. The default
  // scale is deliberately larger than the pretrained-fallback rows: at desk
  // scale the gates need inputs of order one to learn before the schedule
  // decays the rate away.
  static EmbeddingTable random(std::size_t vocab_size, std::size_t e, std::uint64_t seed,
                               double scale = 1.0) {
    Rng rng(seed);
    EmbeddingTable t;
    t.table = NumArray({vocab_size, e});
    t.pretrained.assign(vocab_size, false);
    for (std::size_t i = 1; i < vocab_size; ++i) {
      for (std::size_t j = 0; j < e; ++j) t.table.at(i, j) = rng.uniform(-scale, scale);
    }
    t.trainable = true;
    return t;
  }
};

// Text format: "token v1 v2 ... ve" per line. In-vocab rows are filled from
// the file (duplicates: last one wins, counted); the rest are seeded
// U(-0.1, 0.1). Pretrained tables default to frozen.
inline EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, std::size_t e,
                                      std::uint64_t seed, std::size_t* duplicates = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  EmbeddingTable t;
  t.table = NumArray({vocab.size(), e});
  t.pretrained.assign(vocab.size(), false);
  t.trainable = false;

  std::size_t dup = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() != e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(e) +
                      " values for '" + token + "', got " + std::to_string(values.size()));
    }
    auto it = vocab.token_to_id.find(token);
    if (it == vocab.token_to_id.end() || it->second < 2) continue;
    std::size_t row = static_cast<std::size_t>(it->second);
    if (t.pretrained[row]) ++dup;
    for (std::size_t j = 0; j < e; ++j) t.table.at(row, j) = values[j];
    t.pretrained[row] = true;
  }
  if (duplicates) *duplicates = dup;

  // deterministic fallback rows, in id order; padding row stays zero
  Rng rng(seed);
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    if (t.pretrained[i]) continue;
    for (std::size_t j = 0; j < e; ++j) t.table.at(i, j) = rng.uniform(-0.1, 0.1);
  }
  return t;
}

// One shuffled mini-batch: padded id matrices plus row masks marking real
// tokens. Each batch pads to its own max lengths.
struct NliBatch {
  std::size_t size = 0;
  std::size_t premise_len = 0;
  std::size_t hyp_len = 0;
  std::vector<int> premise;    // size x premise_len, row-major, pad id 0
  std::vector<int> hypothesis; // size x hyp_len
  Mask premise_mask;
  Mask hyp_mask;
  std::vector<NliLabel> labels;

  std::vector<std::size_t> premise_row(std::size_t i) const {
    return row_ids(premise, premise_len, i);
  }
  std::vector<std::size_t> hyp_row(std::size_t i) const { return row_ids(hypothesis, hyp_len, i); }
  Mask premise_mask_row(std::size_t i) const { return mask_row(premise_mask, premise_len, i); }
  Mask hyp_mask_row(std::size_t i) const { return mask_row(hyp_mask, hyp_len, i); }

 private:
  static std::vector<std::size_t> row_ids(const std::vector<int>& m, std::size_t len,
                                          std::size_t i) {
    std::vector<std::size_t> out(len);
    for (std::size_t j = 0; j < len; ++j) out[j] = static_cast<std::size_t>(m[i * len + j]);
    return out;
  }
  static Mask mask_row(const Mask& m, std::size_t len, std::size_t i) {
    Mask out(len);
    for (std::size_t j = 0; j < len; ++j) out[j] = m[i * len + j];
    return out;
  }
};

inline std::vector<NliBatch> make_batches(const std::vector<NliExample>& examples,
                                          std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw DataError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<NliBatch> out;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    std::size_t end = std::min(begin + batch_size, order.size());
    NliBatch b;
    b.size = end - begin;
    for (std::size_t k = begin; k < end; ++k) {
      const NliExample& ex = examples[order[k]];
      b.premise_len = std::max(b.premise_len, ex.premise.size());
      b.hyp_len = std::max(b.hyp_len, ex.hypothesis.size());
    }
    b.premise.assign(b.size * b.premise_len, Vocab::kPad);
    b.hypothesis.assign(b.size * b.hyp_len, Vocab::kPad);
    b.premise_mask.assign(b.size * b.premise_len, false);
    b.hyp_mask.assign(b.size * b.hyp_len, false);
    for (std::size_t k = begin; k < end; ++k) {
      const NliExample& ex = examples[order[k]];
      std::size_t i = k - begin;
      for (std::size_t j = 0; j < ex.premise.size(); ++j) {
        b.premise[i * b.premise_len + j] = ex.premise[j];
        b.premise_mask[i * b.premise_len + j] = true;
      }
      for (std::size_t j = 0; j < ex.hypothesis.size(); ++j) {
        b.hypothesis[i * b.hyp_len + j] = ex.hypothesis[j];
        b.hyp_mask[i * b.hyp_len + j] = true;
      }
      b.labels.push_back(ex.label);
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Synthetic NLI at desk scale. 40 content tokens, 10 distractor tokens.
// Entailment: the hypothesis is an ordered subsequence of the premise.
// Contradiction: such a subsequence with exactly one position replaced by a
// distractor token. Neutral: tokens drawn independently of the premise.
// Labels are assigned round-robin, so counts balance to within 1.
inline std::vector<std::string> toy_content_tokens() {
  std::vector<std::string> out;
  for (int i = 0; i < 40; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    out.emplace_back(buf);
  }
  return out;
}

inline std::vector<std::string> toy_distractor_tokens() {
  std::vector<std::string> out;
  for (int i = 0; i < 10; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "z%d", i);
    out.emplace_back(buf);
  }
  return out;
}

inline std::vector<RawNliExample> gen_toy_nli(std::uint64_t seed, std::size_t count) {
  if (count < 3) throw DataError("gen_toy_nli: count must be >= 3");
  const std::vector<std::string> content = toy_content_tokens();
  const std::vector<std::string> distractor = toy_distractor_tokens();
  Rng rng(seed);
  std::vector<RawNliExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RawNliExample ex;
    ex.label = static_cast<NliLabel>(i % 3);
    std::size_t np = rng.range(4, 8);
    for (std::size_t k = 0; k < np; ++k) ex.premise.push_back(content[rng.index(40)]);

    std::size_t nh = rng.range(2, 4);
    if (ex.label == NliLabel::Neutral) {
      for (std::size_t k = 0; k < nh; ++k) ex.hypothesis.push_back(content[rng.index(40)]);
    } else {
      // ordered subsequence: nh distinct premise positions
      std::vector<std::size_t> pos(np);
      for (std::size_t k = 0; k < np; ++k) pos[k] = k;
      rng.shuffle(pos);
      pos.resize(nh);
      std::sort(pos.begin(), pos.end());
      for (std::size_t p : pos) ex.hypothesis.push_back(ex.premise[p]);
      if (ex.label == NliLabel::Contradiction) {
        ex.hypothesis[rng.index(nh)] = distractor[rng.index(10)];
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

inline void write_snli_file(const std::string& path, const std::vector<RawNliExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const RawNliExample& ex : examples) {
    nlohmann::json j;
    j["sentence1"] = join_tokens(ex.premise);
    j["sentence2"] = join_tokens(ex.hypothesis);
    j["gold_label"] = label_name(ex.label);
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("error writing " + path);
}

}  // namespace sufisent
