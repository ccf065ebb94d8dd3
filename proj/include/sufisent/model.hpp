#pragma once

#include <string>
#include <vector>

#include "sufisent/data.hpp"
#include "sufisent/encoder.hpp"
#include "sufisent/gradcheck.hpp"
#include "sufisent/nli.hpp"

namespace sufisent {

// Everything a trained encoder carries: vocabulary, embeddings, the LSTM
// stacks and the classifier head.
struct Model {
  EncoderConfig encoder_config;
  EncoderParams encoder;
  HeadParams head;
  EmbeddingTable embeddings;
  Vocab vocab;
};

inline Model make_model(const EncoderConfig& cfg, std::size_t head_hidden, HeadActivation act,
                        Vocab vocab, EmbeddingTable embeddings, std::uint64_t seed) {
  if (embeddings.dim() != cfg.e) {
    throw ShapeError("make_model: embedding dim " + std::to_string(embeddings.dim()) +
                     " vs encoder input dim " + std::to_string(cfg.e));
  }
  Rng rng(seed);
  Model m;
  m.encoder_config = cfg;
  m.encoder = EncoderParams::init(cfg, rng);
  m.head = HeadParams::init(encoding_dim(cfg.variant, cfg.d), head_hidden, act, rng);
  m.embeddings = std::move(embeddings);
  m.vocab = std::move(vocab);
  return m;
}

namespace detail {
inline void add_lstm_refs(std::vector<ParamRef>& out, const std::string& prefix, LstmParams& p) {
  out.push_back({prefix + ".wx", &p.wx});
  out.push_back({prefix + ".wh", &p.wh});
  out.push_back({prefix + ".b", &p.b});
}
}  // namespace detail

// Distinct trainable storages in a fixed order. Tied variants expose one
// storage per direction, so a tied weight is updated exactly once per step
// even though it serves two runners.
inline std::vector<ParamRef> trainable_params(Model& m) {
  std::vector<ParamRef> out;
  if (m.embeddings.trainable) out.push_back({"embedding.table", &m.embeddings.table});
  detail::add_lstm_refs(out, "encoder.fwd_prefix", m.encoder.fwd_prefix);
  if (m.encoder.fwd_suffix) detail::add_lstm_refs(out, "encoder.fwd_suffix", *m.encoder.fwd_suffix);
  detail::add_lstm_refs(out, "encoder.bwd_prefix", m.encoder.bwd_prefix);
  if (m.encoder.bwd_suffix) detail::add_lstm_refs(out, "encoder.bwd_suffix", *m.encoder.bwd_suffix);
  out.push_back({"head.w1", &m.head.w1});
  out.push_back({"head.b1", &m.head.b1});
  out.push_back({"head.w2", &m.head.w2});
  out.push_back({"head.b2", &m.head.b2});
  out.push_back({"head.w_out", &m.head.w_out});
  out.push_back({"head.b_out", &m.head.b_out});
  return out;
}

// Graph handles for the whole model. param_values lines up with
// trainable_params() so gradients can be read back in order.
struct ModelNodes {
  Value embedding;
  EncoderNodes encoder;
  HeadNodes head;
  std::vector<Value> param_values;
};

inline ModelNodes bind_model(ValueGraph& g, const Model& m) {
  ModelNodes n;
  n.embedding = m.embeddings.trainable ? g.param(m.embeddings.table)
                                       : g.constant(m.embeddings.table);
  if (m.embeddings.trainable) n.param_values.push_back(n.embedding);
  n.encoder = bind_encoder(g, m.encoder_config, m.encoder);
  auto push_lstm = [&](const LstmNodes& l) {
    n.param_values.push_back(l.wx);
    n.param_values.push_back(l.wh);
    n.param_values.push_back(l.b);
  };
  push_lstm(n.encoder.fwd_prefix);
  if (m.encoder.fwd_suffix) push_lstm(n.encoder.fwd_suffix);
  push_lstm(n.encoder.bwd_prefix);
  if (m.encoder.bwd_suffix) push_lstm(n.encoder.bwd_suffix);
  n.head = bind_head(g, m.head);
  n.param_values.push_back(n.head.w1);
  n.param_values.push_back(n.head.b1);
  n.param_values.push_back(n.head.w2);
  n.param_values.push_back(n.head.b2);
  n.param_values.push_back(n.head.w_out);
  n.param_values.push_back(n.head.b_out);
  return n;
}

// Encode a token-id sequence: embedding lookup then the variant encoder.
inline Value encode_tokens(ValueGraph& g, const EncoderConfig& cfg, const EncoderNodes& enc,
                           Value embedding_table, const std::vector<std::size_t>& ids,
                           const Mask& mask) {
  return encode(g, cfg, enc, g.gather_rows(embedding_table, ids), mask);
}

inline std::vector<std::size_t> as_row_ids(const std::vector<int>& ids) {
  std::vector<std::size_t> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = static_cast<std::size_t>(ids[i]);
  return out;
}

// Encoding of one id sequence outside any training graph.
inline NumArray encode_ids(const Model& m, const std::vector<int>& ids, const Mask& mask) {
  ValueGraph g;
  Value table = g.constant(m.embeddings.table);
  EncoderNodes enc = bind_encoder(g, m.encoder_config, m.encoder, /*as_param=*/false);
  return g.value(encode_tokens(g, m.encoder_config, enc, table, as_row_ids(ids), mask));
}

inline NumArray encode_ids(const Model& m, const std::vector<int>& ids) {
  return encode_ids(m, ids, Mask(ids.size(), true));
}

}  // namespace sufisent
