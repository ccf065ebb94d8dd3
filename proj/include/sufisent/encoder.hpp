#pragma once

#include <optional>
#include <string>

#include "sufisent/graph.hpp"
#include "sufisent/lstm.hpp"

namespace sufisent {

enum class Variant {
  SufiSent,
  SufiSentTied,
  SufiSentCat,
  SufiSentCatTied,
  BiLstmMax,
};

constexpr bool is_tied(Variant v) {
  return v == Variant::SufiSentTied || v == Variant::SufiSentCatTied;
}

constexpr bool is_cat(Variant v) {
  return v == Variant::SufiSentCat || v == Variant::SufiSentCatTied;
}

constexpr bool uses_suffix(Variant v) { return v != Variant::BiLstmMax; }

// 2d for SufiSent, SufiSent-Tied and BiLSTM-Max; 4d for the Cat variants.
constexpr std::size_t encoding_dim(Variant v, std::size_t d) { return is_cat(v) ? 4 * d : 2 * d; }

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::SufiSent: return "sufisent";
    case Variant::SufiSentTied: return "sufisent-tied";
    case Variant::SufiSentCat: return "sufisent-cat";
    case Variant::SufiSentCatTied: return "sufisent-cat-tied";
    case Variant::BiLstmMax: return "bilstm-max";
  }
  return "?";
}

inline Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::SufiSent, Variant::SufiSentTied, Variant::SufiSentCat,
                    Variant::SufiSentCatTied, Variant::BiLstmMax}) {
    if (name == variant_name(v)) return v;
  }
  throw DataError("unknown variant '" + name +
                  "' (expected sufisent, sufisent-tied, sufisent-cat, sufisent-cat-tied or "
                  "bilstm-max)");
}

struct EncoderConfig {
  Variant variant = Variant::SufiSent;
  std::size_t d = 16;  // hidden size
  std::size_t e = 16;  // embedding size
};

// Up to four LSTMs. Tied variants keep one storage per direction: the suffix
// optionals stay empty and the prefix weights serve both roles. BiLSTM-Max
// also keeps only the two prefix LSTMs.
struct EncoderParams {
  LstmParams fwd_prefix;
  LstmParams bwd_prefix;
  std::optional<LstmParams> fwd_suffix;
  std::optional<LstmParams> bwd_suffix;

  static EncoderParams init(const EncoderConfig& cfg, Rng& rng) {
    EncoderParams p;
    p.fwd_prefix = LstmParams::init(cfg.d, cfg.e, rng);
    if (uses_suffix(cfg.variant) && !is_tied(cfg.variant)) {
      p.fwd_suffix = LstmParams::init(cfg.d, cfg.e, rng);
    }
    p.bwd_prefix = LstmParams::init(cfg.d, cfg.e, rng);
    if (uses_suffix(cfg.variant) && !is_tied(cfg.variant)) {
      p.bwd_suffix = LstmParams::init(cfg.d, cfg.e, rng);
    }
    return p;
  }
};

inline void validate_tying(const EncoderConfig& cfg, const EncoderParams& p) {
  bool want_separate = uses_suffix(cfg.variant) && !is_tied(cfg.variant);
  if (want_separate && (!p.fwd_suffix || !p.bwd_suffix)) {
    throw ShapeError(std::string("encoder params for ") + variant_name(cfg.variant) +
                     ": separate suffix weights required but missing");
  }
  if (!want_separate && (p.fwd_suffix || p.bwd_suffix)) {
    throw ShapeError(std::string("encoder params for ") + variant_name(cfg.variant) +
                     ": unexpected separate suffix weights");
  }
  p.fwd_prefix.validate(cfg.d, cfg.e);
  p.bwd_prefix.validate(cfg.d, cfg.e);
  if (p.fwd_suffix) p.fwd_suffix->validate(cfg.d, cfg.e);
  if (p.bwd_suffix) p.bwd_suffix->validate(cfg.d, cfg.e);
}

struct EncoderNodes {
  LstmNodes fwd_prefix, fwd_suffix, bwd_prefix, bwd_suffix;
};

inline EncoderNodes bind_encoder(ValueGraph& g, const EncoderConfig& cfg, const EncoderParams& p,
                                 bool as_param = true) {
  validate_tying(cfg, p);
  EncoderNodes n;
  n.fwd_prefix = bind_lstm(g, p.fwd_prefix, as_param);
  n.fwd_suffix = p.fwd_suffix ? bind_lstm(g, *p.fwd_suffix, as_param) : n.fwd_prefix;
  n.bwd_prefix = bind_lstm(g, p.bwd_prefix, as_param);
  n.bwd_suffix = p.bwd_suffix ? bind_lstm(g, *p.bwd_suffix, as_param) : n.bwd_prefix;
  return n;
}

// Sentence encoding u (or v). Pools the four state sequences over masked
// positions and combines them per variant:
//   SufiSent, SufiSent-Tied:  [max(hp, hs); max(bhp, bhs)]   (length 2d)
//   SufiSent-Cat(-Tied):      [hp; hs; bhp; bhs]             (length 4d)
//   BiLSTM-Max:               [hp; bhp]                      (length 2d)
inline Value encode(ValueGraph& g, const EncoderConfig& cfg, const EncoderNodes& nodes, Value emb,
                    const Mask& mask) {
  check_sequence(g.value(emb), mask, cfg.e, "encode");
  Value hp = g.time_max_pool(prefix_states(g, nodes.fwd_prefix, emb, mask), mask);

  if (cfg.variant == Variant::BiLstmMax) {
    Value rev = g.reverse_rows(emb);
    Mask rev_mask(mask.rbegin(), mask.rend());
    Value bwd = g.reverse_rows(prefix_states(g, nodes.bwd_prefix, rev, rev_mask));
    Value bhp = g.time_max_pool(bwd, mask);
    return g.concat({hp, bhp});
  }

  Value hs = g.time_max_pool(suffix_states(g, nodes.fwd_suffix, emb, mask), mask);
  BackwardStates bwd = backward_direction_states(g, nodes.bwd_prefix, nodes.bwd_suffix, emb, mask);
  Value bhp = g.time_max_pool(bwd.prefix, mask);
  Value bhs = g.time_max_pool(bwd.suffix, mask);

  if (is_cat(cfg.variant)) return g.concat({hp, hs, bhp, bhs});
  return g.concat({g.max(hp, hs), g.max(bhp, bhs)});
}

// Raw-array convenience: encode one embedded sentence outside any training
// graph.
inline NumArray encode_sentence(const EncoderConfig& cfg, const EncoderParams& p,
                                const NumArray& emb, const Mask& mask) {
  ValueGraph g;
  EncoderNodes nodes = bind_encoder(g, cfg, p, /*as_param=*/false);
  return g.value(encode(g, cfg, nodes, g.constant(emb), mask));
}

inline NumArray encode_sentence(const EncoderConfig& cfg, const EncoderParams& p,
                                const NumArray& emb) {
  return encode_sentence(cfg, p, emb, full_mask(emb.rows()));
}

}  // namespace sufisent
