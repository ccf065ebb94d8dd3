#pragma once

#include <cmath>
#include <string>

#include "sufisent/graph.hpp"
#include "sufisent/numarray.hpp"
#include "sufisent/rng.hpp"

namespace sufisent {

// Label coding is fixed project-wide; checkpoints depend on it.
enum class NliLabel : int {
  Entailment = 0,
  Neutral = 1,
  Contradiction = 2,
};

constexpr int kNumLabels = 3;

inline NliLabel label_from_int(int v) {
  if (v < 0 || v >= kNumLabels) {
    throw DataError("label " + std::to_string(v) + " out of range 0..2");
  }
  return static_cast<NliLabel>(v);
}

inline const char* label_name(NliLabel l) {
  switch (l) {
    case NliLabel::Entailment: return "entailment";
    case NliLabel::Neutral: return "neutral";
    case NliLabel::Contradiction: return "contradiction";
  }
  return "?";
}

enum class HeadActivation {
  Tanh,
  None,
};

inline const char* activation_name(HeadActivation a) {
  return a == HeadActivation::Tanh ? "tanh" : "none";
}

inline HeadActivation parse_activation(const std::string& s) {
  if (s == "tanh") return HeadActivation::Tanh;
  if (s == "none") return HeadActivation::None;
  throw DataError("unknown head activation '" + s + "' (expected tanh or none)");
}

// Two fully connected layers over the pair features, then a 3-way output
// layer. Weights are stored (in x out).
struct HeadParams {
  NumArray w1, b1;
  NumArray w2, b2;
  NumArray w_out, b_out;
  HeadActivation activation = HeadActivation::Tanh;

  std::size_t feature_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }

  static HeadParams init(std::size_t enc_dim, std::size_t hidden, HeadActivation act, Rng& rng) {
    std::size_t in = 4 * enc_dim;
    HeadParams p;
    double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.w1 = random_uniform({in, hidden}, -s1, s1, rng);
    p.b1 = NumArray({hidden});
    p.w2 = random_uniform({hidden, hidden}, -s2, s2, rng);
    p.b2 = NumArray({hidden});
    p.w_out = random_uniform({hidden, static_cast<std::size_t>(kNumLabels)}, -s2, s2, rng);
    p.b_out = NumArray({static_cast<std::size_t>(kNumLabels)});
    p.activation = act;
    return p;
  }

  void validate(std::size_t enc_dim) const {
    std::size_t in = 4 * enc_dim;
    std::size_t hidden = hidden_dim();
    std::size_t out = static_cast<std::size_t>(kNumLabels);
    if (w1.shape != Shape{in, hidden} || b1.shape != Shape{hidden} ||
        w2.shape != Shape{hidden, hidden} || b2.shape != Shape{hidden} ||
        w_out.shape != Shape{hidden, out} || b_out.shape != Shape{out}) {
      throw ShapeError("HeadParams: inconsistent shapes for encoding dim " +
                       std::to_string(enc_dim));
    }
  }
};

// [u; v; |u-v|; u(.)v]
inline Value build_features(ValueGraph& g, Value u, Value v) {
  const NumArray& vu = g.value(u);
  const NumArray& vv = g.value(v);
  if (!vu.is_vector() || !vv.is_vector() || vu.numel() != vv.numel()) {
    throw ShapeError("build_features: encodings " + shape_str(vu.shape) + " and " +
                     shape_str(vv.shape) + " must be equal-length vectors");
  }
  return g.concat({u, v, g.abs(g.sub(u, v)), g.mul(u, v)});
}

struct HeadNodes {
  Value w1, b1, w2, b2, w_out, b_out;
  HeadActivation activation = HeadActivation::Tanh;
};

inline HeadNodes bind_head(ValueGraph& g, const HeadParams& p, bool as_param = true) {
  HeadNodes n;
  n.w1 = as_param ? g.param(p.w1) : g.constant(p.w1);
  n.b1 = as_param ? g.param(p.b1) : g.constant(p.b1);
  n.w2 = as_param ? g.param(p.w2) : g.constant(p.w2);
  n.b2 = as_param ? g.param(p.b2) : g.constant(p.b2);
  n.w_out = as_param ? g.param(p.w_out) : g.constant(p.w_out);
  n.b_out = as_param ? g.param(p.b_out) : g.constant(p.b_out);
  n.activation = p.activation;
  return n;
}

inline Value head_logits(ValueGraph& g, const HeadNodes& head, Value features) {
  auto act = [&](Value x) { return head.activation == HeadActivation::Tanh ? g.tanh(x) : x; };
  Value a1 = act(g.add(g.matmul(features, head.w1), head.b1));
  Value a2 = act(g.add(g.matmul(a1, head.w2), head.b2));
  return g.add(g.matmul(a2, head.w_out), head.b_out);
}

// argmax over the logits; ties break toward the lowest class index.
inline int predict(const NumArray& logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.numel(); ++i) {
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  }
  return best;
}

inline NliLabel predict_label(const NumArray& logits) { return label_from_int(predict(logits)); }

}  // namespace sufisent
