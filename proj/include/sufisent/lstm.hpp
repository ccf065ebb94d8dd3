#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sufisent/graph.hpp"
#include "sufisent/numarray.hpp"
#include "sufisent/rng.hpp"

namespace sufisent {

// Weights of one LSTM, gate order i, f, g, o along the first axis.
struct LstmParams {
  NumArray wx;  // (4d x e)
  NumArray wh;  // (4d x d)
  NumArray b;   // (4d)

  std::size_t hidden_dim() const { return wh.cols(); }
  std::size_t input_dim() const { return wx.cols(); }

  // Weights uniform on (-1/sqrt(d), +1/sqrt(d)), biases zero.
  static LstmParams init(std::size_t d, std::size_t e, Rng& rng) {
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    LstmParams p;
    p.wx = random_uniform({4 * d, e}, -s, s, rng);
    p.wh = random_uniform({4 * d, d}, -s, s, rng);
    p.b = NumArray({4 * d});
    return p;
  }

  void validate(std::size_t d, std::size_t e) const {
    if (wx.shape != Shape{4 * d, e} || wh.shape != Shape{4 * d, d} || b.shape != Shape{4 * d}) {
      throw ShapeError("LstmParams: shapes wx" + shape_str(wx.shape) + " wh" +
                       shape_str(wh.shape) + " b" + shape_str(b.shape) +
                       " inconsistent with d=" + std::to_string(d) +
                       " e=" + std::to_string(e));
    }
  }
};

// Graph handles for one LSTM's weights. Tied encoders reuse one LstmNodes for
// two roles, so gradient contributions accumulate in a single storage.
struct LstmNodes {
  Value wx, wh, b;
  std::size_t d = 0, e = 0;
};

inline LstmNodes bind_lstm(ValueGraph& g, const LstmParams& p, bool as_param = true) {
  LstmNodes n;
  n.d = p.hidden_dim();
  n.e = p.input_dim();
  n.wx = as_param ? g.param(p.wx) : g.constant(p.wx);
  n.wh = as_param ? g.param(p.wh) : g.constant(p.wh);
  n.b = as_param ? g.param(p.b) : g.constant(p.b);
  return n;
}

// Counts single-sequence cell evaluations; lets tests pin down the pass
// structure (n steps for a prefix sweep, n(n+1)/2 for the naive suffix sweep).
struct CellCounter {
  std::uint64_t steps = 0;
};

struct CellState {
  Value h, c;
};

// One step of the cell on vector state:
//   pre = Wh h_prev + (Wx x + b)
//   i, f, o = sigmoid, g = tanh of the four pre slices
//   c = f (.) c_prev + i (.) g ;  h = o (.) tanh(c)
// The association (Wh h) + ((Wx x) + b) is fixed; suffix_states emits the
// identical association on batched rows, which makes the two paths agree
// bit for bit.
inline CellState lstm_step(ValueGraph& g, const LstmNodes& p, Value x, CellState prev,
                           CellCounter* counter = nullptr) {
  std::size_t d = p.d;
  Value u = g.add(g.matmul(p.wx, x), p.b);
  Value pre = g.add(g.matmul(p.wh, prev.h), u);
  Value gi = g.sigmoid(g.slice(pre, 0, d));
  Value gf = g.sigmoid(g.slice(pre, d, 2 * d));
  Value gg = g.tanh(g.slice(pre, 2 * d, 3 * d));
  Value go = g.sigmoid(g.slice(pre, 3 * d, 4 * d));
  Value c = g.add(g.mul(gf, prev.c), g.mul(gi, gg));
  Value h = g.mul(go, g.tanh(c));
  if (counter) counter->steps += 1;
  return {h, c};
}

// Raw-array convenience: one cell step outside any training graph.
inline std::pair<NumArray, NumArray> lstm_step(const LstmParams& p, const NumArray& x,
                                               const NumArray& h_prev, const NumArray& c_prev) {
  if (x.shape != Shape{p.input_dim()} || h_prev.shape != Shape{p.hidden_dim()} ||
      c_prev.shape != Shape{p.hidden_dim()}) {
    throw ShapeError("lstm_step: x" + shape_str(x.shape) + " h" + shape_str(h_prev.shape) +
                     " c" + shape_str(c_prev.shape) + " vs d=" + std::to_string(p.hidden_dim()) +
                     " e=" + std::to_string(p.input_dim()));
  }
  ValueGraph g;
  LstmNodes nodes = bind_lstm(g, p, /*as_param=*/false);
  CellState s{g.constant(h_prev), g.constant(c_prev)};
  CellState out = lstm_step(g, nodes, g.constant(x), s);
  return {g.value(out.h), g.value(out.c)};
}

inline Mask full_mask(std::size_t n) { return Mask(n, true); }

inline void check_sequence(const NumArray& emb, const Mask& mask, std::size_t e,
                           const char* who) {
  if (!emb.is_matrix() || emb.cols() != e) {
    throw ShapeError(std::string(who) + ": embedded sentence " + shape_str(emb.shape) +
                     " vs input dim " + std::to_string(e));
  }
  if (emb.rows() == 0) throw ShapeError(std::string(who) + ": empty sentence");
  if (mask.size() != emb.rows()) {
    throw ShapeError(std::string(who) + ": mask length " + std::to_string(mask.size()) +
                     " vs " + std::to_string(emb.rows()) + " rows");
  }
}

// Prefix states: one left-to-right pass from zero state; row i holds the
// state after consuming tokens 1..i+1. Masked positions are skipped, so
// padding never reaches the cell; their rows repeat the previous state and
// are expected to be excluded from pooling.
inline Value prefix_states(ValueGraph& g, const LstmNodes& p, Value emb, const Mask& mask,
                           CellCounter* counter = nullptr) {
  check_sequence(g.value(emb), mask, p.e, "prefix_states");
  std::size_t n = g.value(emb).rows();
  CellState s{g.zeros({p.d}), g.zeros({p.d})};
  std::vector<Value> rows;
  rows.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (mask[t]) s = lstm_step(g, p, g.row(emb, t), s, counter);
    rows.push_back(s.h);
  }
  return g.stack_rows(rows);
}

inline Value prefix_states(ValueGraph& g, const LstmNodes& p, Value emb,
                           CellCounter* counter = nullptr) {
  return prefix_states(g, p, emb, full_mask(g.value(emb).rows()), counter);
}

// Suffix states, reference path: row i is the final state of a fresh
// left-to-right pass over tokens i+1..n. Costs n(n+1)/2 cell steps.
inline Value suffix_states_naive(ValueGraph& g, const LstmNodes& p, Value emb, const Mask& mask,
                                 CellCounter* counter = nullptr) {
  check_sequence(g.value(emb), mask, p.e, "suffix_states");
  std::size_t n = g.value(emb).rows();
  std::vector<Value> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CellState s{g.zeros({p.d}), g.zeros({p.d})};
    for (std::size_t t = i; t < n; ++t) {
      if (mask[t]) s = lstm_step(g, p, g.row(emb, t), s, counter);
    }
    rows.push_back(s.h);
  }
  return g.stack_rows(rows);
}

inline Value suffix_states_naive(ValueGraph& g, const LstmNodes& p, Value emb,
                                 CellCounter* counter = nullptr) {
  return suffix_states_naive(g, p, emb, full_mask(g.value(emb).rows()), counter);
}

// Suffix states, batched path: all n suffixes run as one padded batch in a
// single left-to-right sweep. Suffix i sits in row i and becomes active at
// step i; a 0/1 freeze mask keeps inactive rows at their previous (zero)
// state, so every row finishes step n-1 holding exactly the state the naive
// per-suffix pass would produce.
inline Value suffix_states(ValueGraph& g, const LstmNodes& p, Value emb, const Mask& mask) {
  check_sequence(g.value(emb), mask, p.e, "suffix_states");
  std::size_t n = g.value(emb).rows();
  std::size_t d = p.d;
  Value wh_t = g.transpose(p.wh);
  Value h = g.zeros({n, d});
  Value c = g.zeros({n, d});
  for (std::size_t t = 0; t < n; ++t) {
    if (!mask[t]) continue;
    Value u = g.add(g.matmul(p.wx, g.row(emb, t)), p.b);
    Value pre = g.add_row_vector(g.matmul(h, wh_t), u);
    Value gi = g.sigmoid(g.slice_cols(pre, 0, d));
    Value gf = g.sigmoid(g.slice_cols(pre, d, 2 * d));
    Value gg = g.tanh(g.slice_cols(pre, 2 * d, 3 * d));
    Value go = g.sigmoid(g.slice_cols(pre, 3 * d, 4 * d));
    Value c_new = g.add(g.mul(gf, c), g.mul(gi, gg));
    Value h_new = g.mul(go, g.tanh(c_new));
    // rows 0..t are live at step t
    NumArray live({n, d});
    for (std::size_t i = 0; i <= t; ++i) {
      for (std::size_t j = 0; j < d; ++j) live.at(i, j) = 1.0;
    }
    NumArray frozen({n, d});
    for (std::size_t i = t + 1; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) frozen.at(i, j) = 1.0;
    }
    Value m_live = g.constant(std::move(live));
    Value m_frozen = g.constant(std::move(frozen));
    c = g.add(g.mul(c_new, m_live), g.mul(c, m_frozen));
    h = g.add(g.mul(h_new, m_live), g.mul(h, m_frozen));
  }
  return h;
}

inline Value suffix_states(ValueGraph& g, const LstmNodes& p, Value emb) {
  return suffix_states(g, p, emb, full_mask(g.value(emb).rows()));
}

// Backward-direction states over the row-reversed sentence, re-indexed so
// that prefix row i consumes tokens n..i+1 and suffix row i consumes tokens
// i+1..1.
struct BackwardStates {
  Value prefix;
  Value suffix;
};

inline BackwardStates backward_direction_states(ValueGraph& g, const LstmNodes& prefix_params,
                                                const LstmNodes& suffix_params, Value emb,
                                                const Mask& mask) {
  check_sequence(g.value(emb), mask, prefix_params.e, "backward_direction_states");
  Value rev = g.reverse_rows(emb);
  Mask rev_mask(mask.rbegin(), mask.rend());
  Value p = prefix_states(g, prefix_params, rev, rev_mask);
  Value s = suffix_states(g, suffix_params, rev, rev_mask);
  return {g.reverse_rows(p), g.reverse_rows(s)};
}

// ---- raw-array wrappers (build a throwaway graph) ----

inline NumArray prefix_states(const LstmParams& p, const NumArray& emb, const Mask& mask,
                              CellCounter* counter = nullptr) {
  ValueGraph g;
  LstmNodes nodes = bind_lstm(g, p, false);
  return g.value(prefix_states(g, nodes, g.constant(emb), mask, counter));
}

inline NumArray prefix_states(const LstmParams& p, const NumArray& emb,
                              CellCounter* counter = nullptr) {
  return prefix_states(p, emb, full_mask(emb.rows()), counter);
}

inline NumArray suffix_states(const LstmParams& p, const NumArray& emb, const Mask& mask) {
  ValueGraph g;
  LstmNodes nodes = bind_lstm(g, p, false);
  return g.value(suffix_states(g, nodes, g.constant(emb), mask));
}

inline NumArray suffix_states(const LstmParams& p, const NumArray& emb) {
  return suffix_states(p, emb, full_mask(emb.rows()));
}

inline NumArray suffix_states_naive(const LstmParams& p, const NumArray& emb,
                                    CellCounter* counter = nullptr) {
  ValueGraph g;
  LstmNodes nodes = bind_lstm(g, p, false);
  return g.value(suffix_states_naive(g, nodes, g.constant(emb), full_mask(emb.rows()), counter));
}

inline std::pair<NumArray, NumArray> backward_direction_states(const LstmParams& prefix_params,
                                                               const LstmParams& suffix_params,
                                                               const NumArray& emb,
                                                               const Mask& mask) {
  ValueGraph g;
  LstmNodes pn = bind_lstm(g, prefix_params, false);
  LstmNodes sn = bind_lstm(g, suffix_params, false);
  BackwardStates out = backward_direction_states(g, pn, sn, g.constant(emb), mask);
  return {g.value(out.prefix), g.value(out.suffix)};
}

inline std::pair<NumArray, NumArray> backward_direction_states(const LstmParams& prefix_params,
                                                               const LstmParams& suffix_params,
                                                               const NumArray& emb) {
  return backward_direction_states(prefix_params, suffix_params, emb, full_mask(emb.rows()));
}

}  // namespace sufisent
