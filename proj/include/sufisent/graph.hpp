#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sufisent/numarray.hpp"

namespace sufisent {

using Mask = std::vector<bool>;

// softmax with max-subtraction; shared by the graph op and by evaluation code.
inline NumArray softmax(const NumArray& logits) {
  NumArray p(logits.shape);
  double m = logits[0];
  for (double v : logits.data) m = std::max(m, v);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p.data) v /= z;
  return p;
}

// Handle to a node in a ValueGraph. Only meaningful together with the graph
// that produced it.
struct Value {
  std::uint32_t id = 0;
};

// Append-only record of differentiable operations. Construction of an op
// computes its forward value eagerly; backward() fills one gradient slot per
// node, matching the node's value shape. Nodes are stored in construction
// order, which is a topological order by construction, so the backward sweep
// is a single reverse pass.
//
// Single-writer: a graph must not be mutated from two threads.
class ValueGraph {
 public:
  // ---- leaves ----

  Value constant(NumArray v) { return push(Node{Op::Leaf, std::move(v)}); }

  Value param(NumArray v) {
    Value out = push(Node{Op::Leaf, std::move(v)});
    nodes_[out.id].is_param = true;
    return out;
  }

  Value zeros(Shape shape) { return constant(NumArray(std::move(shape))); }

  // ---- ops ----

  // (m x k)(k x n) -> (m x n); also matrix*vector -> vector and
  // vector*matrix -> vector.
  Value matmul(Value a, Value b) {
    const NumArray& va = val(a);
    const NumArray& vb = val(b);
    NumArray out;
    if (va.is_matrix() && vb.is_matrix()) {
      if (va.cols() != vb.rows()) throw mismatch("matmul", va, vb);
      out = NumArray({va.rows(), vb.cols()});
      matmul_accum(va.data.data(), vb.data.data(), out.data.data(), va.rows(), va.cols(),
                   vb.cols());
    } else if (va.is_matrix() && vb.is_vector()) {
      if (va.cols() != vb.numel()) throw mismatch("matmul", va, vb);
      out = NumArray({va.rows()});
      matmul_accum(va.data.data(), vb.data.data(), out.data.data(), va.rows(), va.cols(), 1);
    } else if (va.is_vector() && vb.is_matrix()) {
      if (va.numel() != vb.rows()) throw mismatch("matmul", va, vb);
      out = NumArray({vb.cols()});
      matmul_accum(va.data.data(), vb.data.data(), out.data.data(), 1, vb.rows(), vb.cols());
    } else {
      throw mismatch("matmul", va, vb);
    }
    Node n{Op::MatMul, std::move(out)};
    n.a = a.id;
    n.b = b.id;
    return push(std::move(n));
  }

  Value sigmoid(Value x) { return unary(Op::Sigmoid, x); }
  Value tanh(Value x) { return unary(Op::Tanh, x); }
  Value abs(Value x) { return unary(Op::Abs, x); }

  Value add(Value a, Value b) { return binary(Op::Add, a, b); }
  Value sub(Value a, Value b) { return binary(Op::Sub, a, b); }
  Value mul(Value a, Value b) { return binary(Op::Mul, a, b); }

  // Elementwise max. Gradient goes to the strictly larger operand and is
  // split 50/50 on exact ties.
  Value max(Value a, Value b) { return binary(Op::Max, a, b); }

  // Matrix (m x n) plus row vector (n), added to every row. The only
  // broadcasting the graph offers.
  Value add_row_vector(Value m, Value v) {
    const NumArray& vm = val(m);
    const NumArray& vv = val(v);
    if (!vm.is_matrix() || !vv.is_vector() || vm.cols() != vv.numel()) {
      throw mismatch("add_row_vector", vm, vv);
    }
    NumArray out = vm;
    for (std::size_t i = 0; i < vm.rows(); ++i) {
      for (std::size_t j = 0; j < vm.cols(); ++j) out.at(i, j) += vv[j];
    }
    Node n{Op::AddRowVec, std::move(out)};
    n.a = m.id;
    n.b = v.id;
    return push(std::move(n));
  }

  // x * c for a compile-time-known constant c (not differentiated w.r.t. c).
  Value scale(Value x, double c) {
    NumArray out = val(x);
    for (double& v : out.data) v *= c;
    Node n{Op::Scale, std::move(out)};
    n.a = x.id;
    n.c0 = c;
    return push(std::move(n));
  }

  // Concatenation of vectors, order preserved.
  Value concat(std::span<const Value> parts) {
    if (parts.empty()) throw ShapeError("concat: empty part list");
    std::size_t total = 0;
    for (Value p : parts) {
      if (!val(p).is_vector()) {
        throw ShapeError("concat: all parts must be vectors, got " + shape_str(val(p).shape));
      }
      total += val(p).numel();
    }
    NumArray out({total});
    std::size_t off = 0;
    for (Value p : parts) {
      const NumArray& vp = val(p);
      std::copy(vp.data.begin(), vp.data.end(), out.data.begin() + off);
      off += vp.numel();
    }
    Node n{Op::Concat, std::move(out)};
    for (Value p : parts) n.inputs.push_back(p.id);
    return push(std::move(n));
  }

  Value concat(std::initializer_list<Value> parts) {
    return concat(std::span<const Value>(parts.begin(), parts.size()));
  }

  // Stack equal-length vectors as the rows of a matrix. The same node may
  // appear several times; its gradient accumulates.
  Value stack_rows(std::span<const Value> rows) {
    if (rows.empty()) throw ShapeError("stack_rows: empty row list");
    std::size_t width = val(rows[0]).numel();
    for (Value r : rows) {
      if (!val(r).is_vector() || val(r).numel() != width) {
        throw ShapeError("stack_rows: row shape " + shape_str(val(r).shape) + " vs width " +
                         std::to_string(width));
      }
    }
    NumArray out({rows.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const NumArray& vr = val(rows[i]);
      std::copy(vr.data.begin(), vr.data.end(), out.data.begin() + i * width);
    }
    Node n{Op::StackRows, std::move(out)};
    for (Value r : rows) n.inputs.push_back(r.id);
    return push(std::move(n));
  }

  // Vector slice [begin, end).
  Value slice(Value x, std::size_t begin, std::size_t end) {
    const NumArray& vx = val(x);
    if (!vx.is_vector() || begin >= end || end > vx.numel()) {
      throw ShapeError("slice: [" + std::to_string(begin) + "," + std::to_string(end) +
                       ") of " + shape_str(vx.shape));
    }
    NumArray out({end - begin});
    std::copy(vx.data.begin() + begin, vx.data.begin() + end, out.data.begin());
    Node n{Op::SliceVec, std::move(out)};
    n.a = x.id;
    n.i0 = begin;
    return push(std::move(n));
  }

  // Matrix column slice [begin, end).
  Value slice_cols(Value x, std::size_t begin, std::size_t end) {
    const NumArray& vx = val(x);
    if (!vx.is_matrix() || begin >= end || end > vx.cols()) {
      throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                       ") of " + shape_str(vx.shape));
    }
    NumArray out({vx.rows(), end - begin});
    for (std::size_t i = 0; i < vx.rows(); ++i) {
      for (std::size_t j = begin; j < end; ++j) out.at(i, j - begin) = vx.at(i, j);
    }
    Node n{Op::SliceCols, std::move(out)};
    n.a = x.id;
    n.i0 = begin;
    return push(std::move(n));
  }

  // Row i of a matrix as a vector.
  Value row(Value x, std::size_t i) {
    const NumArray& vx = val(x);
    if (!vx.is_matrix() || i >= vx.rows()) {
      throw ShapeError("row: index " + std::to_string(i) + " of " + shape_str(vx.shape));
    }
    NumArray out({vx.cols()});
    std::copy(vx.data.begin() + i * vx.cols(), vx.data.begin() + (i + 1) * vx.cols(),
              out.data.begin());
    Node n{Op::Row, std::move(out)};
    n.a = x.id;
    n.i0 = i;
    return push(std::move(n));
  }

  // Gather rows of a matrix by index; gradient scatters back, accumulating
  // over repeated indices.
  Value gather_rows(Value x, std::vector<std::size_t> ids) {
    const NumArray& vx = val(x);
    if (!vx.is_matrix()) throw ShapeError("gather_rows: not a matrix " + shape_str(vx.shape));
    for (std::size_t id : ids) {
      if (id >= vx.rows()) {
        throw ShapeError("gather_rows: row " + std::to_string(id) + " out of " +
                         shape_str(vx.shape));
      }
    }
    NumArray out({ids.size(), vx.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::copy(vx.data.begin() + ids[i] * vx.cols(), vx.data.begin() + (ids[i] + 1) * vx.cols(),
                out.data.begin() + i * vx.cols());
    }
    Node n{Op::GatherRows, std::move(out)};
    n.a = x.id;
    n.idx = std::move(ids);
    return push(std::move(n));
  }

  Value reverse_rows(Value x) {
    const NumArray& vx = val(x);
    if (!vx.is_matrix()) throw ShapeError("reverse_rows: not a matrix " + shape_str(vx.shape));
    NumArray out({vx.rows(), vx.cols()});
    for (std::size_t i = 0; i < vx.rows(); ++i) {
      std::size_t src = vx.rows() - 1 - i;
      std::copy(vx.data.begin() + src * vx.cols(), vx.data.begin() + (src + 1) * vx.cols(),
                out.data.begin() + i * vx.cols());
    }
    Node n{Op::ReverseRows, std::move(out)};
    n.a = x.id;
    return push(std::move(n));
  }

  Value transpose(Value x) {
    const NumArray& vx = val(x);
    if (!vx.is_matrix()) throw ShapeError("transpose: not a matrix " + shape_str(vx.shape));
    NumArray out({vx.cols(), vx.rows()});
    for (std::size_t i = 0; i < vx.rows(); ++i) {
      for (std::size_t j = 0; j < vx.cols(); ++j) out.at(j, i) = vx.at(i, j);
    }
    Node n{Op::Transpose, std::move(out)};
    n.a = x.id;
    return push(std::move(n));
  }

  // Per-column max over the masked rows of an n x d matrix. Gradient flows to
  // the argmax row only; ties go to the lowest row index.
  Value time_max_pool(Value h, const Mask& mask) {
    const NumArray& vh = val(h);
    if (!vh.is_matrix()) throw ShapeError("time_max_pool: not a matrix " + shape_str(vh.shape));
    if (mask.size() != vh.rows()) {
      throw ShapeError("time_max_pool: mask length " + std::to_string(mask.size()) + " vs " +
                       shape_str(vh.shape));
    }
    bool any = false;
    for (bool m : mask) any = any || m;
    if (!any) throw ShapeError("time_max_pool: all-false mask");

    NumArray out({vh.cols()});
    std::vector<std::size_t> argmax(vh.cols(), 0);
    bool first = true;
    for (std::size_t i = 0; i < vh.rows(); ++i) {
      if (!mask[i]) continue;
      for (std::size_t j = 0; j < vh.cols(); ++j) {
        double v = vh.at(i, j);
        if (first || v > out[j]) {
          out[j] = v;
          argmax[j] = i;
        }
      }
      first = false;
    }
    Node n{Op::TimeMaxPool, std::move(out)};
    n.a = h.id;
    n.idx = std::move(argmax);
    return push(std::move(n));
  }

  // loss = -log softmax(logits)[label], max-subtracted for stability.
  Value softmax_cross_entropy(Value logits, int label) {
    const NumArray& vl = val(logits);
    if (!vl.is_vector()) {
      throw ShapeError("softmax_cross_entropy: logits shape " + shape_str(vl.shape));
    }
    if (label < 0 || static_cast<std::size_t>(label) >= vl.numel()) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(label) + " out of " +
                       std::to_string(vl.numel()) + " classes");
    }
    double m = vl[0];
    for (double v : vl.data) m = std::max(m, v);
    double z = 0.0;
    for (double v : vl.data) z += std::exp(v - m);
    double loss = std::log(z) - (vl[label] - m);
    Node n{Op::SoftmaxCE, NumArray::scalar(loss)};
    n.a = logits.id;
    n.i0 = label;
    return push(std::move(n));
  }

  // ---- access ----

  const NumArray& value(Value v) const { return val(v); }

  const NumArray& grad(Value v) const {
    if (!grads_valid_ || v.id > root_) {
      throw NumericError("grad: backward() has not covered this node");
    }
    return nodes_[v.id].grd;
  }

  std::size_t size() const { return nodes_.size(); }

  bool is_param(Value v) const { return nodes_[v.id].is_param; }

  // Reverse sweep from a scalar loss. Populates a gradient for every node up
  // to the loss; repeatable and deterministic.
  void backward(Value loss) {
    const NumArray& vl = val(loss);
    if (!vl.is_scalar()) {
      throw ShapeError("backward: loss must be scalar, got " + shape_str(vl.shape));
    }
    root_ = loss.id;
    for (std::size_t i = 0; i <= root_; ++i) {
      nodes_[i].grd = NumArray(nodes_[i].val.shape);
    }
    nodes_[root_].grd[0] = 1.0;
    for (std::size_t i = root_ + 1; i-- > 0;) {
      backprop(nodes_[i]);
    }
    grads_valid_ = true;
  }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Sigmoid,
    Tanh,
    Abs,
    Add,
    Sub,
    Mul,
    Max,
    AddRowVec,
    Scale,
    Concat,
    StackRows,
    SliceVec,
    SliceCols,
    Row,
    GatherRows,
    ReverseRows,
    Transpose,
    TimeMaxPool,
    SoftmaxCE,
  };

  struct Node {
    Op op;
    NumArray val;
    NumArray grd;
    std::uint32_t a = 0, b = 0;           // binary/unary inputs
    std::int64_t i0 = 0;                  // slice begin / row index / label
    double c0 = 0.0;                      // scale factor
    std::vector<std::uint32_t> inputs;    // n-ary inputs (concat, stack)
    std::vector<std::size_t> idx;         // gather ids / pooling argmax
    bool is_param = false;

    Node(Op o, NumArray v) : op(o), val(std::move(v)) {}
  };

  std::vector<Node> nodes_;
  std::size_t root_ = 0;
  bool grads_valid_ = false;

  const NumArray& val(Value v) const {
    if (v.id >= nodes_.size()) throw ShapeError("value id out of range");
    return nodes_[v.id].val;
  }

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  static ShapeError mismatch(const char* op, const NumArray& a, const NumArray& b) {
    return ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                      shape_str(b.shape) + " do not match");
  }

  // out += A(m x k) * B(k x n), all row-major. Accumulation over k is in
  // ascending order; the bit-exactness contracts of the encoder rely on it.
  static void matmul_accum(const double* a, const double* b, double* out, std::size_t m,
                           std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        double aik = a[i * k + kk];
        const double* brow = b + kk * n;
        double* orow = out + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
  }

  Value unary(Op op, Value x) {
    NumArray out = val(x);
    switch (op) {
      case Op::Sigmoid:
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        break;
      case Op::Tanh:
        for (double& v : out.data) v = std::tanh(v);
        break;
      case Op::Abs:
        for (double& v : out.data) v = std::abs(v);
        break;
      default:
        throw ShapeError("unary: bad op");
    }
    Node n{op, std::move(out)};
    n.a = x.id;
    return push(std::move(n));
  }

  Value binary(Op op, Value a, Value b) {
    const NumArray& va = val(a);
    const NumArray& vb = val(b);
    if (!va.same_shape(vb)) {
      const char* name = op == Op::Add   ? "add"
                         : op == Op::Sub ? "sub"
                         : op == Op::Mul ? "mul"
                                         : "max";
      throw mismatch(name, va, vb);
    }
    NumArray out(va.shape);
    switch (op) {
      case Op::Add:
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
        break;
      case Op::Sub:
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = va[i] - vb[i];
        break;
      case Op::Mul:
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = va[i] * vb[i];
        break;
      case Op::Max:
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(va[i], vb[i]);
        break;
      default:
        throw ShapeError("binary: bad op");
    }
    Node n{op, std::move(out)};
    n.a = a.id;
    n.b = b.id;
    return push(std::move(n));
  }

  void backprop(Node& n) {
    const NumArray& g = n.grd;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const NumArray& va = nodes_[n.a].val;
        const NumArray& vb = nodes_[n.b].val;
        NumArray& ga = nodes_[n.a].grd;
        NumArray& gb = nodes_[n.b].grd;
        std::size_t m, k, nn;
        if (va.is_matrix() && vb.is_matrix()) {
          m = va.rows(), k = va.cols(), nn = vb.cols();
        } else if (va.is_matrix()) {
          m = va.rows(), k = va.cols(), nn = 1;
        } else {
          m = 1, k = va.numel(), nn = vb.cols();
        }
        // dA += G * B^T ; dB += A^T * G
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            for (std::size_t j = 0; j < nn; ++j) acc += g[i * nn + j] * vb[kk * nn + j];
            ga[i * k + kk] += acc;
          }
        }
        for (std::size_t kk = 0; kk < k; ++kk) {
          for (std::size_t i = 0; i < m; ++i) {
            double aik = va[i * k + kk];
            for (std::size_t j = 0; j < nn; ++j) gb[kk * nn + j] += aik * g[i * nn + j];
          }
        }
        break;
      }
      case Op::Sigmoid: {
        NumArray& gx = nodes_[n.a].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          double y = n.val[i];
          gx[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::Tanh: {
        NumArray& gx = nodes_[n.a].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          double y = n.val[i];
          gx[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::Abs: {
        // subgradient 0 at 0
        const NumArray& vx = nodes_[n.a].val;
        NumArray& gx = nodes_[n.a].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          double s = vx[i] > 0.0 ? 1.0 : (vx[i] < 0.0 ? -1.0 : 0.0);
          gx[i] += g[i] * s;
        }
        break;
      }
      case Op::Add: {
        NumArray& ga = nodes_[n.a].grd;
        NumArray& gb = nodes_[n.b].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::Sub: {
        NumArray& ga = nodes_[n.a].grd;
        NumArray& gb = nodes_[n.b].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const NumArray& va = nodes_[n.a].val;
        const NumArray& vb = nodes_[n.b].val;
        NumArray& ga = nodes_[n.a].grd;
        NumArray& gb = nodes_[n.b].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::Max: {
        const NumArray& va = nodes_[n.a].val;
        const NumArray& vb = nodes_[n.b].val;
        NumArray& ga = nodes_[n.a].grd;
        NumArray& gb = nodes_[n.b].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (va[i] > vb[i]) {
            ga[i] += g[i];
          } else if (vb[i] > va[i]) {
            gb[i] += g[i];
          } else {
            ga[i] += 0.5 * g[i];
            gb[i] += 0.5 * g[i];
          }
        }
        break;
      }
      case Op::AddRowVec: {
        NumArray& gm = nodes_[n.a].grd;
        NumArray& gv = nodes_[n.b].grd;
        std::size_t rows = n.val.rows(), cols = n.val.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            gm[i * cols + j] += g[i * cols + j];
            gv[j] += g[i * cols + j];
          }
        }
        break;
      }
      case Op::Scale: {
        NumArray& gx = nodes_[n.a].grd;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * n.c0;
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (std::uint32_t in : n.inputs) {
          NumArray& gp = nodes_[in].grd;
          for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += g[off + i];
          off += gp.numel();
        }
        break;
      }
      case Op::StackRows: {
        std::size_t width = n.val.cols();
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          NumArray& gr = nodes_[n.inputs[i]].grd;
          for (std::size_t j = 0; j < width; ++j) gr[j] += g[i * width + j];
        }
        break;
      }
      case Op::SliceVec: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t begin = static_cast<std::size_t>(n.i0);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[begin + i] += g[i];
        break;
      }
      case Op::SliceCols: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t begin = static_cast<std::size_t>(n.i0);
        std::size_t cols = nodes_[n.a].val.cols();
        std::size_t out_cols = n.val.cols();
        for (std::size_t i = 0; i < n.val.rows(); ++i) {
          for (std::size_t j = 0; j < out_cols; ++j) {
            gx[i * cols + begin + j] += g[i * out_cols + j];
          }
        }
        break;
      }
      case Op::Row: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t cols = nodes_[n.a].val.cols();
        std::size_t i = static_cast<std::size_t>(n.i0);
        for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += g[j];
        break;
      }
      case Op::GatherRows: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t cols = nodes_[n.a].val.cols();
        for (std::size_t p = 0; p < n.idx.size(); ++p) {
          for (std::size_t j = 0; j < cols; ++j) gx[n.idx[p] * cols + j] += g[p * cols + j];
        }
        break;
      }
      case Op::ReverseRows: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t rows = n.val.rows(), cols = n.val.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          std::size_t src = rows - 1 - i;
          for (std::size_t j = 0; j < cols; ++j) gx[src * cols + j] += g[i * cols + j];
        }
        break;
      }
      case Op::Transpose: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t rows = n.val.rows(), cols = n.val.cols();  // transposed dims
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) gx[j * rows + i] += g[i * cols + j];
        }
        break;
      }
      case Op::TimeMaxPool: {
        NumArray& gx = nodes_[n.a].grd;
        std::size_t cols = n.val.numel();
        for (std::size_t j = 0; j < cols; ++j) gx[n.idx[j] * cols + j] += g[j];
        break;
      }
      case Op::SoftmaxCE: {
        NumArray p = softmax(nodes_[n.a].val);
        NumArray& gl = nodes_[n.a].grd;
        std::size_t label = static_cast<std::size_t>(n.i0);
        for (std::size_t i = 0; i < p.numel(); ++i) {
          gl[i] += g[0] * (p[i] - (i == label ? 1.0 : 0.0));
        }
        break;
      }
    }
  }
};

}  // namespace sufisent
