#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fastqa/tensor.hpp"

namespace fastqa::ad {

using fastqa::Shape;
using fastqa::Span;
using fastqa::TensorT;

enum class OpKind : uint8_t {
  kLeaf,
  kConstant,
  kMatmul,
  kLinear,
  kTranspose,
  kAdd,
  kMul,
  kAffine,
  kConcat,
  kSlice,
  kReshape,
  kTanh,
  kSigmoid,
  kRelu,
  kExp,
  kLog,
  kSoftmax,
  kLogSumExp,
  kSum,
  kMean,
  kMaxOverTime,
  kEmbeddingLookup,
  kConv1dSame,
  kDropout,
  kLstmSeq,
  kTileRows,
  kGather,
  kSpanFeatures,
  kWindowMeans,
};

const char* op_name(OpKind kind);

// Handle into a graph's node list.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
struct NodeT;

// Append-only reverse-mode tape over dense tensors. Ops evaluate eagerly on
// append; backward() walks the tape in reverse. Every input id of a node is
// smaller than the node's own id, so append order is a topological order.
//
// Shape conventions are row-major throughout:
//   matmul   (m,k)x(k,n)->(m,n), (m,k)x(k,)->(m,)
//   linear   x:(m,k), w:(n,k), bias:(n,) -> x w^T + bias : (m,n)
//   lstm_seq x:(L,in), wx:(in,4h), wh:(h,4h), bias:(4h,) -> (L,h)
//
// One graph instance is single-threaded; distinct instances are independent.
template <typename T>
class GraphT {
 public:
  GraphT();
  ~GraphT();
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;

  // Trainable leaf bound to external storage, which must outlive the graph.
  // backward() accumulates into tensor.grad; callers zero_grad between steps,
  // repeated backward without a reset keeps accumulating.
  Var param(TensorT<T>& tensor);
  Var constant(TensorT<T> value);
  Var scalar_constant(T value);

  Var matmul(Var a, Var b);
  Var linear(Var x, Var w, Var bias = {});
  Var transpose(Var a);
  // Elementwise add; b.shape may be a trailing suffix of a.shape, broadcast
  // over the leading dims.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  // alpha * x + beta, elementwise with scalar coefficients.
  Var affine(Var x, T alpha, T beta);
  Var scale(Var x, T alpha) { return affine(x, alpha, T(0)); }
  Var one_minus(Var x) { return affine(x, T(-1), T(1)); }
  Var sub(Var a, Var b) { return add(a, scale(b, T(-1))); }

  Var concat(const std::vector<Var>& parts, int axis);
  // Half-open [start, stop) along axis.
  Var slice(Var a, int axis, int64_t start, int64_t stop);
  Var reshape(Var a, Shape shape);
  Var row(Var matrix, int64_t r);  // (m,n) -> (n,)

  Var tanh(Var x);
  Var sigmoid(Var x);
  Var relu(Var x);
  Var exp(Var x);
  Var log(Var x);

  // Shift-invariant softmax (row max subtracted). additive_mask, when given,
  // has x's shape and is added to the logits first; -1e30 entries end up with
  // exactly zero probability. A fully-masked row is an error.
  Var softmax(Var x, int axis, Var additive_mask = {});
  // 1-D x -> scalar log(sum(exp(x))), max-stabilized.
  Var logsumexp(Var x);

  // axis = -1 reduces everything to a scalar. mask, when given, is a 0/1
  // tensor of x's shape; masked-out entries contribute nothing (for mean the
  // divisor is the mask count; an all-zero mask yields 0).
  Var sum(Var x, int axis = -1, Var mask = {});
  Var mean(Var x, int axis = -1, Var mask = {});

  // (L,C) -> (C,) column max; gradient routes to the first argmax row.
  Var max_over_time(Var x);

  Var embedding_lookup(Var table, std::vector<int64_t> ids);

  // Width-5 same-padded 1-D convolution: x:(L,cin), kernel:(cin,cout,5),
  // bias:(cout,) -> (L,cout).
  Var conv1d_same(Var x, Var kernel, Var bias);

  // Multiplication by an externally supplied, pre-scaled mask (the trainer
  // owns the "same mask for all words" semantics).
  Var dropout(Var x, TensorT<T> mask);

  // Unidirectional LSTM over the first `length` rows (length < 0 means all).
  // Rows at and past `length` come out zero, in both directions, so padding
  // never leaks into real positions. reverse scans from length-1 down to 0.
  Var lstm_seq(Var x, Var wx, Var wh, Var bias, int64_t hidden, bool reverse,
               int64_t length = -1);

  Var tile_rows(Var v, int64_t rows);  // (n,) -> (rows,n)
  Var gather(Var x, std::vector<int64_t> indices);  // (N,) -> (k,)
  Var pick(Var x, int64_t index) { return gather(x, {index}); }

  // Per-span embedding summary used by span scoring: for each span the row of
  // the output is [first; last; within-mean; left5-mean; right5-mean], each a
  // d-vector (empty windows contribute zeros). emb:(L,d) -> (S,5d).
  Var span_features(Var emb, std::vector<Span> spans);

  // Border-truncated window means of a per-position feature: for each span
  // the output row holds the means over the {5,10,20}-token windows left of
  // the span and right of it, in that order (empty window -> 0).
  // values:(L,) -> (S,6).
  Var window_means(Var values, std::vector<Span> spans);

  const TensorT<T>& value(Var v) const;
  const std::vector<T>& grad_of(Var v) const;  // valid after backward()

  // Reverse sweep from a scalar loss. Node grads are reset per call; leaf
  // grads accumulate into the bound tensors.
  void backward(Var loss);

  size_t size() const;

  // When set, every op output is scanned for NaN/Inf (on by default for the
  // double instantiation used by gradient checking). Domain errors in
  // exp/log/softmax are raised regardless.
  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }

 private:
  Var emit(NodeT<T> node);
  NodeT<T>& node(Var v);
  const NodeT<T>& node(Var v) const;

  std::vector<NodeT<T>> nodes_;
  bool check_finite_;
};

using Graph32 = GraphT<float>;
using Graph64 = GraphT<double>;

}  // namespace fastqa::ad
