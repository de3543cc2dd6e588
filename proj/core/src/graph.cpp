#include "fastqa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace fastqa::ad {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kLinear: return "linear";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "elementwise_mul";
    case OpKind::kAffine: return "affine";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSumExp: return "logsumexp";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMaxOverTime: return "max_over_time";
    case OpKind::kEmbeddingLookup: return "embedding_lookup";
    case OpKind::kConv1dSame: return "conv1d";
    case OpKind::kDropout: return "dropout";
    case OpKind::kLstmSeq: return "lstm_seq";
    case OpKind::kTileRows: return "tile_rows";
    case OpKind::kGather: return "gather";
    case OpKind::kSpanFeatures: return "span_features";
    case OpKind::kWindowMeans: return "window_means";
  }
  return "?";
}

template <typename T>
struct NodeT {
  OpKind kind = OpKind::kConstant;
  std::vector<int32_t> inputs;
  TensorT<T> value;
  std::vector<T> grad;
  bool needs_grad = false;
  TensorT<T>* leaf = nullptr;

  // op-specific state
  int axis = 0;
  int64_t i0 = 0, i1 = 0;        // slice bounds / tile rows / lstm hidden,length
  bool flag = false;             // lstm reverse
  T alpha{}, beta{};             // affine coefficients
  std::vector<int64_t> indices;  // lookup ids / gather indices / argmax cache
  std::vector<T> cache;          // lstm gate cache, dropout mask
  std::vector<Span> spans;       // span_features / window_means
};

namespace {

template <typename T>
[[noreturn]] void op_error(OpKind kind, const std::string& msg) {
  throw Error(std::string(op_name(kind)) + ": " + msg);
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v) {
    if (!std::isfinite(static_cast<double>(x))) return false;
  }
  return true;
}

// y += a @ b with a:(m,k), b:(k,n), y:(m,n); accumulate variant used by
// several backward kernels.
template <typename T>
void gemm_acc(const T* a, const T* b, T* y, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* yrow = y + i * n;
    for (int64_t t = 0; t < k; ++t) {
      T av = arow[t];
      if (av == T(0)) continue;
      const T* brow = b + t * n;
      for (int64_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  }
}

// y += a @ b^T with a:(m,k), b:(n,k), y:(m,n).
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* y, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* yrow = y + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = 0;
      for (int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      yrow[j] += acc;
    }
  }
}

// y += a^T @ b with a:(m,k), b:(m,n), y:(k,n).
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* y, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (int64_t t = 0; t < k; ++t) {
      T av = arow[t];
      if (av == T(0)) continue;
      T* yrow = y + t * n;
      for (int64_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  }
}

template <typename T>
T exp_guard(T x, OpKind kind) {
  constexpr double kMaxArg = std::is_same_v<T, float> ? 87.0 : 708.0;
  if (static_cast<double>(x) > kMaxArg) {
    op_error<T>(kind, "exp argument " + std::to_string(static_cast<double>(x)) +
                          " would overflow");
  }
  return std::exp(x);
}

struct LineIter {
  int64_t outer, len, inner;
};

// Decompose a shape into lines along `axis`: element t of line (o,i) lives at
// flat index (o*len + t)*inner + i.
inline LineIter lines_along(const Shape& shape, int axis) {
  LineIter it{1, 1, 1};
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i < axis) it.outer *= shape[i];
    else if (i == axis) it.len = shape[i];
    else it.inner *= shape[i];
  }
  return it;
}

}  // namespace

template <typename T>
GraphT<T>::GraphT() : check_finite_(std::is_same_v<T, double>) {
  nodes_.reserve(64);
}

template <typename T>
GraphT<T>::~GraphT() = default;

template <typename T>
NodeT<T>& GraphT<T>::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int32_t>(nodes_.size())) {
    throw Error("graph: invalid var id " + std::to_string(v.id));
  }
  return nodes_[static_cast<size_t>(v.id)];
}

template <typename T>
const NodeT<T>& GraphT<T>::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int32_t>(nodes_.size())) {
    throw Error("graph: invalid var id " + std::to_string(v.id));
  }
  return nodes_[static_cast<size_t>(v.id)];
}

template <typename T>
size_t GraphT<T>::size() const {
  return nodes_.size();
}

namespace {
template <typename T>
const TensorT<T>& node_value(const NodeT<T>& n) {
  return n.leaf ? *n.leaf : n.value;
}
}  // namespace

template <typename T>
const TensorT<T>& GraphT<T>::value(Var v) const {
  return node_value(node(v));
}

template <typename T>
const std::vector<T>& GraphT<T>::grad_of(Var v) const {
  const NodeT<T>& n = node(v);
  return n.leaf ? n.leaf->grad : n.grad;
}

template <typename T>
Var GraphT<T>::emit(NodeT<T> n) {
  for (int32_t in : n.inputs) {
    if (in < 0 || in >= static_cast<int32_t>(nodes_.size())) {
      throw Error("graph: op input id out of range");
    }
    if (nodes_[static_cast<size_t>(in)].needs_grad) n.needs_grad = true;
  }
  if (check_finite_ && n.kind != OpKind::kLeaf && !all_finite(n.value.data)) {
    op_error<T>(n.kind, "produced non-finite values at node " +
                            std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var GraphT<T>::param(TensorT<T>& tensor) {
  NodeT<T> n;
  n.kind = OpKind::kLeaf;
  n.leaf = &tensor;
  n.needs_grad = tensor.requires_grad;
  return emit(std::move(n));
}

template <typename T>
Var GraphT<T>::constant(TensorT<T> v) {
  NodeT<T> n;
  n.kind = OpKind::kConstant;
  n.value = std::move(v);
  n.value.requires_grad = false;
  return emit(std::move(n));
}

template <typename T>
Var GraphT<T>::scalar_constant(T v) {
  return constant(TensorT<T>({1}, {v}));
}

template <typename T>
Var GraphT<T>::matmul(Var a, Var b) {
  const auto& ta = value(a);
  const auto& tb = value(b);
  if (ta.rank() != 2 || (tb.rank() != 2 && tb.rank() != 1)) {
    op_error<T>(OpKind::kMatmul, "expects (m,k) x (k,n) or (m,k) x (k,), got " +
                                     shape_str(ta.shape) + " x " + shape_str(tb.shape));
  }
  int64_t m = ta.dim(0), k = ta.dim(1);
  int64_t n = tb.rank() == 2 ? tb.dim(1) : 1;
  int64_t bk = tb.dim(0);
  if (bk != k) {
    op_error<T>(OpKind::kMatmul, "inner dims differ: " + shape_str(ta.shape) + " x " +
                                     shape_str(tb.shape));
  }
  NodeT<T> n_;
  n_.kind = OpKind::kMatmul;
  n_.inputs = {a.id, b.id};
  n_.value = tb.rank() == 2 ? zeros<T>({m, n}) : zeros<T>({m});
  gemm_acc(ta.data.data(), tb.data.data(), n_.value.data.data(), m, k, n);
  return emit(std::move(n_));
}

template <typename T>
Var GraphT<T>::linear(Var x, Var w, Var bias) {
  const auto& tx = value(x);
  const auto& tw = value(w);
  bool vec = tx.rank() == 1;
  if ((tx.rank() != 2 && !vec) || tw.rank() != 2) {
    op_error<T>(OpKind::kLinear, "expects x (m,k) or (k,), w (n,k); got " +
                                     shape_str(tx.shape) + ", " + shape_str(tw.shape));
  }
  int64_t m = vec ? 1 : tx.dim(0);
  int64_t k = vec ? tx.dim(0) : tx.dim(1);
  int64_t n = tw.dim(0);
  if (tw.dim(1) != k) {
    op_error<T>(OpKind::kLinear, "x " + shape_str(tx.shape) + " vs w " + shape_str(tw.shape));
  }
  NodeT<T> node;
  node.kind = OpKind::kLinear;
  node.inputs = {x.id, w.id};
  node.value = vec ? zeros<T>({n}) : zeros<T>({m, n});
  gemm_nt_acc(tx.data.data(), tw.data.data(), node.value.data.data(), m, k, n);
  if (bias.valid()) {
    const auto& tbias = value(bias);
    if (tbias.rank() != 1 || tbias.dim(0) != n) {
      op_error<T>(OpKind::kLinear, "bias " + shape_str(tbias.shape) + " vs out dim " +
                                       std::to_string(n));
    }
    node.inputs.push_back(bias.id);
    for (int64_t i = 0; i < m; ++i) {
      T* yrow = node.value.data.data() + i * n;
      for (int64_t j = 0; j < n; ++j) yrow[j] += tbias.data[static_cast<size_t>(j)];
    }
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::transpose(Var a) {
  const auto& ta = value(a);
  if (ta.rank() != 2) op_error<T>(OpKind::kTranspose, "expects rank-2, got " + shape_str(ta.shape));
  int64_t m = ta.dim(0), n = ta.dim(1);
  NodeT<T> node;
  node.kind = OpKind::kTranspose;
  node.inputs = {a.id};
  node.value = zeros<T>({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      node.value.data[static_cast<size_t>(j * m + i)] = ta.data[static_cast<size_t>(i * n + j)];
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::add(Var a, Var b) {
  const auto& ta = value(a);
  const auto& tb = value(b);
  int64_t na = ta.numel(), nb = tb.numel();
  bool suffix = tb.rank() <= ta.rank();
  if (suffix) {
    for (int i = 0; i < tb.rank(); ++i) {
      if (tb.shape[static_cast<size_t>(i)] !=
          ta.shape[ta.shape.size() - tb.shape.size() + static_cast<size_t>(i)]) {
        suffix = false;
        break;
      }
    }
  }
  if (!suffix) {
    op_error<T>(OpKind::kAdd, "rhs shape " + shape_str(tb.shape) +
                                  " is not a trailing suffix of lhs " + shape_str(ta.shape));
  }
  NodeT<T> node;
  node.kind = OpKind::kAdd;
  node.inputs = {a.id, b.id};
  node.value = ta;
  node.value.requires_grad = false;
  node.value.grad.clear();
  for (int64_t r = 0; r < na / nb; ++r) {
    T* out = node.value.data.data() + r * nb;
    for (int64_t i = 0; i < nb; ++i) out[i] += tb.data[static_cast<size_t>(i)];
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::mul(Var a, Var b) {
  const auto& ta = value(a);
  const auto& tb = value(b);
  if (ta.shape != tb.shape) {
    op_error<T>(OpKind::kMul, "shape mismatch " + shape_str(ta.shape) + " vs " +
                                  shape_str(tb.shape));
  }
  NodeT<T> node;
  node.kind = OpKind::kMul;
  node.inputs = {a.id, b.id};
  node.value = ta;
  node.value.requires_grad = false;
  node.value.grad.clear();
  for (int64_t i = 0; i < ta.numel(); ++i) node.value.data[static_cast<size_t>(i)] *= tb.data[static_cast<size_t>(i)];
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::affine(Var x, T alpha, T beta) {
  const auto& tx = value(x);
  NodeT<T> node;
  node.kind = OpKind::kAffine;
  node.inputs = {x.id};
  node.alpha = alpha;
  node.beta = beta;
  node.value = tx;
  node.value.requires_grad = false;
  node.value.grad.clear();
  for (auto& v : node.value.data) v = alpha * v + beta;
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) op_error<T>(OpKind::kConcat, "no inputs");
  const auto& first = value(parts[0]);
  int rank = first.rank();
  if (axis < 0 || axis >= rank) {
    op_error<T>(OpKind::kConcat, "axis " + std::to_string(axis) + " out of range for rank " +
                                     std::to_string(rank));
  }
  Shape out_shape = first.shape;
  out_shape[static_cast<size_t>(axis)] = 0;
  for (Var p : parts) {
    const auto& tp = value(p);
    if (tp.rank() != rank) op_error<T>(OpKind::kConcat, "rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && tp.shape[static_cast<size_t>(i)] != first.shape[static_cast<size_t>(i)]) {
        op_error<T>(OpKind::kConcat, "off-axis dims differ: " + shape_str(first.shape) +
                                         " vs " + shape_str(tp.shape));
      }
    }
    out_shape[static_cast<size_t>(axis)] += tp.dim(static_cast<size_t>(axis));
  }
  NodeT<T> node;
  node.kind = OpKind::kConcat;
  node.axis = axis;
  for (Var p : parts) node.inputs.push_back(p.id);
  node.value = zeros<T>(out_shape);
  auto it = lines_along(out_shape, axis);
  int64_t offset = 0;  // running position along the concat axis
  for (Var p : parts) {
    const auto& tp = value(p);
    int64_t plen = tp.dim(static_cast<size_t>(axis));
    auto pit = lines_along(tp.shape, axis);
    for (int64_t o = 0; o < it.outer; ++o) {
      for (int64_t t = 0; t < plen; ++t) {
        const T* src = tp.data.data() + (o * pit.len + t) * pit.inner;
        T* dst = node.value.data.data() + (o * it.len + offset + t) * it.inner;
        std::copy(src, src + it.inner, dst);
      }
    }
    offset += plen;
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::slice(Var a, int axis, int64_t start, int64_t stop) {
  const auto& ta = value(a);
  if (axis < 0 || axis >= ta.rank()) {
    op_error<T>(OpKind::kSlice, "axis " + std::to_string(axis) + " out of range for " +
                                    shape_str(ta.shape));
  }
  int64_t len = ta.dim(static_cast<size_t>(axis));
  if (start < 0 || stop > len || start >= stop) {
    op_error<T>(OpKind::kSlice, "range [" + std::to_string(start) + "," + std::to_string(stop) +
                                    ") invalid for axis length " + std::to_string(len));
  }
  Shape out_shape = ta.shape;
  out_shape[static_cast<size_t>(axis)] = stop - start;
  NodeT<T> node;
  node.kind = OpKind::kSlice;
  node.inputs = {a.id};
  node.axis = axis;
  node.i0 = start;
  node.i1 = stop;
  node.value = zeros<T>(out_shape);
  auto it = lines_along(ta.shape, axis);
  for (int64_t o = 0; o < it.outer; ++o) {
    for (int64_t t = start; t < stop; ++t) {
      const T* src = ta.data.data() + (o * it.len + t) * it.inner;
      T* dst = node.value.data.data() + (o * (stop - start) + (t - start)) * it.inner;
      std::copy(src, src + it.inner, dst);
    }
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::reshape(Var a, Shape shape) {
  const auto& ta = value(a);
  if (shape_numel(shape) != ta.numel()) {
    op_error<T>(OpKind::kReshape, "cannot reshape " + shape_str(ta.shape) + " to " +
                                      shape_str(shape));
  }
  NodeT<T> node;
  node.kind = OpKind::kReshape;
  node.inputs = {a.id};
  node.value = TensorT<T>(std::move(shape), ta.data);
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::row(Var matrix, int64_t r) {
  const auto& tm = value(matrix);
  if (tm.rank() != 2) op_error<T>(OpKind::kSlice, "row() expects rank-2, got " + shape_str(tm.shape));
  return reshape(slice(matrix, 0, r, r + 1), {tm.dim(1)});
}

namespace {
template <typename T, typename F>
NodeT<T> unary_node(OpKind kind, Var x, const TensorT<T>& tx, F&& f) {
  NodeT<T> node;
  node.kind = kind;
  node.inputs = {x.id};
  node.value = tx;
  node.value.requires_grad = false;
  node.value.grad.clear();
  for (auto& v : node.value.data) v = f(v);
  return node;
}
}  // namespace

template <typename T>
Var GraphT<T>::tanh(Var x) {
  return emit(unary_node<T>(OpKind::kTanh, x, value(x), [](T v) { return std::tanh(v); }));
}

template <typename T>
Var GraphT<T>::sigmoid(Var x) {
  return emit(unary_node<T>(OpKind::kSigmoid, x, value(x), [](T v) {
    // evaluate through exp of a non-positive argument only
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    T e = std::exp(v);
    return e / (T(1) + e);
  }));
}

template <typename T>
Var GraphT<T>::relu(Var x) {
  return emit(unary_node<T>(OpKind::kRelu, x, value(x), [](T v) { return v > T(0) ? v : T(0); }));
}

template <typename T>
Var GraphT<T>::exp(Var x) {
  return emit(unary_node<T>(OpKind::kExp, x, value(x),
                            [](T v) { return exp_guard(v, OpKind::kExp); }));
}

template <typename T>
Var GraphT<T>::log(Var x) {
  return emit(unary_node<T>(OpKind::kLog, x, value(x), [](T v) {
    if (!(v > T(0))) {
      op_error<T>(OpKind::kLog, "argument " + std::to_string(static_cast<double>(v)) +
                                    " outside domain");
    }
    return std::log(v);
  }));
}

template <typename T>
Var GraphT<T>::softmax(Var x, int axis, Var additive_mask) {
  const auto& tx = value(x);
  if (axis < 0 || axis >= tx.rank()) {
    op_error<T>(OpKind::kSoftmax, "axis " + std::to_string(axis) + " out of range for " +
                                      shape_str(tx.shape));
  }
  const TensorT<T>* mask = nullptr;
  if (additive_mask.valid()) {
    mask = &value(additive_mask);
    if (mask->shape != tx.shape) {
      op_error<T>(OpKind::kSoftmax, "mask shape " + shape_str(mask->shape) + " vs input " +
                                        shape_str(tx.shape));
    }
  }
  NodeT<T> node;
  node.kind = OpKind::kSoftmax;
  node.inputs = {x.id};
  if (mask) node.inputs.push_back(additive_mask.id);
  node.axis = axis;
  node.value = zeros<T>(tx.shape);
  auto it = lines_along(tx.shape, axis);
  for (int64_t o = 0; o < it.outer; ++o) {
    for (int64_t i = 0; i < it.inner; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t t = 0; t < it.len; ++t) {
        int64_t at = (o * it.len + t) * it.inner + i;
        T v = tx.data[static_cast<size_t>(at)];
        if (mask) v += mask->data[static_cast<size_t>(at)];
        if (v > mx) mx = v;
      }
      // a -1e30 sentinel in every slot would cancel in v - mx below, so catch
      // the fully masked line by the max itself
      if (mx <= T(-1e29)) {
        op_error<T>(OpKind::kSoftmax, "fully masked line");
      }
      T sumv = 0;
      for (int64_t t = 0; t < it.len; ++t) {
        int64_t at = (o * it.len + t) * it.inner + i;
        T v = tx.data[static_cast<size_t>(at)];
        if (mask) v += mask->data[static_cast<size_t>(at)];
        T e = std::exp(v - mx);
        node.value.data[static_cast<size_t>(at)] = e;
        sumv += e;
      }
      if (!(sumv > T(0)) || !std::isfinite(static_cast<double>(sumv))) {
        op_error<T>(OpKind::kSoftmax, "degenerate line (fully masked or non-finite input)");
      }
      for (int64_t t = 0; t < it.len; ++t) {
        int64_t at = (o * it.len + t) * it.inner + i;
        node.value.data[static_cast<size_t>(at)] /= sumv;
      }
    }
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::logsumexp(Var x) {
  const auto& tx = value(x);
  if (tx.rank() != 1) op_error<T>(OpKind::kLogSumExp, "expects rank-1, got " + shape_str(tx.shape));
  T mx = *std::max_element(tx.data.begin(), tx.data.end());
  if (!std::isfinite(static_cast<double>(mx))) {
    op_error<T>(OpKind::kLogSumExp, "non-finite input");
  }
  T sumv = 0;
  for (T v : tx.data) sumv += std::exp(v - mx);
  NodeT<T> node;
  node.kind = OpKind::kLogSumExp;
  node.inputs = {x.id};
  node.value = TensorT<T>({1}, {mx + std::log(sumv)});
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::sum(Var x, int axis, Var mask) {
  const auto& tx = value(x);
  const TensorT<T>* m = nullptr;
  if (mask.valid()) {
    m = &value(mask);
    if (m->shape != tx.shape) {
      op_error<T>(OpKind::kSum, "mask shape " + shape_str(m->shape) + " vs input " +
                                    shape_str(tx.shape));
    }
  }
  NodeT<T> node;
  node.kind = OpKind::kSum;
  node.inputs = {x.id};
  if (m) node.inputs.push_back(mask.id);
  node.axis = axis;
  if (axis < 0) {
    T acc = 0;
    for (int64_t i = 0; i < tx.numel(); ++i) {
      T w = m ? m->data[static_cast<size_t>(i)] : T(1);
      acc += tx.data[static_cast<size_t>(i)] * w;
    }
    node.value = TensorT<T>({1}, {acc});
  } else {
    if (axis >= tx.rank()) op_error<T>(OpKind::kSum, "axis out of range for " + shape_str(tx.shape));
    Shape out_shape;
    for (int i = 0; i < tx.rank(); ++i)
      if (i != axis) out_shape.push_back(tx.shape[static_cast<size_t>(i)]);
    if (out_shape.empty()) out_shape = {1};
    node.value = zeros<T>(out_shape);
    auto it = lines_along(tx.shape, axis);
    for (int64_t o = 0; o < it.outer; ++o) {
      for (int64_t i = 0; i < it.inner; ++i) {
        T acc = 0;
        for (int64_t t = 0; t < it.len; ++t) {
          int64_t at = (o * it.len + t) * it.inner + i;
          T w = m ? m->data[static_cast<size_t>(at)] : T(1);
          acc += tx.data[static_cast<size_t>(at)] * w;
        }
        node.value.data[static_cast<size_t>(o * it.inner + i)] = acc;
      }
    }
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::mean(Var x, int axis, Var mask) {
  const auto& tx = value(x);
  const TensorT<T>* m = nullptr;
  if (mask.valid()) {
    m = &value(mask);
    if (m->shape != tx.shape) {
      op_error<T>(OpKind::kMean, "mask shape " + shape_str(m->shape) + " vs input " +
                                     shape_str(tx.shape));
    }
  }
  NodeT<T> node;
  node.kind = OpKind::kMean;
  node.inputs = {x.id};
  if (m) node.inputs.push_back(mask.id);
  node.axis = axis;
  // cache stores the per-output divisor (mask count) for backward
  if (axis < 0) {
    T acc = 0, cnt = 0;
    for (int64_t i = 0; i < tx.numel(); ++i) {
      T w = m ? m->data[static_cast<size_t>(i)] : T(1);
      acc += tx.data[static_cast<size_t>(i)] * w;
      cnt += w;
    }
    node.cache = {cnt};
    node.value = TensorT<T>({1}, {cnt > T(0) ? acc / cnt : T(0)});
  } else {
    if (axis >= tx.rank()) op_error<T>(OpKind::kMean, "axis out of range for " + shape_str(tx.shape));
    Shape out_shape;
    for (int i = 0; i < tx.rank(); ++i)
      if (i != axis) out_shape.push_back(tx.shape[static_cast<size_t>(i)]);
    if (out_shape.empty()) out_shape = {1};
    node.value = zeros<T>(out_shape);
    auto it = lines_along(tx.shape, axis);
    node.cache.assign(static_cast<size_t>(it.outer * it.inner), T(0));
    for (int64_t o = 0; o < it.outer; ++o) {
      for (int64_t i = 0; i < it.inner; ++i) {
        T acc = 0, cnt = 0;
        for (int64_t t = 0; t < it.len; ++t) {
          int64_t at = (o * it.len + t) * it.inner + i;
          T w = m ? m->data[static_cast<size_t>(at)] : T(1);
          acc += tx.data[static_cast<size_t>(at)] * w;
          cnt += w;
        }
        node.cache[static_cast<size_t>(o * it.inner + i)] = cnt;
        node.value.data[static_cast<size_t>(o * it.inner + i)] = cnt > T(0) ? acc / cnt : T(0);
      }
    }
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::max_over_time(Var x) {
  const auto& tx = value(x);
  if (tx.rank() != 2) op_error<T>(OpKind::kMaxOverTime, "expects (L,C), got " + shape_str(tx.shape));
  int64_t L = tx.dim(0), C = tx.dim(1);
  NodeT<T> node;
  node.kind = OpKind::kMaxOverTime;
  node.inputs = {x.id};
  node.value = zeros<T>({C});
  node.indices.assign(static_cast<size_t>(C), 0);
  for (int64_t c = 0; c < C; ++c) {
    T best = tx.data[static_cast<size_t>(c)];
    int64_t arg = 0;
    for (int64_t t = 1; t < L; ++t) {
      T v = tx.data[static_cast<size_t>(t * C + c)];
      if (v > best) {
        best = v;
        arg = t;
      }
    }
    node.value.data[static_cast<size_t>(c)] = best;
    node.indices[static_cast<size_t>(c)] = arg;
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::embedding_lookup(Var table, std::vector<int64_t> ids) {
  const auto& tt = value(table);
  if (tt.rank() != 2) {
    op_error<T>(OpKind::kEmbeddingLookup, "table must be rank-2, got " + shape_str(tt.shape));
  }
  int64_t V = tt.dim(0), d = tt.dim(1);
  for (int64_t id : ids) {
    if (id < 0 || id >= V) {
      op_error<T>(OpKind::kEmbeddingLookup, "id " + std::to_string(id) +
                                                " out of range for table rows " + std::to_string(V));
    }
  }
  NodeT<T> node;
  node.kind = OpKind::kEmbeddingLookup;
  node.inputs = {table.id};
  node.value = zeros<T>({static_cast<int64_t>(ids.size()), d});
  for (size_t j = 0; j < ids.size(); ++j) {
    const T* src = tt.data.data() + ids[j] * d;
    std::copy(src, src + d, node.value.data.data() + static_cast<int64_t>(j) * d);
  }
  node.indices = std::move(ids);
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::conv1d_same(Var x, Var kernel, Var bias) {
  const auto& tx = value(x);
  const auto& tk = value(kernel);
  const auto& tb = value(bias);
  if (tx.rank() != 2 || tk.rank() != 3 || tk.dim(2) != 5) {
    op_error<T>(OpKind::kConv1dSame, "expects x (L,cin), kernel (cin,cout,5); got " +
                                         shape_str(tx.shape) + ", " + shape_str(tk.shape));
  }
  int64_t L = tx.dim(0), cin = tx.dim(1), cout = tk.dim(1);
  if (tk.dim(0) != cin || tb.rank() != 1 || tb.dim(0) != cout) {
    op_error<T>(OpKind::kConv1dSame, "channel mismatch: x " + shape_str(tx.shape) + ", kernel " +
                                         shape_str(tk.shape) + ", bias " + shape_str(tb.shape));
  }
  NodeT<T> node;
  node.kind = OpKind::kConv1dSame;
  node.inputs = {x.id, kernel.id, bias.id};
  node.value = zeros<T>({L, cout});
  for (int64_t t = 0; t < L; ++t) {
    T* out = node.value.data.data() + t * cout;
    for (int64_t oc = 0; oc < cout; ++oc) out[oc] = tb.data[static_cast<size_t>(oc)];
    for (int64_t k = 0; k < 5; ++k) {
      int64_t src = t + k - 2;
      if (src < 0 || src >= L) continue;
      const T* xr = tx.data.data() + src * cin;
      for (int64_t ic = 0; ic < cin; ++ic) {
        T xv = xr[ic];
        if (xv == T(0)) continue;
        const T* kr = tk.data.data() + (ic * cout) * 5 + k;
        for (int64_t oc = 0; oc < cout; ++oc) out[oc] += xv * kr[oc * 5];
      }
    }
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::dropout(Var x, TensorT<T> mask) {
  const auto& tx = value(x);
  if (mask.shape != tx.shape) {
    op_error<T>(OpKind::kDropout, "mask shape " + shape_str(mask.shape) + " vs input " +
                                      shape_str(tx.shape));
  }
  NodeT<T> node;
  node.kind = OpKind::kDropout;
  node.inputs = {x.id};
  node.value = tx;
  node.value.requires_grad = false;
  node.value.grad.clear();
  for (int64_t i = 0; i < tx.numel(); ++i) node.value.data[static_cast<size_t>(i)] *= mask.data[static_cast<size_t>(i)];
  node.cache = std::move(mask.data);
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::lstm_seq(Var x, Var wx, Var wh, Var bias, int64_t hidden, bool reverse,
                        int64_t length) {
  const auto& tx = value(x);
  const auto& twx = value(wx);
  const auto& twh = value(wh);
  const auto& tb = value(bias);
  if (tx.rank() != 2) op_error<T>(OpKind::kLstmSeq, "x must be (L,in), got " + shape_str(tx.shape));
  int64_t L = tx.dim(0), in = tx.dim(1), h = hidden;
  if (twx.rank() != 2 || twx.dim(0) != in || twx.dim(1) != 4 * h || twh.rank() != 2 ||
      twh.dim(0) != h || twh.dim(1) != 4 * h || tb.rank() != 1 || tb.dim(0) != 4 * h) {
    op_error<T>(OpKind::kLstmSeq, "weight shapes " + shape_str(twx.shape) + ", " +
                                      shape_str(twh.shape) + ", " + shape_str(tb.shape) +
                                      " inconsistent with in=" + std::to_string(in) +
                                      " hidden=" + std::to_string(h));
  }
  if (length < 0) length = L;
  if (length > L) op_error<T>(OpKind::kLstmSeq, "length exceeds rows");
  NodeT<T> node;
  node.kind = OpKind::kLstmSeq;
  node.inputs = {x.id, wx.id, wh.id, bias.id};
  node.i0 = h;
  node.i1 = length;
  node.flag = reverse;
  node.value = zeros<T>({L, h});
  // cache per computed step: [i f z o c tanh(c)], 6h values, indexed by row
  node.cache.assign(static_cast<size_t>(L * 6 * h), T(0));

  // input projection for all real steps at once
  std::vector<T> a(static_cast<size_t>(length * 4 * h), T(0));
  gemm_acc(tx.data.data(), twx.data.data(), a.data(), length, in, 4 * h);

  std::vector<T> h_prev(static_cast<size_t>(h), T(0));
  std::vector<T> c_prev(static_cast<size_t>(h), T(0));
  std::vector<T> arow(static_cast<size_t>(4 * h), T(0));
  for (int64_t s = 0; s < length; ++s) {
    int64_t t = reverse ? length - 1 - s : s;  // row this step writes
    for (int64_t j = 0; j < 4 * h; ++j)
      arow[static_cast<size_t>(j)] = a[static_cast<size_t>(t * 4 * h + j)] + tb.data[static_cast<size_t>(j)];
    gemm_acc(h_prev.data(), twh.data.data(), arow.data(), 1, h, 4 * h);
    T* cc = node.cache.data() + t * 6 * h;
    T* hv = node.value.data.data() + t * h;
    for (int64_t j = 0; j < h; ++j) {
      T ai = arow[static_cast<size_t>(j)];
      T af = arow[static_cast<size_t>(h + j)];
      T az = arow[static_cast<size_t>(2 * h + j)];
      T ao = arow[static_cast<size_t>(3 * h + j)];
      T gi = T(1) / (T(1) + std::exp(-ai));
      T gf = T(1) / (T(1) + std::exp(-af));
      T gz = std::tanh(az);
      T go = T(1) / (T(1) + std::exp(-ao));
      T c = gf * c_prev[static_cast<size_t>(j)] + gi * gz;
      T tc = std::tanh(c);
      cc[j] = gi;
      cc[h + j] = gf;
      cc[2 * h + j] = gz;
      cc[3 * h + j] = go;
      cc[4 * h + j] = c;
      cc[5 * h + j] = tc;
      hv[j] = go * tc;
    }
    std::copy(hv, hv + h, h_prev.data());
    const T* csrc = cc + 4 * h;
    std::copy(csrc, csrc + h, c_prev.data());
  }
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::tile_rows(Var v, int64_t rows) {
  const auto& tv = value(v);
  int64_t n;
  if (tv.rank() == 1) n = tv.dim(0);
  else if (tv.rank() == 2 && tv.dim(0) == 1) n = tv.dim(1);
  else op_error<T>(OpKind::kTileRows, "expects (n,) or (1,n), got " + shape_str(tv.shape));
  if (rows <= 0) op_error<T>(OpKind::kTileRows, "rows must be positive");
  NodeT<T> node;
  node.kind = OpKind::kTileRows;
  node.inputs = {v.id};
  node.i0 = rows;
  node.value = zeros<T>({rows, n});
  for (int64_t r = 0; r < rows; ++r)
    std::copy(tv.data.begin(), tv.data.end(), node.value.data.begin() + r * n);
  return emit(std::move(node));
}

template <typename T>
Var GraphT<T>::gather(Var x, std::vector<int64_t> indices) {
  const auto& tx = value(x);
  if (tx.rank() != 1) op_error<T>(OpKind::kGather, "expects rank-1, got " + shape_str(tx.shape));
  if (indices.empty()) op_error<T>(OpKind::kGather, "no indices");
  NodeT<T> node;
  node.kind = OpKind::kGather;
  node.inputs = {x.id};
  node.value = zeros<T>({static_cast<int64_t>(indices.size())});
  for (size_t k = 0; k < indices.size(); ++k) {
    int64_t i = indices[k];
    if (i < 0 || i >= tx.dim(0)) {
      op_error<T>(OpKind::kGather, "index " + std::to_string(i) + " out of range for length " +
                                       std::to_string(tx.dim(0)));
    }
    node.value.data[k] = tx.data[static_cast<size_t>(i)];
  }
  node.indices = std::move(indices);
  return emit(std::move(node));
}

namespace {

// The five blocks of a span feature row and their source ranges.
struct SpanBlocks {
  // [lo, hi] inclusive row ranges; empty when lo > hi
  int64_t lo[5], hi[5];
};

inline SpanBlocks span_blocks(const Span& sp, int64_t L) {
  SpanBlocks b{};
  b.lo[0] = sp.start; b.hi[0] = sp.start;                        // first word
  b.lo[1] = sp.end;   b.hi[1] = sp.end;                          // last word
  b.lo[2] = sp.start; b.hi[2] = sp.end;                          // within mean
  b.lo[3] = std::max<int64_t>(0, sp.start - 5); b.hi[3] = sp.start - 1;  // left-5
  b.lo[4] = sp.end + 1; b.hi[4] = std::min(L - 1, sp.end + 4);   // right-5
  return b;
}

}  // namespace

template <typename T>
Var GraphT<T>::span_features(Var emb, std::vector<Span> spans) {
  const auto& te = value(emb);
  if (te.rank() != 2) op_error<T>(OpKind::kSpanFeatures, "emb must be (L,d), got " + shape_str(te.shape));
  if (spans.empty()) op_error<T>(OpKind::kSpanFeatures, "no spans");
  int64_t L = te.dim(0), d = te.dim(1);
  for (const Span& sp : spans) {
    if (sp.start < 0 || sp.end < sp.start || sp.end >= L) {
      op_error<T>(OpKind::kSpanFeatures, "span [" + std::to_string(sp.start) + "," +
                                             std::to_string(sp.end) + "] invalid for length " +
                                             std::to_string(L));
    }
  }
  NodeT<T> node;
  node.kind = OpKind::kSpanFeatures;
  node.inputs = {emb.id};
  int64_t S = static_cast<int64_t>(spans.size());
  node.value = zeros<T>({S, 5 * d});
  for (int64_t si = 0; si < S; ++si) {
    auto blocks = span_blocks(spans[static_cast<size_t>(si)], L);
    T* out = node.value.data.data() + si * 5 * d;
    for (int b = 0; b < 5; ++b) {
      int64_t lo = blocks.lo[b], hi = blocks.hi[b];
      if (lo > hi) continue;  // empty window stays zero
      T inv = T(1) / static_cast<T>(hi - lo + 1);
      T* dst = out + b * d;
      for (int64_t r = lo; r <= hi; ++r) {
        const T* src = te.data.data() + r * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += src[j] * inv;
      }
    }
  }
  node.spans = std::move(spans);
  return emit(std::move(node));
}

namespace {
constexpr int64_t kWindowSizes[3] = {5, 10, 20};
}

template <typename T>
Var GraphT<T>::window_means(Var values, std::vector<Span> spans) {
  const auto& tv = value(values);
  if (tv.rank() != 1) op_error<T>(OpKind::kWindowMeans, "expects rank-1, got " + shape_str(tv.shape));
  if (spans.empty()) op_error<T>(OpKind::kWindowMeans, "no spans");
  int64_t L = tv.dim(0);
  for (const Span& sp : spans) {
    if (sp.start < 0 || sp.end < sp.start || sp.end >= L) {
      op_error<T>(OpKind::kWindowMeans, "span [" + std::to_string(sp.start) + "," +
                                            std::to_string(sp.end) + "] invalid for length " +
                                            std::to_string(L));
    }
  }
  NodeT<T> node;
  node.kind = OpKind::kWindowMeans;
  node.inputs = {values.id};
  int64_t S = static_cast<int64_t>(spans.size());
  node.value = zeros<T>({S, 6});
  // columns: (w5 left, w5 right, w10 left, w10 right, w20 left, w20 right)
  for (int64_t si = 0; si < S; ++si) {
    const Span& sp = spans[static_cast<size_t>(si)];
    T* out = node.value.data.data() + si * 6;
    for (int w = 0; w < 3; ++w) {
      int64_t W = kWindowSizes[w];
      int64_t llo = std::max<int64_t>(0, sp.start - W), lhi = sp.start - 1;
      int64_t rlo = sp.end + 1, rhi = std::min(L - 1, sp.end + W);
      T acc = 0;
      for (int64_t t = llo; t <= lhi; ++t) acc += tv.data[static_cast<size_t>(t)];
      out[2 * w] = lhi >= llo ? acc / static_cast<T>(lhi - llo + 1) : T(0);
      acc = 0;
      for (int64_t t = rlo; t <= rhi; ++t) acc += tv.data[static_cast<size_t>(t)];
      out[2 * w + 1] = rhi >= rlo ? acc / static_cast<T>(rhi - rlo + 1) : T(0);
    }
  }
  node.spans = std::move(spans);
  return emit(std::move(node));
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

template <typename T>
void GraphT<T>::backward(Var loss) {
  NodeT<T>& ln = node(loss);
  if (node_value(ln).numel() != 1) {
    throw Error("backward: loss must be scalar, got shape " + shape_str(node_value(ln).shape));
  }
  // mark ancestors of the loss so unrelated dangling nodes are skipped
  std::vector<char> reach(nodes_.size(), 0);
  std::vector<int32_t> stack = {loss.id};
  reach[static_cast<size_t>(loss.id)] = 1;
  while (!stack.empty()) {
    int32_t id = stack.back();
    stack.pop_back();
    for (int32_t in : nodes_[static_cast<size_t>(id)].inputs) {
      if (!reach[static_cast<size_t>(in)]) {
        reach[static_cast<size_t>(in)] = 1;
        stack.push_back(in);
      }
    }
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    NodeT<T>& n = nodes_[i];
    if (!reach[i] || !n.needs_grad) continue;
    if (n.leaf) n.leaf->ensure_grad();
    else n.grad.assign(n.value.data.size(), T(0));
  }

  auto gbuf = [&](int32_t id) -> std::vector<T>& {
    NodeT<T>& n = nodes_[static_cast<size_t>(id)];
    return n.leaf ? n.leaf->grad : n.grad;
  };
  auto wants = [&](int32_t id) {
    return reach[static_cast<size_t>(id)] && nodes_[static_cast<size_t>(id)].needs_grad;
  };

  if (!wants(loss.id)) return;  // loss independent of any trainable leaf
  gbuf(loss.id)[0] += T(1);

  for (int32_t id = loss.id; id >= 0; --id) {
    NodeT<T>& n = nodes_[static_cast<size_t>(id)];
    if (!reach[static_cast<size_t>(id)] || !n.needs_grad) continue;
    if (n.kind == OpKind::kLeaf || n.kind == OpKind::kConstant) continue;
    const std::vector<T>& g = gbuf(id);
    const TensorT<T>& out = n.value;

    switch (n.kind) {
      case OpKind::kMatmul: {
        const auto& ta = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        const auto& tb = node_value(nodes_[static_cast<size_t>(n.inputs[1])]);
        int64_t m = ta.dim(0), k = ta.dim(1);
        int64_t nn = tb.rank() == 2 ? tb.dim(1) : 1;
        if (wants(n.inputs[0]))
          gemm_nt_acc(g.data(), tb.data.data(), gbuf(n.inputs[0]).data(), m, nn, k);
        if (wants(n.inputs[1]))
          gemm_tn_acc(ta.data.data(), g.data(), gbuf(n.inputs[1]).data(), m, k, nn);
        break;
      }
      case OpKind::kLinear: {
        const auto& tx = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        const auto& tw = node_value(nodes_[static_cast<size_t>(n.inputs[1])]);
        bool vec = tx.rank() == 1;
        int64_t m = vec ? 1 : tx.dim(0);
        int64_t k = vec ? tx.dim(0) : tx.dim(1);
        int64_t nn = tw.dim(0);
        if (wants(n.inputs[0]))
          gemm_acc(g.data(), tw.data.data(), gbuf(n.inputs[0]).data(), m, nn, k);
        if (wants(n.inputs[1]))
          gemm_tn_acc(g.data(), tx.data.data(), gbuf(n.inputs[1]).data(), m, nn, k);
        if (n.inputs.size() == 3 && wants(n.inputs[2])) {
          std::vector<T>& gb = gbuf(n.inputs[2]);
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < nn; ++j) gb[static_cast<size_t>(j)] += g[static_cast<size_t>(i * nn + j)];
        }
        break;
      }
      case OpKind::kTranspose: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        int64_t m = out.dim(1), nn = out.dim(0);  // input was (m,nn)
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < nn; ++j) gi[static_cast<size_t>(i * nn + j)] += g[static_cast<size_t>(j * m + i)];
        break;
      }
      case OpKind::kAdd: {
        if (wants(n.inputs[0])) {
          std::vector<T>& ga = gbuf(n.inputs[0]);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (wants(n.inputs[1])) {
          std::vector<T>& gb = gbuf(n.inputs[1]);
          int64_t nb = static_cast<int64_t>(gb.size());
          for (int64_t i = 0; i < static_cast<int64_t>(g.size()); ++i) gb[static_cast<size_t>(i % nb)] += g[static_cast<size_t>(i)];
        }
        break;
      }
      case OpKind::kMul: {
        const auto& ta = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        const auto& tb = node_value(nodes_[static_cast<size_t>(n.inputs[1])]);
        if (wants(n.inputs[0])) {
          std::vector<T>& ga = gbuf(n.inputs[0]);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tb.data[i];
        }
        if (wants(n.inputs[1])) {
          std::vector<T>& gb = gbuf(n.inputs[1]);
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ta.data[i];
        }
        break;
      }
      case OpKind::kAffine: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += n.alpha * g[i];
        break;
      }
      case OpKind::kConcat: {
        auto it = lines_along(out.shape, n.axis);
        int64_t offset = 0;
        for (int32_t in_id : n.inputs) {
          const auto& tp = node_value(nodes_[static_cast<size_t>(in_id)]);
          int64_t plen = tp.dim(static_cast<size_t>(n.axis));
          if (wants(in_id)) {
            std::vector<T>& gi = gbuf(in_id);
            for (int64_t o = 0; o < it.outer; ++o)
              for (int64_t t = 0; t < plen; ++t) {
                const T* src = g.data() + (o * it.len + offset + t) * it.inner;
                T* dst = gi.data() + (o * plen + t) * it.inner;
                for (int64_t j = 0; j < it.inner; ++j) dst[j] += src[j];
              }
          }
          offset += plen;
        }
        break;
      }
      case OpKind::kSlice: {
        if (!wants(n.inputs[0])) break;
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        std::vector<T>& gi = gbuf(n.inputs[0]);
        auto it = lines_along(ti.shape, n.axis);
        int64_t width = n.i1 - n.i0;
        for (int64_t o = 0; o < it.outer; ++o)
          for (int64_t t = 0; t < width; ++t) {
            const T* src = g.data() + (o * width + t) * it.inner;
            T* dst = gi.data() + (o * it.len + n.i0 + t) * it.inner;
            for (int64_t j = 0; j < it.inner; ++j) dst[j] += src[j];
          }
        break;
      }
      case OpKind::kReshape:
      case OpKind::kDropout: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        if (n.kind == OpKind::kDropout) {
          for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * n.cache[i];
        } else {
          for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
        break;
      }
      case OpKind::kTanh: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * (T(1) - out.data[i] * out.data[i]);
        break;
      }
      case OpKind::kSigmoid: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * out.data[i] * (T(1) - out.data[i]);
        break;
      }
      case OpKind::kRelu: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += ti.data[i] > T(0) ? g[i] : T(0);
        break;
      }
      case OpKind::kExp: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * out.data[i];
        break;
      }
      case OpKind::kLog: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] / ti.data[i];
        break;
      }
      case OpKind::kSoftmax: {
        // the additive mask enters as x + mask, so its gradient equals x's
        bool wx_ = wants(n.inputs[0]);
        bool wm = n.inputs.size() == 2 && wants(n.inputs[1]);
        if (!wx_ && !wm) break;
        auto it = lines_along(out.shape, n.axis);
        for (int64_t o = 0; o < it.outer; ++o)
          for (int64_t i = 0; i < it.inner; ++i) {
            T dot = 0;
            for (int64_t t = 0; t < it.len; ++t) {
              int64_t at = (o * it.len + t) * it.inner + i;
              dot += g[static_cast<size_t>(at)] * out.data[static_cast<size_t>(at)];
            }
            for (int64_t t = 0; t < it.len; ++t) {
              int64_t at = (o * it.len + t) * it.inner + i;
              T gv = (g[static_cast<size_t>(at)] - dot) * out.data[static_cast<size_t>(at)];
              if (wx_) gbuf(n.inputs[0])[static_cast<size_t>(at)] += gv;
              if (wm) gbuf(n.inputs[1])[static_cast<size_t>(at)] += gv;
            }
          }
        break;
      }
      case OpKind::kLogSumExp: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        T y = out.data[0];
        for (size_t i = 0; i < gi.size(); ++i) gi[i] += g[0] * std::exp(ti.data[i] - y);
        break;
      }
      case OpKind::kSum: {
        if (n.inputs.size() == 2 && wants(n.inputs[1])) {
          op_error<T>(OpKind::kSum, "not differentiable with respect to the mask");
        }
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        const TensorT<T>* m = n.inputs.size() == 2
                                  ? &node_value(nodes_[static_cast<size_t>(n.inputs[1])])
                                  : nullptr;
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        if (n.axis < 0) {
          for (size_t i = 0; i < gi.size(); ++i) gi[i] += g[0] * (m ? m->data[i] : T(1));
        } else {
          auto it = lines_along(ti.shape, n.axis);
          for (int64_t o = 0; o < it.outer; ++o)
            for (int64_t i = 0; i < it.inner; ++i) {
              T gv = g[static_cast<size_t>(o * it.inner + i)];
              for (int64_t t = 0; t < it.len; ++t) {
                int64_t at = (o * it.len + t) * it.inner + i;
                gi[static_cast<size_t>(at)] += gv * (m ? m->data[static_cast<size_t>(at)] : T(1));
              }
            }
        }
        break;
      }
      case OpKind::kMean: {
        if (n.inputs.size() == 2 && wants(n.inputs[1])) {
          op_error<T>(OpKind::kMean, "not differentiable with respect to the mask");
        }
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        const TensorT<T>* m = n.inputs.size() == 2
                                  ? &node_value(nodes_[static_cast<size_t>(n.inputs[1])])
                                  : nullptr;
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        if (n.axis < 0) {
          T cnt = n.cache[0];
          if (cnt > T(0)) {
            for (size_t i = 0; i < gi.size(); ++i)
              gi[i] += g[0] / cnt * (m ? m->data[i] : T(1));
          }
        } else {
          auto it = lines_along(ti.shape, n.axis);
          for (int64_t o = 0; o < it.outer; ++o)
            for (int64_t i = 0; i < it.inner; ++i) {
              T cnt = n.cache[static_cast<size_t>(o * it.inner + i)];
              if (!(cnt > T(0))) continue;
              T gv = g[static_cast<size_t>(o * it.inner + i)] / cnt;
              for (int64_t t = 0; t < it.len; ++t) {
                int64_t at = (o * it.len + t) * it.inner + i;
                gi[static_cast<size_t>(at)] += gv * (m ? m->data[static_cast<size_t>(at)] : T(1));
              }
            }
        }
        break;
      }
      case OpKind::kMaxOverTime: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        int64_t C = out.dim(0);
        for (int64_t c = 0; c < C; ++c)
          gi[static_cast<size_t>(n.indices[static_cast<size_t>(c)] * C + c)] += g[static_cast<size_t>(c)];
        break;
      }
      case OpKind::kEmbeddingLookup: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        int64_t d = out.dim(1);
        for (size_t j = 0; j < n.indices.size(); ++j) {
          T* dst = gi.data() + n.indices[j] * d;
          const T* src = g.data() + static_cast<int64_t>(j) * d;
          for (int64_t c = 0; c < d; ++c) dst[c] += src[c];
        }
        break;
      }
      case OpKind::kConv1dSame: {
        const auto& tx = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        const auto& tk = node_value(nodes_[static_cast<size_t>(n.inputs[1])]);
        int64_t L = tx.dim(0), cin = tx.dim(1), cout = tk.dim(1);
        bool wx_ = wants(n.inputs[0]), wk = wants(n.inputs[1]), wb = wants(n.inputs[2]);
        for (int64_t t = 0; t < L; ++t) {
          const T* gr = g.data() + t * cout;
          if (wb) {
            std::vector<T>& gb = gbuf(n.inputs[2]);
            for (int64_t oc = 0; oc < cout; ++oc) gb[static_cast<size_t>(oc)] += gr[oc];
          }
          for (int64_t k = 0; k < 5; ++k) {
            int64_t src = t + k - 2;
            if (src < 0 || src >= L) continue;
            for (int64_t ic = 0; ic < cin; ++ic) {
              T xv = tx.data[static_cast<size_t>(src * cin + ic)];
              const T* kr = tk.data.data() + (ic * cout) * 5 + k;
              if (wx_) {
                T acc = 0;
                for (int64_t oc = 0; oc < cout; ++oc) acc += gr[oc] * kr[oc * 5];
                gbuf(n.inputs[0])[static_cast<size_t>(src * cin + ic)] += acc;
              }
              if (wk) {
                T* gk = gbuf(n.inputs[1]).data() + (ic * cout) * 5 + k;
                for (int64_t oc = 0; oc < cout; ++oc) gk[oc * 5] += gr[oc] * xv;
              }
            }
          }
        }
        break;
      }
      case OpKind::kLstmSeq: {
        const auto& tx = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        const auto& twx = node_value(nodes_[static_cast<size_t>(n.inputs[1])]);
        const auto& twh = node_value(nodes_[static_cast<size_t>(n.inputs[2])]);
        int64_t in = tx.dim(1), h = n.i0, length = n.i1;
        bool reverse = n.flag;
        if (length == 0) break;
        // per-step pre-activation gradients, in row order
        std::vector<T> da(static_cast<size_t>(length * 4 * h), T(0));
        std::vector<T> dh(static_cast<size_t>(h), T(0));
        std::vector<T> dc(static_cast<size_t>(h), T(0));
        for (int64_t s = length - 1; s >= 0; --s) {
          int64_t t = reverse ? length - 1 - s : s;
          int64_t tprev = reverse ? t + 1 : t - 1;  // row holding this step's previous state
          bool has_prev = s > 0;
          const T* cc = n.cache.data() + t * 6 * h;
          T* dar = da.data() + t * 4 * h;
          for (int64_t j = 0; j < h; ++j) {
            T gi_ = cc[j], gf = cc[h + j], gz = cc[2 * h + j], go = cc[3 * h + j];
            T tc = cc[5 * h + j];
            T dhj = dh[static_cast<size_t>(j)] + g[static_cast<size_t>(t * h + j)];
            T do_ = dhj * tc;
            T dcj = dc[static_cast<size_t>(j)] + dhj * go * (T(1) - tc * tc);
            T cprev = has_prev ? n.cache[static_cast<size_t>(tprev * 6 * h + 4 * h + j)] : T(0);
            dar[j] = dcj * gz * gi_ * (T(1) - gi_);
            dar[h + j] = dcj * cprev * gf * (T(1) - gf);
            dar[2 * h + j] = dcj * gi_ * (T(1) - gz * gz);
            dar[3 * h + j] = do_ * go * (T(1) - go);
            dc[static_cast<size_t>(j)] = dcj * gf;
          }
          // carry into the previous step's hidden state: da_row @ wh^T
          std::fill(dh.begin(), dh.end(), T(0));
          if (has_prev) gemm_nt_acc(dar, twh.data.data(), dh.data(), 1, 4 * h, h);
        }
        if (wants(n.inputs[0]))
          gemm_nt_acc(da.data(), twx.data.data(), gbuf(n.inputs[0]).data(), length, 4 * h, in);
        if (wants(n.inputs[1]))
          gemm_tn_acc(tx.data.data(), da.data(), gbuf(n.inputs[1]).data(), length, in, 4 * h);
        if (wants(n.inputs[2])) {
          // previous-state rows matching each step's da row
          std::vector<T>& gwh = gbuf(n.inputs[2]);
          for (int64_t s = 1; s < length; ++s) {
            int64_t t = reverse ? length - 1 - s : s;
            int64_t tprev = reverse ? t + 1 : t - 1;
            gemm_tn_acc(n.value.data.data() + tprev * h, da.data() + t * 4 * h, gwh.data(), 1, h,
                        4 * h);
          }
        }
        if (wants(n.inputs[3])) {
          std::vector<T>& gb = gbuf(n.inputs[3]);
          for (int64_t t = 0; t < length; ++t)
            for (int64_t j = 0; j < 4 * h; ++j) gb[static_cast<size_t>(j)] += da[static_cast<size_t>(t * 4 * h + j)];
        }
        break;
      }
      case OpKind::kTileRows: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        int64_t nn = static_cast<int64_t>(gi.size());
        for (int64_t r = 0; r < n.i0; ++r)
          for (int64_t j = 0; j < nn; ++j) gi[static_cast<size_t>(j)] += g[static_cast<size_t>(r * nn + j)];
        break;
      }
      case OpKind::kGather: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        for (size_t k = 0; k < n.indices.size(); ++k) gi[static_cast<size_t>(n.indices[k])] += g[k];
        break;
      }
      case OpKind::kSpanFeatures: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        const auto& ti = node_value(nodes_[static_cast<size_t>(n.inputs[0])]);
        int64_t L = ti.dim(0), d = ti.dim(1);
        for (size_t si = 0; si < n.spans.size(); ++si) {
          auto blocks = span_blocks(n.spans[si], L);
          const T* gr = g.data() + static_cast<int64_t>(si) * 5 * d;
          for (int b = 0; b < 5; ++b) {
            int64_t lo = blocks.lo[b], hi = blocks.hi[b];
            if (lo > hi) continue;
            T inv = T(1) / static_cast<T>(hi - lo + 1);
            const T* src = gr + b * d;
            for (int64_t r = lo; r <= hi; ++r) {
              T* dst = gi.data() + r * d;
              for (int64_t j = 0; j < d; ++j) dst[j] += src[j] * inv;
            }
          }
        }
        break;
      }
      case OpKind::kWindowMeans: {
        if (!wants(n.inputs[0])) break;
        std::vector<T>& gi = gbuf(n.inputs[0]);
        int64_t L = static_cast<int64_t>(gi.size());
        for (size_t si = 0; si < n.spans.size(); ++si) {
          const Span& sp = n.spans[si];
          const T* gr = g.data() + static_cast<int64_t>(si) * 6;
          for (int w = 0; w < 3; ++w) {
            int64_t W = kWindowSizes[w];
            int64_t llo = std::max<int64_t>(0, sp.start - W), lhi = sp.start - 1;
            int64_t rlo = sp.end + 1, rhi = std::min(L - 1, sp.end + W);
            if (lhi >= llo) {
              T gv = gr[2 * w] / static_cast<T>(lhi - llo + 1);
              for (int64_t t = llo; t <= lhi; ++t) gi[static_cast<size_t>(t)] += gv;
            }
            if (rhi >= rlo) {
              T gv = gr[2 * w + 1] / static_cast<T>(rhi - rlo + 1);
              for (int64_t t = rlo; t <= rhi; ++t) gi[static_cast<size_t>(t)] += gv;
            }
          }
        }
        break;
      }
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
    }
  }
}

template class GraphT<float>;
template class GraphT<double>;

}  // namespace fastqa::ad
