#pragma once

#include <vector>

#include "fastqa/graph.hpp"

namespace fastqa {

// One gated-addition site: g = sigmoid(FC([a;b])), out = g*a + (1-g)*b.
template <typename T>
struct FuseGateT {
  TensorT<T> w;  // (n, 2n)
  TensorT<T> b;  // (n,)
};

template <typename T>
struct FusionParamsT {
  int64_t n = 0;
  TensorT<T> v_beta;   // (n,), all ones at init: plain dot-product similarity
  TensorT<T> v_gamma;  // (n,)
  // each FUSE site keeps its own gate
  FuseGateT<T> intra, bw, fw, inter, inter_bw, inter_fw;

  std::vector<std::pair<std::string, TensorT<T>*>> named_params();
  std::vector<TensorT<T>*> trainable();
};

using FusionParams = FusionParamsT<float>;

template <typename T>
FusionParamsT<T> init_fusion(int64_t n, uint64_t seed);

// Pushes every gate toward its first argument hard enough that sigmoid
// saturates to exactly 1 in float32, making the whole stack an identity.
template <typename T>
void saturate_fusion_gates(FusionParamsT<T>& p, T bias);

// Row-wise FUSE over matching (L, n) stacks.
template <typename T>
ad::Var fuse(ad::GraphT<T>& g, FuseGateT<T>& gate, ad::Var a, ad::Var b);

// Associative fusion: scores v_beta . (h_j * h_k) with the self score zeroed
// literally (or excluded from the softmax when mask_self is set), co-states
// via the row softmax, then a gated addition.
template <typename T>
ad::Var intra_fuse(ad::GraphT<T>& g, FusionParamsT<T>& p, ad::Var H, bool mask_self = false);

// Backward then forward sweep of pairwise fusion between neighbours.
template <typename T>
ad::Var recurrent_fuse(ad::GraphT<T>& g, FuseGateT<T>& bw_gate, FuseGateT<T>& fw_gate, ad::Var H);

// Question-to-context fusion: softmax over the context axis per question
// word; per-position co-states need not be normalized.
template <typename T>
ad::Var inter_fuse(ad::GraphT<T>& g, FusionParamsT<T>& p, ad::Var H, ad::Var Z);

// intra -> recurrent -> inter -> recurrent, as inserted between the encoder
// and the answer layer.
template <typename T>
ad::Var fusion_stack(ad::GraphT<T>& g, FusionParamsT<T>& p, ad::Var H, ad::Var Z,
                     bool mask_self = false);

}  // namespace fastqa
