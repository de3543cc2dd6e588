#include "fastqa/fusion.hpp"

#include <random>
#include <utility>

#include "fastqa/common.hpp"

namespace fastqa {

using ad::GraphT;
using ad::Var;

template <typename T>
std::vector<std::pair<std::string, TensorT<T>*>> FusionParamsT<T>::named_params() {
  std::vector<std::pair<std::string, TensorT<T>*>> out;
  out.emplace_back("fusion.v_beta", &v_beta);
  out.emplace_back("fusion.v_gamma", &v_gamma);
  auto gate = [&](const char* name, FuseGateT<T>& g) {
    out.emplace_back(std::string("fusion.") + name + ".w", &g.w);
    out.emplace_back(std::string("fusion.") + name + ".b", &g.b);
  };
  gate("intra", intra);
  gate("bw", bw);
  gate("fw", fw);
  gate("inter", inter);
  gate("inter_bw", inter_bw);
  gate("inter_fw", inter_fw);
  return out;
}

template <typename T>
std::vector<TensorT<T>*> FusionParamsT<T>::trainable() {
  std::vector<TensorT<T>*> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

template <typename T>
FusionParamsT<T> init_fusion(int64_t n, uint64_t seed) {
  if (n <= 0) throw Error("init_fusion: n must be positive");
  FusionParamsT<T> p;
  p.n = n;
  std::mt19937_64 rng(mix_seed(seed, 41));
  // Plain dot-product similarity at the start of training.
  p.v_beta = full<T>({n}, T(1));
  p.v_gamma = fan_in_uniform<T>({n}, n, rng);
  auto make_gate = [&](FuseGateT<T>& g) {
    g.w = fan_in_uniform<T>({n, 2 * n}, 2 * n, rng);
    g.b = zeros<T>({n});
  };
  make_gate(p.intra);
  make_gate(p.bw);
  make_gate(p.fw);
  make_gate(p.inter);
  make_gate(p.inter_bw);
  make_gate(p.inter_fw);
  for (auto* t : p.trainable()) {
    t->requires_grad = true;
    t->ensure_grad();
  }
  return p;
}

template <typename T>
void saturate_fusion_gates(FusionParamsT<T>& p, T bias) {
  auto sat = [&](FuseGateT<T>& g) {
    std::fill(g.w.data.begin(), g.w.data.end(), T(0));
    std::fill(g.b.data.begin(), g.b.data.end(), bias);
  };
  sat(p.intra);
  sat(p.bw);
  sat(p.fw);
  sat(p.inter);
  sat(p.inter_bw);
  sat(p.inter_fw);
}

template <typename T>
Var fuse(GraphT<T>& g, FuseGateT<T>& gate, Var a, Var b) {
  Var gv = g.sigmoid(g.linear(g.concat({a, b}, 1), g.param(gate.w), g.param(gate.b)));
  return g.add(g.mul(gv, a), g.mul(g.one_minus(gv), b));
}

namespace {

// 0 on the diagonal, 1 elsewhere: zeroes the self score while keeping it in
// the softmax, exactly as the indicator is written.
template <typename T>
TensorT<T> off_diagonal_ones(int64_t L) {
  TensorT<T> m = full<T>({L, L}, T(1));
  for (int64_t j = 0; j < L; ++j) m.data[j * L + j] = T(0);
  return m;
}

template <typename T>
TensorT<T> diagonal_neg_inf(int64_t L) {
  TensorT<T> m = zeros<T>({L, L});
  for (int64_t j = 0; j < L; ++j) m.data[j * L + j] = T(-1e30);
  return m;
}

}  // namespace

template <typename T>
Var intra_fuse(GraphT<T>& g, FusionParamsT<T>& p, Var H, bool mask_self) {
  const int64_t L = g.value(H).shape[0];
  Var scaled = g.mul(H, g.tile_rows(g.param(p.v_beta), L));
  Var scores = g.matmul(scaled, g.transpose(H));
  Var beta;
  if (mask_self) {
    beta = g.softmax(scores, 1, g.constant(diagonal_neg_inf<T>(L)));
  } else {
    beta = g.softmax(g.mul(scores, g.constant(off_diagonal_ones<T>(L))), 1);
  }
  Var co = g.matmul(beta, H);
  return fuse(g, p.intra, H, co);
}

template <typename T>
Var recurrent_fuse(GraphT<T>& g, FuseGateT<T>& bw_gate, FuseGateT<T>& fw_gate, Var H) {
  const int64_t L = g.value(H).shape[0];
  std::vector<Var> bw(L);
  bw[L - 1] = g.slice(H, 0, L - 1, L);
  for (int64_t j = L - 2; j >= 0; --j)
    bw[j] = fuse(g, bw_gate, g.slice(H, 0, j, j + 1), bw[j + 1]);
  std::vector<Var> fw(L);
  fw[0] = bw[0];
  for (int64_t j = 1; j < L; ++j) fw[j] = fuse(g, fw_gate, bw[j], fw[j - 1]);
  return g.concat(fw, 0);
}

template <typename T>
Var inter_fuse(GraphT<T>& g, FusionParamsT<T>& p, Var H, Var Z) {
  const int64_t L_Q = g.value(Z).shape[0];
  Var scaled = g.mul(Z, g.tile_rows(g.param(p.v_gamma), L_Q));
  Var gamma = g.softmax(g.matmul(scaled, g.transpose(H)), 1);
  Var co = g.matmul(g.transpose(gamma), Z);
  Var fused = fuse(g, p.inter, H, co);
  return recurrent_fuse(g, p.inter_bw, p.inter_fw, fused);
}

template <typename T>
Var fusion_stack(GraphT<T>& g, FusionParamsT<T>& p, Var H, Var Z, bool mask_self) {
  Var intra = intra_fuse(g, p, H, mask_self);
  Var tilde = recurrent_fuse(g, p.bw, p.fw, intra);
  return inter_fuse(g, p, tilde, Z);
}

template struct FusionParamsT<float>;
template struct FusionParamsT<double>;
template FusionParamsT<float> init_fusion<float>(int64_t, uint64_t);
template FusionParamsT<double> init_fusion<double>(int64_t, uint64_t);
template void saturate_fusion_gates<float>(FusionParamsT<float>&, float);
template void saturate_fusion_gates<double>(FusionParamsT<double>&, double);
template ad::Var fuse<float>(GraphT<float>&, FuseGateT<float>&, Var, Var);
template ad::Var fuse<double>(GraphT<double>&, FuseGateT<double>&, Var, Var);
template ad::Var intra_fuse<float>(GraphT<float>&, FusionParamsT<float>&, Var, bool);
template ad::Var intra_fuse<double>(GraphT<double>&, FusionParamsT<double>&, Var, bool);
template ad::Var recurrent_fuse<float>(GraphT<float>&, FuseGateT<float>&, FuseGateT<float>&, Var);
template ad::Var recurrent_fuse<double>(GraphT<double>&, FuseGateT<double>&, FuseGateT<double>&, Var);
template ad::Var inter_fuse<float>(GraphT<float>&, FusionParamsT<float>&, Var, Var);
template ad::Var inter_fuse<double>(GraphT<double>&, FusionParamsT<double>&, Var, Var);
template ad::Var fusion_stack<float>(GraphT<float>&, FusionParamsT<float>&, Var, Var, bool);
template ad::Var fusion_stack<double>(GraphT<double>&, FusionParamsT<double>&, Var, Var, bool);

}  // namespace fastqa
