#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fastqa/graph.hpp"

namespace fastqa::ad {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // which leaf/element produced it
  int64_t checked = 0;

  bool ok(double tol = 1e-5) const { return max_rel_err <= tol; }
};

// Compares backward() against central differences at 64-bit precision.
// `build` reconstructs the loss from scratch on every call; it must read the
// leaf tensors through the pointers given here, since they are perturbed in
// place between evaluations. Relative error per element is
// |a - n| / max(1, |a| + |n|).
GradCheckResult grad_check(const std::function<Var(Graph64&)>& build,
                           const std::vector<Tensor64*>& leaves, double eps = 1e-5);

struct GradCase {
  std::string name;
  GradCheckResult result;
};

// Every autodiff primitive plus the assembled models, with inputs drawn from
// the given seed. Sizes are small; one pass runs in well under a second.
std::vector<GradCase> gradcheck_battery(uint64_t seed);
std::vector<GradCase> gradcheck_battery_ops(uint64_t seed);
// model_n sets the hidden width of the assembled models (the bow case uses
// model_n + 2 so the two never share shapes)
std::vector<GradCase> gradcheck_battery_models(uint64_t seed, int64_t model_n = 7);

}  // namespace fastqa::ad
