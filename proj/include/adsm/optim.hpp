#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adsm/autodiff.hpp"

namespace adsm {

/// Adamax moment buffers for a parameter list.
struct AdamaxState {
  std::vector<Tensor> m;  // first moment
  std::vector<Tensor> u;  // exponentially weighted infinity norm
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamaxState for_params(std::span<const Parameter> params);
};

/// One Adamax update:
///   m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);  p <- p - lr/(1-b1^t) * m/(u+eps)
void adamax_step(std::span<Parameter> params, std::span<const Tensor> grads,
                 AdamaxState& state, double lr);

/// lr0 * (1 + cos(pi * epoch / total_epochs)) / 2, floored at zero.
double cosine_anneal_lr(std::size_t epoch, std::size_t total_epochs, double lr0);

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace adsm
