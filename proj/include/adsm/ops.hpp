#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adsm/autodiff.hpp"

namespace adsm {

// Differentiable op set. Binary elementwise ops accept equal shapes or a
// second operand whose shape equals the trailing dims of the first (leading
// dimension expansion); nothing else broadcasts.
//
// Every op throws ContractViolation on non-conforming shapes and NumericFault
// if it produces a non-finite value.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

/// [..., m, k] x [..., k, n] with equal batch dims, or [..., m, k] x [k, n].
Var matmul(const Var& a, const Var& b);
/// Swaps the last two axes.
Var transpose(const Var& a);
Var permute(const Var& a, std::vector<std::size_t> axes);
Var reshape(const Var& a, Shape shape);
Var concat(std::span<const Var> parts, std::size_t axis);
std::vector<Var> split(const Var& a, std::size_t axis, std::span<const std::size_t> sizes);

/// Full reductions to a rank-0 tensor.
Var sum(const Var& a);
Var mean(const Var& a);
/// Reductions over the last axis; the axis is removed.
Var sum_last(const Var& a);
Var mean_last(const Var& a);
Var max_last(const Var& a);

Var abs(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
/// Exact (erf) GELU.
Var gelu(const Var& a);
/// Softmax over the last axis.
Var softmax(const Var& a);

inline constexpr double kLayerNormEps = 1e-5;
/// Normalizes the last axis to zero mean and unit variance; no affine terms.
Var layer_norm(const Var& a, double eps = kLayerNormEps);

}  // namespace adsm
