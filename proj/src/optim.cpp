#include "adsm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adsm/errors.hpp"

namespace adsm {

AdamaxState AdamaxState::for_params(std::span<const Parameter> params) {
  AdamaxState s;
  for (const auto& p : params) {
    s.m.push_back(Tensor::zeros(p.value.shape()));
    s.u.push_back(Tensor::zeros(p.value.shape()));
  }
  return s;
}

void adamax_step(std::span<Parameter> params, std::span<const Tensor> grads,
                 AdamaxState& state, double lr) {
  ADSM_REQUIRE(lr > 0.0, "adamax_step: learning rate must be positive");
  ADSM_REQUIRE(params.size() == grads.size() && params.size() == state.m.size() &&
                   params.size() == state.u.size(),
               "adamax_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i)
    ADSM_REQUIRE(params[i].value.shape() == grads[i].shape() &&
                     params[i].value.shape() == state.m[i].shape() &&
                     params[i].value.shape() == state.u[i].shape(),
                 "adamax_step: shape mismatch for parameter " + params[i].name);

  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double step_size = lr / (1.0 - std::pow(b1, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto u = state.u[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      u[j] = std::max(b2 * u[j], std::abs(g[j]));
      p[j] -= step_size * m[j] / (u[j] + state.eps);
    }
  }
}

double cosine_anneal_lr(std::size_t epoch, std::size_t total_epochs, double lr0) {
  ADSM_REQUIRE(total_epochs > 0, "cosine_anneal_lr: total_epochs must be positive");
  ADSM_REQUIRE(epoch <= total_epochs, "cosine_anneal_lr: epoch beyond schedule");
  ADSM_REQUIRE(lr0 > 0.0, "cosine_anneal_lr: lr0 must be positive");
  const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return std::max(0.0, lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.data()) v *= f;
  }
  return norm;
}

}  // namespace adsm
