#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adsm {

struct MixtureComponent {
  double weight = 1.0;
  std::array<double, 2> mean{0.0, 0.0};
  double variance = 1.0;  // isotropic
};

struct GaussianMixture2D {
  std::vector<MixtureComponent> components;

  /// Weights positive and summing to 1 (within 1e-9), variances positive.
  void validate() const;

  /// "w:mx:my:var;w:mx:my:var;..."
  static GaussianMixture2D parse(std::string_view spec);
  std::string to_spec() const;
};

struct FieldPoint {
  std::array<double, 2> x{};
  double density = 0.0;
  double log_density = 0.0;
  std::array<double, 2> score{};  // grad log p
  double norm = 0.0;
};

FieldPoint mixture_score_at(const GaussianMixture2D& m, std::array<double, 2> x);
std::vector<FieldPoint> mixture_score_field(const GaussianMixture2D& m, std::span<const std::array<double, 2>> points);

/// Fixed point of the mean-shift map x <- sum_k r_k mu_k / v_k / sum_k r_k / v_k
/// started at `start`, where r_k are the responsibilities. Converges to a
/// stationary point of p (a mode for equal variances).
std::array<double, 2> mean_shift_mode(const GaussianMixture2D& m, std::array<double, 2> start,
                                      double tol = 1e-14, int max_iter = 10000);

/// Points of a square grid [-extent, extent]^2 with `resolution` per side,
/// row-major from the top-left (y descending).
std::vector<std::array<double, 2>> square_grid(double extent, std::size_t resolution,
                                               std::array<double, 2> center = {0.0, 0.0});

}  // namespace adsm
