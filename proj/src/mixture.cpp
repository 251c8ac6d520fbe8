#include "adsm/mixture.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "adsm/errors.hpp"

namespace adsm {

void GaussianMixture2D::validate() const {
  ADSM_REQUIRE(!components.empty(), "mixture: no components");
  double total = 0.0;
  for (const auto& c : components) {
    ADSM_REQUIRE(c.weight > 0.0, "mixture: weights must be positive");
    ADSM_REQUIRE(c.variance > 0.0, "mixture: variances must be positive");
    ADSM_REQUIRE(std::isfinite(c.mean[0]) && std::isfinite(c.mean[1]), "mixture: non-finite mean");
    total += c.weight;
  }
  ADSM_REQUIRE(std::abs(total - 1.0) <= 1e-9, "mixture: weights must sum to 1");
}

GaussianMixture2D GaussianMixture2D::parse(std::string_view spec) {
  GaussianMixture2D m;
  std::stringstream ss{std::string(spec)};
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.find_first_not_of(" \t") == std::string::npos) continue;
    MixtureComponent c;
    char sep[3];
    std::istringstream is(part);
    if (!(is >> c.weight >> sep[0] >> c.mean[0] >> sep[1] >> c.mean[1] >> sep[2] >> c.variance) || sep[0] != ':' ||
        sep[1] != ':' || sep[2] != ':')
      throw ContractViolation("mixture component '" + part + "' is not w:mx:my:var");
    is >> std::ws;
    if (!is.eof()) throw ContractViolation("trailing text in mixture component '" + part + "'");
    m.components.push_back(c);
  }
  m.validate();
  return m;
}

std::string GaussianMixture2D::to_spec() const {
  std::string s;
  char buf[128];
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    std::snprintf(buf, sizeof buf, "%s%.17g:%.17g:%.17g:%.17g", i ? ";" : "", c.weight, c.mean[0], c.mean[1],
                  c.variance);
    s += buf;
  }
  return s;
}

FieldPoint mixture_score_at(const GaussianMixture2D& m, std::array<double, 2> x) {
  // log-sum-exp over components keeps the far tails finite
  std::vector<double> logs(m.components.size());
  double top = -INFINITY;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const auto& c = m.components[k];
    const double dx = x[0] - c.mean[0], dy = x[1] - c.mean[1];
    logs[k] = std::log(c.weight) - std::log(2.0 * std::numbers::pi * c.variance) - 0.5 * (dx * dx + dy * dy) / c.variance;
    top = std::max(top, logs[k]);
  }
  double total = 0.0;
  for (double l : logs) total += std::exp(l - top);
  FieldPoint fp;
  fp.x = x;
  fp.log_density = top + std::log(total);
  fp.density = std::exp(fp.log_density);
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const auto& c = m.components[k];
    const double r = std::exp(logs[k] - fp.log_density);
    fp.score[0] -= r * (x[0] - c.mean[0]) / c.variance;
    fp.score[1] -= r * (x[1] - c.mean[1]) / c.variance;
  }
  fp.norm = std::hypot(fp.score[0], fp.score[1]);
  return fp;
}

std::vector<FieldPoint> mixture_score_field(const GaussianMixture2D& m, std::span<const std::array<double, 2>> points) {
  m.validate();
  std::vector<FieldPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(mixture_score_at(m, p));
  return out;
}

std::array<double, 2> mean_shift_mode(const GaussianMixture2D& m, std::array<double, 2> start, double tol,
                                      int max_iter) {
  m.validate();
  std::array<double, 2> x = start;
  for (int it = 0; it < max_iter; ++it) {
    const FieldPoint fp = mixture_score_at(m, x);
    double num0 = 0.0, num1 = 0.0, den = 0.0;
    for (const auto& c : m.components) {
      const double dx = x[0] - c.mean[0], dy = x[1] - c.mean[1];
      const double r = c.weight / (2.0 * std::numbers::pi * c.variance) *
                       std::exp(-0.5 * (dx * dx + dy * dy) / c.variance - fp.log_density);
      num0 += r * c.mean[0] / c.variance;
      num1 += r * c.mean[1] / c.variance;
      den += r / c.variance;
    }
    const std::array<double, 2> next{num0 / den, num1 / den};
    const double step = std::hypot(next[0] - x[0], next[1] - x[1]);
    x = next;
    if (step <= tol) break;
  }
  return x;
}

std::vector<std::array<double, 2>> square_grid(double extent, std::size_t resolution, std::array<double, 2> center) {
  ADSM_REQUIRE(extent > 0.0 && resolution >= 2, "square_grid: need extent > 0 and resolution >= 2");
  std::vector<std::array<double, 2>> pts;
  pts.reserve(resolution * resolution);
  const double step = 2.0 * extent / static_cast<double>(resolution - 1);
  for (std::size_t r = 0; r < resolution; ++r)
    for (std::size_t c = 0; c < resolution; ++c)
      pts.push_back({center[0] - extent + step * static_cast<double>(c),
                     center[1] + extent - step * static_cast<double>(r)});
  return pts;
}

}  // namespace adsm
