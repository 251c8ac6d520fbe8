#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace adsm {

/// Indicator curve over frames with ground-truth anomalous runs shaded.
std::string score_curve_svg(const std::string& title, std::span<const double> indicator,
                            std::span<const std::uint8_t> labels);

/// Maximal runs [begin, end) of label 1.
std::vector<std::pair<std::size_t, std::size_t>> anomalous_runs(std::span<const std::uint8_t> labels);

/// Heat map of `values` (row-major, `rows` x `cols`, first row drawn on top)
/// with iso-lines of `contour_field` at `contour_levels`.
std::string heatmap_svg(const std::string& title, std::span<const double> values, std::size_t rows, std::size_t cols,
                        std::span<const double> contour_field, std::span<const double> contour_levels);

/// Line segments (x0, y0, x1, y1) in cell coordinates where `field` crosses
/// `level`, by marching squares.
std::vector<std::array<double, 4>> iso_segments(std::span<const double> field, std::size_t rows, std::size_t cols,
                                                double level);

}  // namespace adsm
