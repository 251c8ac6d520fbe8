#include "adsm/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "adsm/errors.hpp"

namespace adsm {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// A few viridis stops, linearly interpolated.
std::string colormap(double t) {
  static constexpr std::array<std::array<int, 3>, 5> stops{
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> anomalous_runs(std::span<const std::uint8_t> labels) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < labels.size();) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < labels.size() && labels[j]) ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  return runs;
}

std::string score_curve_svg(const std::string& title, std::span<const double> indicator,
                            std::span<const std::uint8_t> labels) {
  constexpr double W = 640, H = 240, L = 48, R = 16, T = 28, B = 32;
  const double pw = W - L - R, ph = H - T - B;
  const std::size_t n = std::max<std::size_t>(indicator.size(), 1);
  auto xf = [&](double f) { return L + pw * f / static_cast<double>(n); };
  auto yf = [&](double v) { return T + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"240\" viewBox=\"0 0 640 240\">\n";
  s += "<rect width=\"640\" height=\"240\" fill=\"white\"/>\n";
  s += "<text x=\"" + f2(L) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" + escape(title) + "</text>\n";
  // only the frames that carry a score are shaded
  const std::span<const std::uint8_t> shown = labels.first(std::min(labels.size(), indicator.size()));
  for (const auto& [b, e] : anomalous_runs(shown))
    s += "<rect class=\"anomaly\" x=\"" + f2(xf(double(b))) + "\" y=\"" + f2(T) + "\" width=\"" +
         f2(xf(double(e)) - xf(double(b))) + "\" height=\"" + f2(ph) + "\" fill=\"#f4a6a6\" fill-opacity=\"0.6\"/>\n";
  s += "<rect x=\"" + f2(L) + "\" y=\"" + f2(T) + "\" width=\"" + f2(pw) + "\" height=\"" + f2(ph) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double v : {0.0, 0.5, 1.0})
    s += "<text x=\"" + f2(L - 6) + "\" y=\"" + f2(yf(v) + 4) +
         "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + f2(v) + "</text>\n";
  s += "<text x=\"" + f2(L + pw / 2) + "\" y=\"" + f2(H - 8) +
       "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">frame</text>\n";
  if (!indicator.empty()) {
    s += "<polyline fill=\"none\" stroke=\"#1f4e9a\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < indicator.size(); ++i) {
      s += f2(xf(double(i) + 0.5)) + "," + f2(yf(indicator[i]));
      s += i + 1 < indicator.size() ? " " : "";
    }
    s += "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::array<double, 4>> iso_segments(std::span<const double> field, std::size_t rows, std::size_t cols,
                                                double level) {
  ADSM_REQUIRE(field.size() == rows * cols, "iso_segments: field size differs from rows*cols");
  std::vector<std::array<double, 4>> segs;
  auto at = [&](std::size_t r, std::size_t c) { return field[r * cols + c]; };
  for (std::size_t r = 0; r + 1 < rows; ++r)
    for (std::size_t c = 0; c + 1 < cols; ++c) {
      // corners clockwise from the top-left, edges between consecutive corners
      const std::array<std::array<double, 2>, 4> p{{{double(c), double(r)},
                                                    {double(c + 1), double(r)},
                                                    {double(c + 1), double(r + 1)},
                                                    {double(c), double(r + 1)}}};
      const std::array<double, 4> v{at(r, c), at(r, c + 1), at(r + 1, c + 1), at(r + 1, c)};
      std::vector<std::array<double, 2>> cross;
      for (int e = 0; e < 4; ++e) {
        const double a = v[e], b = v[(e + 1) % 4];
        if ((a < level) == (b < level)) continue;
        const double t = (level - a) / (b - a);
        cross.push_back({p[e][0] + t * (p[(e + 1) % 4][0] - p[e][0]), p[e][1] + t * (p[(e + 1) % 4][1] - p[e][1])});
      }
      for (std::size_t k = 0; k + 1 < cross.size(); k += 2)
        segs.push_back({cross[k][0], cross[k][1], cross[k + 1][0], cross[k + 1][1]});
    }
  return segs;
}

std::string heatmap_svg(const std::string& title, std::span<const double> values, std::size_t rows, std::size_t cols,
                        std::span<const double> contour_field, std::span<const double> contour_levels) {
  ADSM_REQUIRE(values.size() == rows * cols && rows >= 2 && cols >= 2, "heatmap_svg: bad grid");
  ADSM_REQUIRE(contour_field.empty() || contour_field.size() == values.size(), "heatmap_svg: contour grid mismatch");
  constexpr double side = 480, margin = 32;
  const double cw = side / static_cast<double>(cols), ch = side / static_cast<double>(rows);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo > 0 ? *hi - *lo : 1.0;

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"544\" height=\"544\" viewBox=\"0 0 544 544\">\n";
  s += "<rect width=\"544\" height=\"544\" fill=\"white\"/>\n";
  s += "<text x=\"32\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" + escape(title) + "</text>\n";
  s += "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      s += "<rect x=\"" + f2(margin + cw * c) + "\" y=\"" + f2(margin + ch * r) + "\" width=\"" + f2(cw + 0.01) +
           "\" height=\"" + f2(ch + 0.01) + "\" fill=\"" + colormap((values[r * cols + c] - *lo) / range) + "\"/>\n";
  s += "</g>\n";
  if (!contour_field.empty()) {
    s += "<g class=\"contours\" stroke=\"white\" stroke-width=\"1\" fill=\"none\">\n";
    // cell centres sit at (c + 0.5) * cw
    for (double level : contour_levels)
      for (const auto& seg : iso_segments(contour_field, rows, cols, level))
        s += "<line x1=\"" + f2(margin + (seg[0] + 0.5) * cw) + "\" y1=\"" + f2(margin + (seg[1] + 0.5) * ch) +
             "\" x2=\"" + f2(margin + (seg[2] + 0.5) * cw) + "\" y2=\"" + f2(margin + (seg[3] + 0.5) * ch) + "\"/>\n";
    s += "</g>\n";
  }
  s += "<rect x=\"32\" y=\"32\" width=\"480\" height=\"480\" fill=\"none\" stroke=\"#444\"/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace adsm
