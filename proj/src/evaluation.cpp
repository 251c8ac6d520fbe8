#include "adsm/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "adsm/errors.hpp"

namespace adsm {

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  ADSM_REQUIRE(scores.size() == labels.size(), "roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      ADSM_REQUIRE(labels[idx[k]] <= 1, "roc_auc: labels must be 0 or 1");
      if (labels[idx[k]]) {
        pos_rank_sum += midrank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw DataError("undefined AUC: labels contain a single class");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double micro_auc(std::span<const LabeledVideo> videos) {
  std::vector<double> s;
  std::vector<std::uint8_t> l;
  for (const auto& v : videos) {
    ADSM_REQUIRE(v.scores.size() == v.labels.size(), "micro_auc: video " + v.video_id + " has mismatched lengths");
    s.insert(s.end(), v.scores.begin(), v.scores.end());
    l.insert(l.end(), v.labels.begin(), v.labels.end());
  }
  return roc_auc(s, l);
}

MacroAuc macro_auc(std::span<const LabeledVideo> videos) {
  MacroAuc out;
  double total = 0.0;
  for (const auto& v : videos) {
    ADSM_REQUIRE(v.scores.size() == v.labels.size(), "macro_auc: video " + v.video_id + " has mismatched lengths");
    const bool any_pos = std::any_of(v.labels.begin(), v.labels.end(), [](auto x) { return x != 0; });
    const bool any_neg = std::any_of(v.labels.begin(), v.labels.end(), [](auto x) { return x == 0; });
    if (!any_pos || !any_neg) {
      out.excluded.push_back(v.video_id);
      continue;
    }
    const double a = roc_auc(v.scores, v.labels);
    out.per_video.push_back(a);
    out.evaluated.push_back(v.video_id);
    total += a;
  }
  if (out.evaluated.empty()) throw DataError("undefined macro AUC: no video contains both normal and anomalous frames");
  out.value = total / static_cast<double>(out.evaluated.size());
  return out;
}

}  // namespace adsm
