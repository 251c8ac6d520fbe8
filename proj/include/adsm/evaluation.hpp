#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace adsm {

/// Area under the ROC curve as the Mann-Whitney statistic
/// P(pos > neg) + P(tie)/2, via midranks. Labels are 0/1; throws DataError
/// if only one class is present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct LabeledVideo {
  std::string video_id;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

/// AUC over the frames of all videos pooled together.
double micro_auc(std::span<const LabeledVideo> videos);

struct MacroAuc {
  double value = 0.0;
  std::vector<double> per_video;        // aligned with `evaluated`
  std::vector<std::string> evaluated;
  std::vector<std::string> excluded;    // videos with a single label class
};

/// Mean of the per-video AUCs; single-class videos are excluded and listed.
MacroAuc macro_auc(std::span<const LabeledVideo> videos);

}  // namespace adsm
