#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "adsm/checkpoint.hpp"
#include "adsm/evaluation.hpp"
#include "adsm/scoring.hpp"
#include "adsm/synthetic.hpp"
#include "adsm/training.hpp"

namespace adsm {

struct AblationVariant {
  const char* name;
  bool autoregressive;
  bool scene;       // needs a scene-conditioned checkpoint
  bool motion;      // needs a motion-weighted checkpoint
  bool appearance;  // PSNR denominator
};

/// The six rows in table order: DSM, +ADSM, ADSM+Scene, ADSM+Motion,
/// ADSM+Appearance, All.
std::span<const AblationVariant> ablation_variants();

struct AblationRow {
  AblationVariant variant{};
  bool present = false;  // false when its checkpoint was missing
  double micro_auc = std::numeric_limits<double>::quiet_NaN();
  double macro_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> excluded;
  std::string note;
};

/// Returns the score model trained with the given (scene, motion) switches,
/// or nullptr if there is none.
using ModelLookup = std::function<const ScoreModel*(bool scene, bool motion)>;

/// Pairs each scored video with the labels of its covered frames.
LabeledVideo label_indicator(const VideoScores& vs, std::span<const std::uint8_t> labels,
                             std::vector<double> indicator);

/// Scores `test` once per distinct (checkpoint, autoregressive) pair and
/// derives every row from those passes.
std::vector<AblationRow> ablation_run(std::span<const VideoSequence> test, const ModelLookup& models,
                                      const ScoreConfig& base, std::size_t window);

struct AblationExperiment {
  SyntheticDatasetSpec data;
  TrainConfig train;  // motion_weights / scene_condition are set per checkpoint
  ScoreConfig score;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::pair<std::string, TrainingMetadata>> training;  // per checkpoint
  double seconds = 0.0;
};

/// Generates the benchmark, trains the four checkpoints and runs the table.
AblationResult run_ablation_experiment(const AblationExperiment& exp,
                                       const std::function<void(const std::string&)>& log = {});

/// variant,micro_auc,macro_auc,excluded_videos
void write_ablation_report(const std::filesystem::path& file, std::span<const AblationRow> rows);

}  // namespace adsm
