#include "adsm/ablation.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "adsm/errors.hpp"

namespace adsm {

namespace {

constexpr std::array<AblationVariant, 6> kVariants{{
    {"DSM", false, false, false, false},
    {"+ADSM", true, false, false, false},
    {"ADSM+Scene", true, true, false, false},
    {"ADSM+Motion", true, false, true, false},
    {"ADSM+Appearance", true, false, false, true},
    {"All", true, true, true, true},
}};

std::string checkpoint_name(bool scene, bool motion) {
  return std::string("scene") + (scene ? "1" : "0") + "_motion" + (motion ? "1" : "0");
}

}  // namespace

std::span<const AblationVariant> ablation_variants() { return kVariants; }

LabeledVideo label_indicator(const VideoScores& vs, std::span<const std::uint8_t> labels,
                             std::vector<double> indicator) {
  if (labels.size() < indicator.size())
    throw DataError("labels for " + vs.video_id + " cover " + std::to_string(labels.size()) + " frames, scores cover " +
                    std::to_string(indicator.size()));
  LabeledVideo lv;
  lv.video_id = vs.video_id;
  lv.labels.assign(labels.begin(), labels.begin() + static_cast<long>(indicator.size()));
  lv.scores = std::move(indicator);
  return lv;
}

std::vector<AblationRow> ablation_run(std::span<const VideoSequence> test, const ModelLookup& models,
                                      const ScoreConfig& base, std::size_t window) {
  std::map<std::array<bool, 3>, std::vector<VideoScores>> passes;
  auto pass = [&](bool scene, bool motion, bool ar) -> const std::vector<VideoScores>* {
    const ScoreModel* model = models(scene, motion);
    if (!model) return nullptr;
    auto key = std::array<bool, 3>{scene, motion, ar};
    auto it = passes.find(key);
    if (it == passes.end()) {
      ScoreConfig cfg = base;
      cfg.autoregressive = ar;
      std::vector<VideoScores> scored;
      for (const auto& v : test) scored.push_back(score_video(v, *model, cfg, window));
      it = passes.emplace(key, std::move(scored)).first;
    }
    return &it->second;
  };

  std::vector<AblationRow> rows;
  for (const auto& variant : kVariants) {
    AblationRow row;
    row.variant = variant;
    const auto* scored = pass(variant.scene, variant.motion, variant.autoregressive);
    if (!scored) {
      row.note = "checkpoint " + checkpoint_name(variant.scene, variant.motion) + " absent";
      rows.push_back(std::move(row));
      continue;
    }
    row.present = true;
    std::vector<LabeledVideo> labeled;
    for (std::size_t k = 0; k < scored->size(); ++k) {
      const auto& vs = (*scored)[k];
      labeled.push_back(label_indicator(vs, test[k].frame_labels,
                                        finalize_indicator(vs, variant.appearance, base.fusion_weights, base.clip_frames)));
    }
    try {
      row.micro_auc = micro_auc(labeled);
      MacroAuc m = macro_auc(labeled);
      row.macro_auc = m.value;
      row.excluded = std::move(m.excluded);
    } catch (const DataError& e) {
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

AblationResult run_ablation_experiment(const AblationExperiment& exp,
                                       const std::function<void(const std::string&)>& log) {
  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  SyntheticDataset ds = generate_synthetic_dataset(exp.data);
  say("generated " + std::to_string(ds.train.size()) + " train / " + std::to_string(ds.test.size()) +
      " test videos, " + std::to_string(ds.events.size()) + " injected events");

  NcstConfig mc = exp.train.model;
  mc.sigma_min = exp.train.sigma_min;
  mc.sigma_max = exp.train.sigma_max;
  mc.scene_classes = std::max(mc.scene_classes, exp.data.scenes);
  const std::vector<TrainWindow> windows = make_windows(ds.train, mc.frames);

  AblationResult result;
  std::map<std::pair<bool, bool>, std::unique_ptr<NcstModel>> trained;
  std::map<std::pair<bool, bool>, std::unique_ptr<NcstScoreModel>> scorers;
  for (bool scene : {false, true})
    for (bool motion : {false, true}) {
      TrainConfig tc = exp.train;
      tc.model = mc;
      tc.model.scene_condition = scene;
      tc.scene_condition = scene;
      tc.motion_weights = motion;
      auto model = std::make_unique<NcstModel>(tc.model, tc.seed);
      AdamaxState state;
      const std::string name = checkpoint_name(scene, motion);
      TrainingMetadata meta = train_model(*model, windows, tc, state, [&](const EpochReport& r) {
        if (r.epoch == 1 || r.epoch == tc.epochs || r.epoch % 10 == 0) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "%s epoch %zu loss %.4f (%.1fs)", name.c_str(), r.epoch, r.mean_loss,
                        r.seconds);
          say(buf);
        }
      });
      result.training.emplace_back(name, std::move(meta));
      scorers[{scene, motion}] = std::make_unique<NcstScoreModel>(*model);
      trained[{scene, motion}] = std::move(model);
    }

  result.rows = ablation_run(
      ds.test,
      [&](bool scene, bool motion) -> const ScoreModel* {
        auto it = scorers.find({scene, motion});
        return it == scorers.end() ? nullptr : it->second.get();
      },
      exp.score, mc.frames);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_ablation_report(const std::filesystem::path& file, std::span<const AblationRow> rows) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << "variant,micro_auc,macro_auc,excluded_videos\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.variant.name << ',';
    if (r.present && !std::isnan(r.micro_auc)) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g", r.micro_auc, r.macro_auc);
      out << buf;
    } else {
      out << "NA,NA";
    }
    out << ',';
    for (std::size_t i = 0; i < r.excluded.size(); ++i) out << (i ? ";" : "") << r.excluded[i];
    out << '\n';
  }
}

}  // namespace adsm
