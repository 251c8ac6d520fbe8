#include <algorithm>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "adsm/checkpoint.hpp"
#include "adsm/config.hpp"
#include "adsm/dataset_io.hpp"
#include "adsm/errors.hpp"
#include "adsm/evaluation.hpp"
#include "adsm/mixture.hpp"
#include "adsm/scoring.hpp"
#include "adsm/synthetic.hpp"
#include "adsm/training.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace adsm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

KeyValues overrides(const std::string& base, const py::dict& kw) {
  KeyValues kv = preset(base);
  for (const auto& [k, v] : kw) {
    std::string value;
    if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "1" : "0";
    else value = py::str(v).cast<std::string>();
    kv[k.cast<std::string>()] = value;
  }
  return kv;
}

// Keyword arguments the command never read are typos, not silent no-ops.
void reject_unread(const ConfigReader& r, const py::kwargs& kw) {
  const auto unused = r.unused();
  for (const auto& [k, v] : kw) {
    const std::string key = k.cast<std::string>();
    if (std::find(unused.begin(), unused.end(), key) != unused.end())
      throw ContractViolation("unknown option '" + key + "'");
  }
}

std::vector<LabeledVideo> labeled(const std::vector<std::pair<std::vector<double>, std::vector<std::uint8_t>>>& v) {
  std::vector<LabeledVideo> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({"video_" + std::to_string(i), v[i].first, v[i].second});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Autoregressive denoising score matching for video anomaly detection";
  m.attr("__version__") = ADSM_VERSION;

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericFault>(m, "NumericFault", PyExc_ArithmeticError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

  m.def("preset", &preset, py::arg("name"), "Configuration keys of a named preset");

  m.def(
      "patchify",
      [](const Array& frames, std::size_t patch) { return to_array(patchify(to_tensor(frames), patch).tokens); },
      py::arg("frames"), py::arg("patch"), "[n, H, W, c] frames to [N, d*d*c] tokens");
  m.def(
      "motion_weights",
      [](const Array& frames, std::size_t patch) { return motion_weights(to_tensor(frames), patch).weights; },
      py::arg("frames"), py::arg("patch"), "Per-token key-frame motion weights");
  m.def(
      "noise_schedule",
      [](double sigma_min, double sigma_max, std::size_t levels, const std::string& mode) {
        if (mode == "geometric") return build_noise_schedule(sigma_min, sigma_max, levels).levels;
        if (mode == "linear") return build_linear_schedule(sigma_min, sigma_max, levels).levels;
        throw ContractViolation("schedule must be geometric or linear");
      },
      py::arg("sigma_min") = 0.001, py::arg("sigma_max") = 1.0, py::arg("levels") = 20,
      py::arg("mode") = "geometric");
  m.def(
      "psnr", [](const Array& a, const Array& b, double peak) { return psnr(to_tensor(a), to_tensor(b), peak); },
      py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);

  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
        return roc_auc(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "micro_auc", [](const std::vector<std::pair<std::vector<double>, std::vector<std::uint8_t>>>& v) {
        return micro_auc(labeled(v));
      },
      py::arg("videos"), "Pooled AUC over (scores, labels) pairs");
  m.def(
      "macro_auc",
      [](const std::vector<std::pair<std::vector<double>, std::vector<std::uint8_t>>>& v) {
        const MacroAuc r = macro_auc(labeled(v));
        return py::make_tuple(r.value, r.excluded);
      },
      py::arg("videos"), "Mean per-video AUC and the excluded single-class videos");

  m.def(
      "mixture_score",
      [](const std::string& spec, double x, double y) {
        const FieldPoint p = mixture_score_at(GaussianMixture2D::parse(spec), {x, y});
        py::dict d;
        d["density"] = p.density;
        d["score"] = py::make_tuple(p.score[0], p.score[1]);
        d["norm"] = p.norm;
        return d;
      },
      py::arg("spec"), py::arg("x"), py::arg("y"));
  m.def(
      "mixture_mode",
      [](const std::string& spec, double x, double y) {
        const auto p = mean_shift_mode(GaussianMixture2D::parse(spec), {x, y});
        return py::make_tuple(p[0], p[1]);
      },
      py::arg("spec"), py::arg("x"), py::arg("y"), "Stationary point reached by mean shift");

  m.def("read_video", [](const fs::path& p) { return to_array(read_video_file(p)); }, py::arg("path"));

  m.def(
      "generate",
      [](const fs::path& out, const std::string& base, const py::kwargs& kw) {
        const KeyValues kv = overrides(base, kw);
        ConfigReader r(kv);
        SyntheticDatasetSpec spec;
        apply_config(r, spec);
        reject_unread(r, kw);
        spec.validate();
        const SyntheticDataset ds = generate_synthetic_dataset(spec);
        write_dataset(out, ds);
        return py::make_tuple(ds.train.size(), ds.test.size(), ds.events.size());
      },
      py::arg("out"), py::arg("preset") = "tiny", "Writes a synthetic dataset; returns (train, test, events)");
  m.def(
      "train",
      [](const fs::path& data, const fs::path& out, const std::string& base, const py::kwargs& kw) {
        KeyValues kv = overrides(base, kw);
        kv["data"] = data.string();
        ConfigReader r(kv);
        TrainConfig tc;
        apply_config(r, tc);
        reject_unread(r, kw);
        NcstCheckpoint ckpt;
        {
          py::gil_scoped_release release;
          ckpt = train(tc);
        }
        save_checkpoint(ckpt, out);
        return ckpt.meta.loss_history;
      },
      py::arg("data"), py::arg("out"), py::arg("preset") = "tiny", "Trains a checkpoint; returns per-epoch loss");
  m.def(
      "score",
      [](const fs::path& ckpt_path, const fs::path& data, const fs::path& out, const std::string& base,
         const py::kwargs& kw) {
        const KeyValues kv = overrides(base, kw);
        ConfigReader r(kv);
        ScoreConfig sc;
        apply_config(r, sc);
        reject_unread(r, kw);
        const NcstCheckpoint ckpt = load_checkpoint(ckpt_path);
        const NcstModel model = ckpt.to_model();
        sc.patch = model.config().patch;
        const NcstScoreModel scorer(model);
        std::vector<VideoScores> scored;
        {
          py::gil_scoped_release release;
          for (const auto& v : read_split(data / "test")) {
            check_geometry(model.config(), v);
            scored.push_back(score_video(v, scorer, sc, model.config().frames));
          }
        }
        fs::create_directories(out);
        write_raw_scores(out / "scores_raw.csv", scored);
        write_final_scores(out / "scores_final.csv", scored);
        py::dict result;
        for (const auto& v : scored) result[py::str(v.video_id)] = v.indicator;
        return result;
      },
      py::arg("ckpt"), py::arg("data"), py::arg("out"), py::arg("preset") = "tiny",
      "Scores the test split; returns the per-frame indicator of each video");
}
