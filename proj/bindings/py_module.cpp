// Python bindings for the main pipeline operations: the full CLI surface,
// artifact access as numpy arrays, checkpoint inference and the error
// metrics. Heavy calls release the GIL.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "p2pi/cli/cli.hpp"
#include "p2pi/common/error.hpp"
#include "p2pi/core/types.hpp"
#include "p2pi/eval/eval.hpp"
#include "p2pi/ingest/ingest.hpp"
#include "p2pi/model/model.hpp"
#include "p2pi/preprocess/artifacts.hpp"
#include "p2pi/preprocess/preprocess.hpp"

namespace py = pybind11;
using namespace p2pi;

namespace {

py::array_t<double> series_to_array(const core::Series& s) {
  py::array_t<double> out({static_cast<py::ssize_t>(s.frames()),
                           static_cast<py::ssize_t>(s.width())});
  double* dst = out.mutable_data();
  for (std::size_t i = 0; i < s.frames(); ++i) {
    const auto row = s.row(i);
    std::memcpy(dst + i * row.size(), row.data(), row.size() * sizeof(double));
  }
  return out;
}

using DenseArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// Rows become frames on the canonical 10 ms grid starting at t = 0.
core::Series array_to_series(const DenseArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array of shape [frames, width]");
  const py::ssize_t frames = a.shape(0);
  const py::ssize_t width = a.shape(1);
  core::Series s(static_cast<int>(width));
  const double* src = a.data();
  for (py::ssize_t i = 0; i < frames; ++i) {
    s.push_back(static_cast<double>(i) * preprocess::kGridPeriod,
                std::span<const double>(src + i * width, static_cast<std::size_t>(width)));
  }
  return s;
}

eval::JointErrorMatrix array_to_errors(const DenseArray& a) {
  if (a.ndim() != 2 || a.shape(1) != core::kJointCount) {
    throw ShapeError("expected an error array of shape [frames, 21]");
  }
  eval::JointErrorMatrix m;
  m.frames = static_cast<std::size_t>(a.shape(0));
  m.values.assign(a.data(), a.data() + a.size());
  return m;
}

}  // namespace

PYBIND11_MODULE(_p2pi, m) {
  m.doc() = "Insole-pressure-to-skeleton pipeline";
  m.attr("__version__") = cli::kToolVersion;
  m.attr("GRID_PERIOD") = preprocess::kGridPeriod;

  py::register_exception<Error>(m, "PipelineError");

  m.def(
      "cli_run", [](const std::vector<std::string>& args) { return cli::run(args); },
      py::arg("args"), py::call_guard<py::gil_scoped_release>(),
      "Run one CLI subcommand in-process; returns the process exit code.");

  m.def(
      "amplifier_gain",
      [](double r1_ohm, double r2_ohm) {
        ingest::AmplifierParams p;
        p.r1_ohm = r1_ohm;
        p.r2_ohm = r2_ohm;
        return ingest::amplifier_gain(p);
      },
      py::arg("r1_ohm"), py::arg("r2_ohm"),
      "Non-inverting amplifier gain 1 + r2/r1.");

  m.def(
      "task_ids",
      [] {
        std::vector<std::string> ids;
        for (core::TaskLabel t : eval::report_task_order()) {
          ids.emplace_back(core::task_id(t));
        }
        return ids;
      },
      "Identifiers of the recorded movement tasks, in report order.");

  m.def(
      "load_artifacts",
      [](const std::string& dir) {
        preprocess::DatasetArtifacts art;
        {
          py::gil_scoped_release release;
          art = preprocess::load_artifacts(dir);
        }
        py::list recordings;
        for (const auto& rec : art.recordings) {
          py::dict r;
          r["name"] = rec.name;
          r["task"] = std::string(core::task_id(rec.task));
          r["first_index"] = rec.first_index;
          r["features"] = series_to_array(rec.features);
          r["skeleton"] = series_to_array(rec.skeleton);
          recordings.append(std::move(r));
        }
        py::dict out;
        out["with_derivatives"] = art.with_derivatives;
        out["split_ratio"] = art.split_ratio;
        out["grid_period"] = art.grid_period;
        out["feature_width"] = art.feature_width();
        out["recordings"] = std::move(recordings);
        return out;
      },
      py::arg("directory"),
      "Load a preprocessed artifact directory; tensors come back as numpy arrays.");

  m.def(
      "predict",
      [](const std::string& checkpoint_path, const DenseArray& features) {
        const core::Series f = array_to_series(features);
        core::SkeletonSeries skel;
        {
          py::gil_scoped_release release;
          const model::Checkpoint ckpt = model::load_checkpoint(checkpoint_path);
          skel = model::predict_series(ckpt.weights, ckpt.config, f, ckpt.target_scaler);
        }
        return series_to_array(skel);
      },
      py::arg("checkpoint_path"), py::arg("features"),
      "Skeleton predictions [frames, 63] in millimeters from already "
      "standardized feature rows [frames, input_width].");

  m.def(
      "joint_errors",
      [](const DenseArray& pred, const DenseArray& truth) {
        const core::Series p = array_to_series(pred);
        const core::Series t = array_to_series(truth);
        const eval::JointErrorMatrix m2 = eval::joint_errors(p, t);
        py::array_t<double> out({static_cast<py::ssize_t>(m2.frames),
                                 static_cast<py::ssize_t>(m2.joints)});
        std::memcpy(out.mutable_data(), m2.values.data(),
                    m2.values.size() * sizeof(double));
        return out;
      },
      py::arg("pred"), py::arg("truth"),
      "Per-frame, per-joint Euclidean distances in millimeters.");

  m.def(
      "rmse", [](const DenseArray& errors) { return eval::rmse(array_to_errors(errors)); },
      py::arg("errors"), "Root-mean-square of a [frames, 21] error array.");

  m.def(
      "median_std",
      [](const DenseArray& errors) { return eval::median_std(array_to_errors(errors)); },
      py::arg("errors"), "(median, population std) of a [frames, 21] error array.");
}
