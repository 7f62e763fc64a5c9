#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <sstream>

#include "avfusion/cli.hpp"
#include "avfusion/errors.hpp"
#include "avfusion/evaluation.hpp"
#include "avfusion/io.hpp"
#include "avfusion/training.hpp"

namespace py = pybind11;
using namespace avf;

namespace {

// Trained head plus classifier, shareable with Python.
struct PyModel {
  std::shared_ptr<FusionHead> head;
  ArcMarginHead arc;
  std::vector<std::string> class_ids;
  io::Provenance provenance;
  std::vector<EpochRecord> history;

  std::string kind() const { return std::string(to_string(head->kind())); }

  Vector embed(std::optional<Vector> audio, std::optional<Vector> video) const {
    return head->embed(ModalityInput{std::move(audio), std::move(video)});
  }

  void save(const std::filesystem::path& path) const {
    io::save_checkpoint(path, *head, arc, class_ids, provenance);
  }
};

py::list history_list(const std::vector<EpochRecord>& history) {
  py::list out;
  for (const auto& r : history) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["train_loss"] = r.train_loss;
    d["val_accuracy"] = r.val_accuracy;
    d["learning_rate"] = r.learning_rate;
    d["is_best"] = r.is_best;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_avfusion, m) {
  m.doc() = "Audio-visual embedding fusion heads";

  static py::exception<Error> base(m, "AvfusionError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const HeadKindError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<Sample>(m, "Sample")
      .def(py::init<std::string, std::string, Vector, Vector>(), py::arg("identity_id"), py::arg("sample_id"),
           py::arg("audio"), py::arg("video"))
      .def_readwrite("identity_id", &Sample::identity_id)
      .def_readwrite("sample_id", &Sample::sample_id)
      .def_readwrite("audio", &Sample::audio)
      .def_readwrite("video", &Sample::video)
      .def("__eq__", [](const Sample& a, const Sample& b) { return a == b; })
      .def("__repr__", [](const Sample& s) { return "<Sample " + s.identity_id + "/" + s.sample_id + ">"; });

  m.def(
      "generate",
      [](std::size_t identities, std::size_t samples_per_identity, std::size_t audio_dim, std::size_t video_dim,
         double audio_sigma, double video_sigma, std::uint64_t seed) {
        DatasetConfig c;
        c.n_identities = identities;
        c.samples_per_identity = samples_per_identity;
        c.audio_dim = audio_dim;
        c.video_dim = video_dim;
        c.audio_noise_sigma = audio_sigma;
        c.video_noise_sigma = video_sigma;
        c.seed = seed;
        c.validate();
        return sample_dataset(generate_identities(c), c);
      },
      py::arg("identities") = 50, py::arg("samples_per_identity") = 40, py::arg("audio_dim") = 16,
      py::arg("video_dim") = 32, py::arg("audio_sigma") = 0.45, py::arg("video_sigma") = 0.25,
      py::arg("seed") = 4242, "Sample a synthetic audio/video embedding dataset.");

  m.def(
      "split",
      [](const std::vector<Sample>& samples, double val_fraction, std::uint64_t seed) {
        auto s = split_dataset(samples, val_fraction, seed);
        return py::make_tuple(s.train, s.val);
      },
      py::arg("samples"), py::arg("val_fraction"), py::arg("seed"), "Identity-stratified split; returns (train, val).");

  m.def("write_embeddings", &io::write_embeddings, py::arg("path"), py::arg("samples"));
  m.def("read_embeddings", &io::read_embeddings, py::arg("path"));

  py::class_<EerResult>(m, "EerResult")
      .def_readonly("eer", &EerResult::eer)
      .def_readonly("threshold", &EerResult::threshold)
      .def_readonly("n_target", &EerResult::n_target)
      .def_readonly("n_nontarget", &EerResult::n_nontarget);

  m.def(
      "compute_eer", [](const std::vector<double>& scores, const std::vector<bool>& labels) {
        return compute_eer(scores, labels);
      },
      py::arg("scores"), py::arg("labels"), "Equal error rate of verification scores (label True = target).");

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", &PyModel::kind)
      .def_readonly("class_ids", &PyModel::class_ids)
      .def_property_readonly("history", [](const PyModel& p) { return history_list(p.history); })
      .def_property_readonly("best_epoch", [](const PyModel& p) { return p.provenance.epoch; })
      .def_property_readonly("parameter_count", [](const PyModel& p) { return p.head->parameter_count(); })
      .def("embed", &PyModel::embed, py::arg("audio") = py::none(), py::arg("video") = py::none(),
           "Eval-mode embedding; a missing modality is fed as NULL.")
      .def("save", &PyModel::save, py::arg("path"));

  m.def(
      "train",
      [](const std::string& head, const std::vector<Sample>& train, const std::vector<Sample>& val,
         std::size_t epochs, std::size_t batch_size, double learning_rate, double dropout, std::size_t embed_dim,
         std::size_t hidden_dim, std::uint64_t seed) {
        if (train.empty()) throw DegenerateInputError("train: empty training set");
        TrainingConfig cfg;
        cfg.max_epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.dropout = dropout;
        cfg.seed = seed;
        cfg.validate();
        const HeadDims dims{train.front().audio.size(), train.front().video.size(), embed_dim, hidden_dim};
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train_run(parse_head_kind(head), dims, train, val, cfg);
        }
        PyModel out;
        out.head = std::shared_ptr<FusionHead>(std::move(r.best.head));
        out.arc = r.best.arc;
        out.class_ids = r.class_ids;
        out.history = r.history;
        out.provenance.epoch = r.best_epoch;
        out.provenance.val_accuracy = r.best_epoch > 0 ? r.history[r.best_epoch - 1].val_accuracy : 0.0;
        out.provenance.seed = seed;
        return out;
      },
      py::arg("head"), py::arg("train"), py::arg("val"), py::arg("epochs") = 10, py::arg("batch_size") = 128,
      py::arg("learning_rate") = 0.001, py::arg("dropout") = 0.1, py::arg("embed_dim") = 8,
      py::arg("hidden_dim") = 24, py::arg("seed") = 4242, "Train a mean, mlp or multiview head.");

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        auto ck = io::load_checkpoint(path);
        PyModel out;
        out.head = std::shared_ptr<FusionHead>(std::move(ck.head));
        out.arc = ck.arc;
        out.class_ids = ck.class_ids;
        out.provenance = ck.provenance;
        return out;
      },
      py::arg("path"));

  m.def(
      "evaluate",
      [](const PyModel& model, const std::vector<Sample>& samples, std::size_t n_positive, std::size_t n_negative,
         std::uint64_t seed) {
        const auto r = run_full_evaluation(*model.head, samples, {n_positive, n_negative, seed});
        py::dict eer;
        for (const auto& mr : r.modes) eer[py::str(std::string(to_string(mr.mode)))] = mr.eer.eer;
        py::dict out;
        out["eer"] = eer;
        out["silhouette_audio"] = r.silhouette_audio;
        out["silhouette_video"] = r.silhouette_video;
        out["audio_video_angles"] = r.audio_video.all();
        out["warnings"] = r.warnings;
        return out;
      },
      py::arg("model"), py::arg("samples"), py::arg("n_positive") = 500, py::arg("n_negative") = 500,
      py::arg("seed") = 4242, "EER in all six modality modes plus angle and silhouette diagnostics.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
