#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "seqcls/config.hpp"
#include "seqcls/data.hpp"
#include "seqcls/metrics.hpp"
#include "seqcls/training.hpp"

namespace py = pybind11;
using namespace seqcls;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

std::vector<int> to_labels(const IntArray& a) {
  if (a.ndim() != 1) throw ShapeError("labels must be one-dimensional");
  return {a.data(), a.data() + a.size()};
}

Tensor<double> to_probs(const DoubleArray& a) {
  if (a.ndim() != 2) throw ShapeError("probabilities must be [samples, classes]");
  return Tensor<double>({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                        std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict dataset_to_dict(const Dataset& ds) {
  const std::size_t n = ds.size(), len = ds.seq_len;
  py::array_t<float> signals({n, len});
  py::array_t<int> labels(static_cast<py::ssize_t>(n));
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(signals.mutable_data(static_cast<py::ssize_t>(i)), ds.samples[i].signal.data(), len * sizeof(float));
    labels.mutable_at(static_cast<py::ssize_t>(i)) = ds.samples[i].label;
    keys.push_back(ds.samples[i].key);
  }
  py::dict d;
  d["signals"] = signals;
  d["labels"] = labels;
  d["keys"] = keys;
  d["class_names"] = ds.class_names;
  if (ds.split) {
    py::array_t<std::uint8_t> split(static_cast<py::ssize_t>(n));
    for (std::size_t i = 0; i < n; ++i)
      split.mutable_at(static_cast<py::ssize_t>(i)) = static_cast<std::uint8_t>(ds.split->of_sample[i]);
    d["split"] = split;
    d["split_seed"] = ds.split->seed;
  } else {
    d["split"] = py::none();
  }
  return d;
}

py::dict metrics_to_dict(const MetricsReport& r) {
  auto row = [](const ClassMetrics& m) {
    py::dict d;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["f1"] = m.f1;
    return d;
  };
  py::dict per_class;
  for (std::size_t c = 0; c < r.per_class.size(); ++c)
    per_class[py::str(c < r.class_names.size() ? r.class_names[c] : std::to_string(c))] = row(r.per_class[c]);
  py::dict d;
  d["per_class"] = per_class;
  d["macro"] = row(r.macro);
  d["accuracy"] = r.accuracy;
  d["auc"] = r.auc ? py::cast(*r.auc) : py::none();
  d["warnings"] = r.warnings;
  return d;
}

ConfusionMatrix to_matrix(const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ShapeError("confusion matrix must be square");
  return ConfusionMatrix(static_cast<std::size_t>(a.shape(0)), std::vector<std::uint64_t>(a.data(), a.data() + a.size()));
}

struct Model {
  ModelState<float> state;

  py::array_t<double> predict(const FloatArray& batch) const {
    if (batch.ndim() != 2) throw ShapeError("batch must be [samples, time]");
    const std::size_t b = static_cast<std::size_t>(batch.shape(0)), t = static_cast<std::size_t>(batch.shape(1));
    Tensor<float> x({b, t, 1}, std::vector<float>(batch.data(), batch.data() + batch.size()));
    Tensor<float> p;
    {
      py::gil_scoped_release release;
      p = forward(state, x);
    }
    py::array_t<double> out({b, p.dim(1)});
    for (std::size_t i = 0; i < p.size(); ++i) out.mutable_data()[i] = p[i];
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_seqcls, m) {
  m.doc() = "EEG segment classification with dilated causal convolutions.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("synth_generate",
        [](std::size_t per_class, std::size_t length, double rate, std::uint64_t seed) {
          return dataset_to_dict(synth_generate(per_class, length, rate, seed));
        },
        py::arg("per_class"), py::arg("length"), py::arg("sample_rate") = 5000.0, py::arg("seed") = 0);

  m.def("read_container", [](const std::string& path) { return dataset_to_dict(container_read(path)); },
        py::arg("path"));

  m.def("split_counts",
        [](std::size_t n, double train, double val, double test) {
          const auto c = split_counts(n, {train, val, test});
          return py::make_tuple(c.train, c.val, c.test);
        },
        py::arg("n"), py::arg("train") = 0.7, py::arg("val") = 0.2, py::arg("test") = 0.1);

  m.def("split_dataset",
        [](std::size_t n, std::uint64_t seed, double train, double val, double test) {
          const auto s = split_dataset(n, {train, val, test}, seed);
          py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(n));
          for (std::size_t i = 0; i < n; ++i) out.mutable_at(static_cast<py::ssize_t>(i)) = static_cast<std::uint8_t>(s.of_sample[i]);
          return out;
        },
        py::arg("n"), py::arg("seed"), py::arg("train") = 0.7, py::arg("val") = 0.2, py::arg("test") = 0.1);

  m.def("receptive_field",
        [](std::size_t kernel_size, std::vector<std::size_t> dilations, std::size_t convs_per_block) {
          return compute_receptive_field(kernel_size, dilations, convs_per_block);
        },
        py::arg("kernel_size"), py::arg("dilations"), py::arg("convs_per_block") = 1);

  m.def("focal_loss",
        [](const DoubleArray& probs, const IntArray& labels, double gamma, std::vector<double> alpha) {
          const auto p = to_probs(probs);
          FocalLossConfig cfg;
          cfg.gamma = gamma;
          cfg.alpha = alpha.empty() ? std::vector<double>(p.dim(1), 1.0) : std::move(alpha);
          const auto ys = to_labels(labels);
          return focal_loss(p, ys, cfg);
        },
        py::arg("probs"), py::arg("labels"), py::arg("gamma") = 2.0, py::arg("alpha") = std::vector<double>{});

  m.def("class_weights", [](std::vector<std::size_t> counts) { return class_weights_inverse_frequency(counts); },
        py::arg("counts"));

  m.def("composite_score",
        [](double prev_acc, double val_acc, double prev_auc, double auc, double val_loss, double prev_loss,
           double train_acc) { return composite_score({prev_acc, val_acc, prev_auc, auc, val_loss, prev_loss, train_acc}); },
        py::arg("prev_acc"), py::arg("val_acc"), py::arg("prev_auc"), py::arg("auc"), py::arg("val_loss"),
        py::arg("prev_loss"), py::arg("train_acc"));

  m.def("update_dropout", [](double current, double score) { return update_dropout(current, score); },
        py::arg("current"), py::arg("score"));

  m.def("confusion_matrix",
        [](const IntArray& truth, const IntArray& predicted, std::size_t classes) {
          const auto cm = confusion_matrix(to_labels(truth), to_labels(predicted), classes);
          py::array_t<std::uint64_t> out({classes, classes});
          for (std::size_t i = 0; i < classes * classes; ++i) out.mutable_data()[i] = cm.counts()[i];
          return out;
        },
        py::arg("truth"), py::arg("predicted"), py::arg("classes"));

  m.def("metrics_from_matrix",
        [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& matrix,
           std::vector<std::string> names) {
          const auto cm = to_matrix(matrix);
          auto r = precision_recall_f1(cm, std::move(names));
          r.accuracy = accuracy(cm);
          return metrics_to_dict(r);
        },
        py::arg("matrix"), py::arg("class_names") = std::vector<std::string>{});

  m.def("auc_ovr_macro",
        [](const DoubleArray& probs, const IntArray& labels) {
          const auto ys = to_labels(labels);
          return auc_ovr_macro(to_probs(probs), std::span<const int>(ys));
        },
        py::arg("probs"), py::arg("labels"));

  py::class_<Model>(m, "Model")
      .def_static(
          "build",
          [](const std::string& arch, const std::string& config_json, std::uint64_t seed) {
            const auto tag = architecture_from_string(arch);
            const auto j = config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(config_json);
            Rng rng(seed);
            return Model{build_model(model_config_from_json(j, tag), rng)};
          },
          py::arg("architecture"), py::arg("config_json") = "", py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return Model{load_checkpoint(path).model}; }, py::arg("path"))
      .def("save", [](const Model& self, const std::string& path) { save_checkpoint(self.state, path); }, py::arg("path"))
      .def_property_readonly("architecture", [](const Model& self) { return to_string(self.state.architecture); })
      .def_property_readonly("parameter_count", [](const Model& self) { return self.state.parameter_count(); })
      .def_property_readonly("receptive_field", [](const Model& self) { return receptive_field(self.state.config); })
      .def_property_readonly("config_json",
                             [](const Model& self) { return model_config_to_json(self.state.config).dump(); })
      .def("parameter_names",
           [](const Model& self) {
             std::vector<std::string> names;
             for (const auto& [name, p] : self.state.params) names.push_back(name);
             return names;
           })
      .def("predict", &Model::predict, py::arg("batch"), "Class probabilities for a [samples, time] batch.");
}
