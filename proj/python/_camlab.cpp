#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "camlab/cam.hpp"
#include "camlab/checkpoint.hpp"
#include "camlab/errors.hpp"
#include "camlab/evalbench.hpp"
#include "camlab/lemma.hpp"
#include "camlab/sham.hpp"
#include "camlab/train.hpp"

namespace py = pybind11;
using namespace camlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  Array a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), a.mutable_data());
  return a;
}

Tensor from_numpy(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

std::vector<Tensor> split_stack(const Array& a) {
  if (a.ndim() < 2) throw ShapeError("expected a stacked array [N, ...]");
  std::vector<Tensor> out;
  Shape item(a.shape() + 1, a.shape() + a.ndim());
  const std::size_t step = a.size() / std::size_t(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    out.emplace_back(item, std::vector<double>(a.data() + i * step, a.data() + (i + 1) * step));
  return out;
}

Array stack(const std::vector<Tensor>& ts) {
  if (ts.empty()) return Array(std::vector<py::ssize_t>{0});
  std::vector<py::ssize_t> shape{py::ssize_t(ts.size())};
  for (auto d : ts[0].shape()) shape.push_back(py::ssize_t(d));
  Array a(shape);
  double* p = a.mutable_data();
  for (const auto& t : ts) p = std::copy(t.values().begin(), t.values().end(), p);
  return a;
}

Dataset make_dataset(const Array& images, const std::vector<std::size_t>& labels, std::optional<Array> masks,
                     std::size_t num_classes) {
  Dataset d;
  d.images = split_stack(images);
  d.labels = labels;
  if (masks) d.masks = split_stack(*masks);
  d.num_classes = num_classes;
  if (d.labels.size() != d.images.size()) throw ShapeError("images and labels differ in length");
  return d;
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  out["images"] = stack(d.images);
  out["labels"] = d.labels;
  out["masks"] = stack(d.masks);
  out["num_classes"] = d.num_classes;
  return out;
}

py::dict report_dict(const ExperimentReport& r) {
  py::dict out;
  out["name"] = r.name;
  out["csv"] = report_to_csv(r);
  py::dict means;
  for (const auto& a : r.aggregates) means[py::str(a.method + "/" + a.metric)] = py::make_tuple(a.mean, a.std, a.count);
  out["aggregates"] = means;
  py::list tests;
  for (const auto& t : r.tests)
    tests.append(py::make_tuple(t.metric, t.method_a, t.method_b, t.result.u, t.result.p));
  out["tests"] = tests;
  return out;
}

}  // namespace

PYBIND11_MODULE(_camlab, m) {
  m.doc() = "Contrastive CAM toolkit: toy CNN, CAM methods, SHAM masks, studies";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("input_height", &ModelConfig::input_height)
      .def_readwrite("input_width", &ModelConfig::input_width)
      .def_readwrite("conv_widths", &ModelConfig::conv_widths)
      .def_readwrite("cam_height", &ModelConfig::cam_height)
      .def_readwrite("cam_width", &ModelConfig::cam_width)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def_readwrite("seed", &ModelConfig::seed);

  py::class_<Model>(m, "Model")
      .def(py::init(&build), py::arg("config") = ModelConfig{})
      .def_property_readonly("config", &Model::config)
      .def("parameter_count", &Model::parameter_count)
      .def("logits", [](const Model& mdl, const Array& img) { return to_numpy(predict_logits(mdl, from_numpy(img))); })
      .def("predict", [](const Model& mdl, const Array& img) { return predict(mdl, from_numpy(img)); })
      .def("save", [](const Model& mdl, const std::filesystem::path& p) { save_checkpoint(p, mdl); })
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p).model; })
      .def("__eq__", [](const Model& a, const Model& b) { return a == b; });

  m.def(
      "generate_synthetic",
      [](std::size_t classes, std::size_t train, std::size_t test, std::uint64_t seed) {
        SyntheticSpec s;
        s.num_classes = classes;
        s.train_per_class = train;
        s.test_per_class = test;
        s.seed = seed;
        const auto sp = generate_synthetic(s);
        py::dict out;
        out["train"] = dataset_dict(sp.train);
        out["val"] = dataset_dict(sp.val);
        out["test"] = dataset_dict(sp.test);
        return out;
      },
      py::arg("classes") = 7, py::arg("train_per_class") = 193, py::arg("test_per_class") = 5, py::arg("seed") = 17);

  m.def(
      "train",
      [](const Model& model, const Array& images, const std::vector<std::size_t>& labels, std::optional<Array> masks,
         const std::string& salience, std::size_t epochs, double lr, double ce_weight, double sal_weight,
         std::size_t batch, std::uint64_t seed, double entropy) {
        const auto d = make_dataset(images, labels, masks, model.config().num_classes);
        TrainConfig tc;
        tc.salience = parse_salience_source(salience);
        tc.epochs = epochs;
        tc.learning_rate = lr;
        tc.ce_weight = ce_weight;
        tc.sal_weight = sal_weight;
        tc.batch_size = batch;
        tc.seed = seed;
        const auto& c = model.config();
        const auto sham = generate_sham({c.cam_height, c.cam_width, entropy}).grid;
        py::gil_scoped_release release;
        auto r = train(model, d, tc, &sham);
        std::vector<std::tuple<double, double, double, double>> log;
        for (const auto& e : r.log) log.emplace_back(e.loss, e.ce, e.sal, e.accuracy);
        return std::make_pair(std::move(r.model), log);
      },
      py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("masks") = py::none(),
      py::arg("salience") = "none", py::arg("epochs") = 50, py::arg("lr") = 0.002, py::arg("ce_weight") = 1.0,
      py::arg("sal_weight") = 1.0, py::arg("batch_size") = 1, py::arg("seed") = 17, py::arg("entropy") = 3.35,
      "Returns (trained model, [(loss, ce, sal, accuracy) per epoch]).");

  m.def(
      "sham",
      [](std::size_t rows, std::size_t cols, double entropy) {
        const auto s = generate_sham({rows, cols, entropy});
        return py::make_tuple(to_numpy(s.grid), s.ones, s.entropy);
      },
      py::arg("rows") = 7, py::arg("cols") = 7, py::arg("entropy") = 3.35, "Returns (mask, ones, entropy).");
  m.def("cam_entropy", [](const Array& a) { return cam_entropy(from_numpy(a)); });

  m.def("methods", [] {
    std::vector<std::string> out;
    for (const auto& id : all_methods()) out.push_back(id.name());
    return out;
  });
  m.def(
      "cam",
      [](const Model& model, const Array& image, const std::string& method, std::size_t cls) {
        const auto s = run_method(model, from_numpy(image), parse_method(method), cls);
        return py::make_tuple(to_numpy(s.raw), to_numpy(s.normalized));
      },
      py::arg("model"), py::arg("image"), py::arg("method"), py::arg("cls"), "Returns (raw, normalized) maps.");
  m.def(
      "delta",
      [](std::vector<double> logits, std::size_t cls, const std::string& agg) {
        return delta(LogitVector(std::move(logits), cls), parse_aggregator(agg));
      },
      py::arg("logits"), py::arg("cls"), py::arg("aggregator") = "mean");

  m.def(
      "similarity_study",
      [](const Model& model, const Array& images, const std::vector<std::size_t>& labels, std::size_t threads) {
        const auto d = make_dataset(images, labels, std::nullopt, model.config().num_classes);
        py::gil_scoped_release release;
        auto r = similarity_study(model, d, {std::begin(kAggregators), std::end(kAggregators)}, {"model", threads, 17});
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("threads") = 1);
  m.def(
      "susceptibility_study",
      [](const Model& clean, const Model& fooled, const Array& images, const std::vector<std::size_t>& labels,
         std::vector<std::string> methods, std::size_t threads) {
        const auto d = make_dataset(images, labels, std::nullopt, clean.config().num_classes);
        std::vector<MethodId> ids;
        for (const auto& name : methods) ids.push_back(parse_method(name));
        if (ids.empty()) ids = all_methods();
        py::gil_scoped_release release;
        auto r = susceptibility_study(clean, fooled, d, ids, {"model", threads, 17});
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("clean"), py::arg("fooled"), py::arg("images"), py::arg("labels"),
      py::arg("methods") = std::vector<std::string>{}, py::arg("threads") = 1);

  m.def(
      "rank_sum",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = rank_sum(x, y);
        return py::make_tuple(r.u, r.p, r.exact);
      },
      "Returns (U, two-sided p, exact).");

  m.def(
      "expected_max",
      [](std::size_t classes, double sigma, std::size_t trials, std::uint64_t seed) {
        ResidualModel rm;
        rm.num_classes = classes;
        rm.sigma = sigma;
        rm.seed = seed;
        const auto e = expected_max(rm, trials);
        return py::make_tuple(e.mc.value, e.mc.stderr_, e.closed_form);
      },
      py::arg("classes") = 1000, py::arg("sigma") = 1.0, py::arg("trials") = 100000, py::arg("seed") = 17,
      "Returns (Monte Carlo mean, its standard error, sqrt(2 ln(C-1)) form).");
  m.def(
      "delta_variances",
      [](std::size_t classes, double sigma, std::size_t trials, const std::string& dist, std::uint64_t seed) {
        ResidualModel rm;
        rm.num_classes = classes;
        rm.sigma = sigma;
        rm.dist = parse_residual_dist(dist);
        rm.seed = seed;
        const auto r = run_mc(rm, trials);
        py::dict out;
        for (const auto& s : r.per_agg)
          out[py::str(std::string(to_string(s.agg)))] = py::make_tuple(s.delta_variance.value, s.delta_variance.stderr_);
        return out;
      },
      py::arg("classes") = 1000, py::arg("sigma") = 1.0, py::arg("trials") = 100000, py::arg("dist") = "gaussian",
      py::arg("seed") = 17);
  m.def(
      "lse_mean_gap",
      [](double sigma, std::size_t classes, std::size_t trials, std::uint64_t seed) {
        const auto g = lse_mean_gap(sigma, classes, trials, seed);
        return py::make_tuple(g.value, g.stderr_);
      },
      py::arg("sigma"), py::arg("classes") = 50, py::arg("trials") = 100000, py::arg("seed") = 17);
}
