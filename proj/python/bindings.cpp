#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "maskexplain/baselines.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/imaging.hpp"
#include "maskexplain/neuromask.hpp"
#include "maskexplain/train.hpp"

namespace py = pybind11;
using namespace maskexplain;

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

py::dict loss_dict(const std::vector<LossTerms>& history) {
  std::vector<double> total, pred, sparse, smooth;
  for (const auto& t : history) {
    total.push_back(t.total);
    pred.push_back(t.pred);
    sparse.push_back(t.sparse);
    smooth.push_back(t.smooth);
  }
  py::dict d;
  d["total"] = total;
  d["pred"] = pred;
  d["sparse"] = sparse;
  d["smooth"] = smooth;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of maskexplain";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<Model>(m, "Model")
      .def_property_readonly("num_classes", &Model::num_classes)
      .def_property_readonly("label_names", [](const Model& md) { return md.spec().label_names; })
      .def_property_readonly("input_shape", [](const Model& md) { return md.spec().input_shape; })
      .def("parameter_count", &Model::parameter_count)
      .def("checksum", &Model::checksum)
      .def("predict", [](const Model& md, const Array& x) { return to_array(md.predict(to_tensor(x))); })
      .def("predict_logits",
           [](const Model& md, const Array& x) { return to_array(md.predict_logits(to_tensor(x))); })
      .def("save", [](const Model& md, const std::filesystem::path& p) { save_model(md, p); });

  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); });

  py::class_<ExplainConfig>(m, "ExplainConfig")
      .def(py::init<>())
      .def_readwrite("lambda_p", &ExplainConfig::lambda_p)
      .def_readwrite("lambda_sp", &ExplainConfig::lambda_sp)
      .def_readwrite("lambda_sm", &ExplainConfig::lambda_sm)
      .def_readwrite("tau", &ExplainConfig::tau)
      .def_readwrite("iterations", &ExplainConfig::iterations)
      .def_readwrite("alpha", &ExplainConfig::alpha)
      .def_readwrite("beta", &ExplainConfig::beta)
      .def_readwrite("epsilon", &ExplainConfig::epsilon)
      .def_readwrite("seed", &ExplainConfig::seed)
      .def_readwrite("snapshot_every", &ExplainConfig::snapshot_every)
      .def_property(
          "unshifted_sparse",
          [](const ExplainConfig& c) { return c.sparse_form == SparseForm::Unshifted; },
          [](ExplainConfig& c, bool v) { c.sparse_form = v ? SparseForm::Unshifted : SparseForm::Shifted; })
      .def("validate", &ExplainConfig::validate);

  py::class_<ExplanationResult>(m, "Explanation")
      .def_property_readonly("mask", [](const ExplanationResult& r) { return to_array(r.mask); })
      .def_readonly("original_class", &ExplanationResult::original_class)
      .def_readonly("masked_class", &ExplanationResult::masked_class)
      .def_property_readonly("class_preserved", &ExplanationResult::class_preserved)
      .def_property_readonly("original_probabilities",
                             [](const ExplanationResult& r) { return to_array(r.original_probabilities); })
      .def_property_readonly("masked_probabilities",
                             [](const ExplanationResult& r) { return to_array(r.masked_probabilities); })
      .def_property_readonly("loss_history", [](const ExplanationResult& r) { return loss_dict(r.loss_history); })
      .def_property_readonly("snapshots", [](const ExplanationResult& r) {
        py::list out;
        for (const auto& s : r.snapshots) out.append(py::make_tuple(s.step, to_array(s.mask)));
        return out;
      });

  m.def(
      "explain",
      [](const Model& md, const Array& image, const ExplainConfig& cfg) {
        py::gil_scoped_release release;
        return explain(md, to_tensor(image), cfg);
      },
      py::arg("model"), py::arg("image"), py::arg("config") = ExplainConfig{});

  m.def(
      "refine_defaults",
      [](const Model& md, const Array& image, std::size_t iterations) {
        RefineOptions opts;
        opts.iterations = iterations;
        const auto r = refine_defaults(md, to_tensor(image), opts);
        py::dict d;
        d["lambda_p"] = r.lambda_p;
        d["lambda_sp"] = r.lambda_sp;
        d["lambda_sm"] = r.lambda_sm;
        d["warning"] = r.warning;
        return d;
      },
      py::arg("model"), py::arg("image"), py::arg("iterations") = RefineOptions{}.iterations);

  m.def("relevance_mask", [](const Array& w) { return to_array(relevance_mask(to_tensor(w))); });
  m.def("apply_mask", [](const Array& x, const Array& mask) {
    return to_array(apply_mask(to_tensor(x), to_tensor(mask)));
  });
  m.def("pred_cost", [](const Array& y, const Array& y_hat) {
    return pred_cost(to_tensor(y), to_tensor(y_hat));
  });
  m.def(
      "sparse_cost",
      [](const Array& w, double tau, bool unshifted) {
        return sparse_cost(to_tensor(w), tau, unshifted ? SparseForm::Unshifted : SparseForm::Shifted);
      },
      py::arg("weights"), py::arg("tau") = 20.0, py::arg("unshifted") = false);
  m.def("smooth_cost", [](const Array& w) { return smooth_cost(to_tensor(w)); });

  py::class_<HeatmapResult>(m, "Heatmap")
      .def_property_readonly("values", [](const HeatmapResult& h) { return to_array(h.values); })
      .def_property_readonly("normalized", [](const HeatmapResult& h) { return to_array(h.normalized()); })
      .def_readonly("method", &HeatmapResult::method)
      .def_readonly("forward_passes", &HeatmapResult::forward_passes);

  m.def("saliency", [](const Model& md, const Array& x) { return saliency(md, to_tensor(x)); });
  m.def(
      "smoothgrad",
      [](const Model& md, const Array& x, std::size_t n, double sigma, std::uint64_t seed) {
        return smoothgrad(md, to_tensor(x), {n, sigma, seed});
      },
      py::arg("model"), py::arg("image"), py::arg("n") = 25, py::arg("sigma") = 0.1, py::arg("seed") = 0);
  m.def(
      "occlusion",
      [](const Model& md, const Array& x, std::size_t patch, std::size_t stride, double fill) {
        OcclusionOptions opts;
        opts.patch = patch;
        opts.stride = stride;
        opts.fill = fill;
        return occlusion(md, to_tensor(x), opts);
      },
      py::arg("model"), py::arg("image"), py::arg("patch") = 8, py::arg("stride") = 4, py::arg("fill") = 0.5);

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p).pixels); });
  m.def("save_image", [](const Array& x, const std::filesystem::path& p) {
    save_image(Image{to_tensor(x), std::nullopt}, p);
  });
  m.def("save_mask", [](const Array& mask, const std::filesystem::path& p) { save_mask(to_tensor(mask), p); });
  m.def("mass_inside_bbox", [](const Array& mask, std::array<std::size_t, 4> b) {
    return mass_inside_bbox(to_tensor(mask), BBox{b[0], b[1], b[2], b[3]});
  });

  m.def(
      "generate_shapes",
      [](std::size_t n_per_class, std::size_t size, std::uint64_t seed) {
        py::list out;
        for (const auto& s : generate_shapes(n_per_class, size, seed)) {
          out.append(py::make_tuple(to_array(s.image.pixels), s.label,
                                    py::make_tuple(s.bbox.row0, s.bbox.col0, s.bbox.row1, s.bbox.col1)));
        }
        return out;
      },
      py::arg("n_per_class"), py::arg("size") = 32, py::arg("seed") = 0);

  m.def(
      "train_tiny_cnn",
      [](std::size_t epochs, std::uint64_t seed) {
        py::gil_scoped_release release;
        TrainOptions opts;
        opts.epochs = epochs;
        opts.seed = seed;
        auto r = train_tiny_cnn(generate_shapes(200, 32, seed), generate_shapes(50, 32, seed + 1),
                                shape_labels(), opts);
        return std::make_pair(std::move(r.model), r.test_accuracy);
      },
      py::arg("epochs") = 10, py::arg("seed") = 7);
}
