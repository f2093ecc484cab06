#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ian/config.hpp"
#include "ian/losses.hpp"
#include "ian/trainer.hpp"

namespace py = pybind11;
using namespace ian;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
BasicTensor<T> from_numpy(const Array<T>& a) {
  Shape s(a.shape(), a.shape() + a.ndim());
  return BasicTensor<T>(s, std::vector<T>(a.data(), a.data() + a.size()));
}

template <typename T>
Array<T> to_numpy(const BasicTensor<T>& t) {
  Array<T> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

IANConfig model_config(const std::string& j) { return ian_config_from_json(json::parse(j)); }

class PyModel {
 public:
  explicit PyModel(const std::filesystem::path& ckpt) : model_(model_from_checkpoint(load_checkpoint(ckpt))) {}
  PyModel(const std::string& config_json, std::uint64_t seed) : model_(model_config(config_json), seed) {}

  std::string config() const { return to_json(model_.config()).dump(); }
  std::int64_t parameter_count() const { return model_.parameter_count(); }

  std::vector<Array<float>> forward(const Array<float>& input, std::optional<Array<float>> depth,
                                    std::optional<Array<float>> light) const {
    const auto x = from_numpy(input);
    std::optional<Tensor> d, l;
    if (depth) d = from_numpy(*depth);
    if (light) l = from_numpy(*light);
    std::vector<Tensor> outs;
    {
      py::gil_scoped_release release;
      NoGradGuard ng;
      outs = model_.forward(x, d ? &*d : nullptr, l ? &*l : nullptr);
    }
    std::vector<Array<float>> r;
    for (const auto& o : outs) r.push_back(to_numpy(clamp01(o)));
    return r;
  }

 private:
  Model model_;
};

py::dict train(const std::string& config_json, const std::filesystem::path& checkpoint) {
  const auto cfg = RunConfig::from_json(json::parse(config_json));
  cfg.validate();
  const auto data = Dataset::load(cfg.run.train_data);
  std::vector<std::pair<std::int64_t, double>> log;
  TrainReport rep;
  Checkpoint ck;
  {
    py::gil_scoped_release release;
    Trainer t(cfg, data);
    rep = t.run(nullptr, [&](const IntervalLog& l) { log.emplace_back(l.iteration, l.loss); });
    ck = t.checkpoint();
  }
  save_checkpoint(ck, checkpoint);
  py::dict d;
  d["intervals"] = log;
  d["iterations"] = rep.iterations;
  d["seconds"] = rep.seconds;
  return d;
}

std::string evaluate_json(const std::filesystem::path& ckpt, const std::filesystem::path& data) {
  const auto model = model_from_checkpoint(load_checkpoint(ckpt));
  const auto ds = Dataset::load(data);
  py::gil_scoped_release release;
  return to_json(evaluate(model, ds), true).dump();
}

}  // namespace

PYBIND11_MODULE(_ian, m) {
  m.doc() = "Illumination-aware relighting network";

  py::register_exception<Error>(m, "IanError", PyExc_ValueError);

  m.def("count_params", [](const std::string& c) { return count_params(model_config(c)); }, py::arg("config_json"));
  m.def(
      "estimate_macs",
      [](const std::string& c, std::int64_t h, std::int64_t w) {
        const auto r = estimate_macs(model_config(c), h, w);
        py::dict d;
        d["total"] = r.total;
        d["resampling"] = r.resampling;
        d["modules"] = r.modules;
        return d;
      },
      py::arg("config_json"), py::arg("height"), py::arg("width"));

  m.def(
      "sh_from_direction",
      [](const Vec3& dir, double intensity) { return sh_from_direction(dir, intensity).c; },
      py::arg("direction"), py::arg("intensity") = 1.0);

  m.def("psnr", [](const Array<double>& a, const Array<double>& b) { return psnr(from_numpy(a), from_numpy(b)); });
  m.def("ssim", [](const Array<double>& a, const Array<double>& b) { return ssim(from_numpy(a), from_numpy(b)).item(); });
  m.def("gradient_loss",
        [](const Array<double>& a, const Array<double>& b) { return gradient_loss(from_numpy(a), from_numpy(b)).item(); });
  m.def("resize_bicubic", [](const Array<float>& x, double scale) { return to_numpy(resize_bicubic(from_numpy(x), scale)); });

  m.def(
      "gen_dataset",
      [](const std::string& spec_json, const std::filesystem::path& dir) {
        const auto s = dataset_spec_from_json(json::parse(spec_json));
        py::gil_scoped_release release;
        gen_dataset(s, dir);
      },
      py::arg("spec_json"), py::arg("out_dir"));

  m.def("default_config", [] { return RunConfig{}.to_json().dump(); });
  m.def("train", &train, py::arg("config_json"), py::arg("checkpoint"));
  m.def("evaluate", &evaluate_json, py::arg("checkpoint"), py::arg("data_dir"));

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_json"), py::arg("seed"))
      .def_property_readonly("config", &PyModel::config)
      .def_property_readonly("parameter_count", &PyModel::parameter_count)
      .def("forward", &PyModel::forward, py::arg("input"), py::arg("depth") = py::none(), py::arg("light") = py::none());
}
