#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gazelab/benchmark.hpp"
#include "gazelab/domain_adapt.hpp"
#include "gazelab/serialize.hpp"

namespace py = pybind11;
using namespace gazelab;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<int>(a.shape(i));
    Tensor t(shape);
    std::memcpy(t.v.data(), a.data(), t.numel() * sizeof(double));
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> a(shape);
    std::memcpy(a.mutable_data(), t.v.data(), t.numel() * sizeof(double));
    return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "warp-based gaze redirection and few-shot gaze estimator adaptation";

    py::class_<GazeAngles>(m, "GazeAngles")
        .def(py::init<double, double>(), py::arg("pitch") = 0.0, py::arg("yaw") = 0.0)
        .def_readwrite("pitch", &GazeAngles::pitch)
        .def_readwrite("yaw", &GazeAngles::yaw)
        .def("__repr__", [](const GazeAngles& g) {
            return "GazeAngles(pitch=" + std::to_string(g.pitch) + ", yaw=" + std::to_string(g.yaw) + ")";
        });
    py::class_<HeadPose>(m, "HeadPose")
        .def(py::init<double, double>(), py::arg("pitch") = 0.0, py::arg("yaw") = 0.0)
        .def_readwrite("pitch", &HeadPose::pitch)
        .def_readwrite("yaw", &HeadPose::yaw);
    py::class_<GazeOffset>(m, "GazeOffset")
        .def(py::init<double, double>(), py::arg("pitch") = 0.0, py::arg("yaw") = 0.0)
        .def_readwrite("pitch", &GazeOffset::pitch)
        .def_readwrite("yaw", &GazeOffset::yaw);

    m.def("gaze_to_vec", [](const GazeAngles& g) { return gaze_to_vec(g); });
    m.def("angular_error_deg", &angular_error_deg);
    m.def("deg_to_rad", &deg_to_rad);
    m.def("rad_to_deg", &rad_to_deg);

    m.def("identity_field", [](int h, int w) {
        const WarpField f = identity_field(h, w);
        return py::make_tuple(array_from_tensor(f.mx), array_from_tensor(f.my));
    });
    m.def(
        "sample_bilinear",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& mx,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& my) {
            const WarpField f{tensor_from_array(mx), tensor_from_array(my)};
            return array_from_tensor(sample_bilinear(tensor_from_array(image), f));
        },
        py::arg("image"), py::arg("mx"), py::arg("my"));

    py::enum_<Domain>(m, "Domain")
        .value("SYNTHETIC", Domain::Synthetic)
        .value("PSEUDO_REAL", Domain::PseudoReal);

    py::class_<PersonProfile>(m, "PersonProfile")
        .def_readonly("id", &PersonProfile::id)
        .def_readonly("skin_albedo", &PersonProfile::skin_albedo)
        .def_readonly("sclera_albedo", &PersonProfile::sclera_albedo)
        .def_readonly("iris_albedo", &PersonProfile::iris_albedo)
        .def_readonly("eyeball_radius_px", &PersonProfile::eyeball_radius_px)
        .def_readonly("aperture", &PersonProfile::aperture)
        .def_readonly("kappa", &PersonProfile::kappa);
    m.def("sample_profile", &sample_profile, py::arg("id"), py::arg("seed"), py::arg("with_kappa"));
    py::class_<IllumParams>(m, "IllumParams")
        .def_readonly("id", &IllumParams::id)
        .def_readonly("gain", &IllumParams::gain);
    m.def("make_illum", &make_illum, py::arg("id"), py::arg("seed"));

    py::class_<EyeSample>(m, "EyeSample")
        .def_property_readonly("image", [](const EyeSample& s) { return array_from_tensor(s.image); })
        .def_property_readonly("seg", [](const EyeSample& s) { return array_from_tensor(s.seg); })
        .def_readonly("gaze", &EyeSample::gaze)
        .def_readonly("optical", &EyeSample::optical)
        .def_readonly("head", &EyeSample::head)
        .def_readonly("person_id", &EyeSample::person_id)
        .def_readonly("domain", &EyeSample::domain);
    m.def("render", &render, py::arg("profile"), py::arg("head"), py::arg("optical_gaze"),
          py::arg("illum"), py::arg("domain"), py::arg("seed"));

    py::class_<Redirector>(m, "Redirector")
        .def_static("init",
                    [](std::uint64_t seed) { return init_redirector(RedirectorConfig{}, seed); })
        .def_static("load",
                    [](const std::string& path) {
                        Redirector r = init_redirector(RedirectorConfig{}, 0);
                        load_params_into(r.params, path);
                        return r;
                    })
        .def("save", [](const Redirector& r, const std::string& path) { save_params(r.params, path); })
        .def("predict_field",
             [](const Redirector& r, const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
                const GazeOffset& dg, const HeadPose& head) {
                 const WarpField f = predict_field(r, tensor_from_array(image), dg, head);
                 return py::make_tuple(array_from_tensor(f.mx), array_from_tensor(f.my));
             })
        .def("redirect",
             [](const Redirector& r, const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
                const GazeOffset& dg, const HeadPose& head) {
                 return array_from_tensor(redirect_image(r, tensor_from_array(image), dg, head));
             });

    py::class_<Estimator>(m, "Estimator")
        .def_static("init",
                    [](std::uint64_t seed) { return init_estimator(EstimatorConfig{}, seed); })
        .def_static("load",
                    [](const std::string& path) {
                        Estimator e = init_estimator(EstimatorConfig{}, 0);
                        load_params_into(e.params, path);
                        return e;
                    })
        .def("save", [](const Estimator& e, const std::string& path) { save_params(e.params, path); })
        .def("predict",
             [](const Estimator& e, const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
                const HeadPose& head) { return predict_gaze(e, tensor_from_array(image), head); });

    m.def(
        "redirection_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& target,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& warped_seg,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& target_seg,
           double seg_weight) {
            return redirection_loss(tensor_from_array(pred), tensor_from_array(target),
                                    tensor_from_array(warped_seg), tensor_from_array(target_seg),
                                    seg_weight);
        },
        py::arg("pred"), py::arg("target"), py::arg("warped_seg"), py::arg("target_seg"),
        py::arg("seg_weight") = 1.0);
    m.def("cycle_loss",
          [](const Redirector& r, const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             const GazeOffset& dg, const HeadPose& head) {
              return cycle_loss(r, tensor_from_array(image), dg, head);
          });
    m.def("gaze_redirection_loss",
          [](const Redirector& r, const Estimator& e,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             const GazeAngles& gaze, const GazeOffset& dg, const HeadPose& head) {
              return gaze_redirection_loss(r, e, tensor_from_array(image), gaze, dg, head);
          });

    m.attr("EYE_HEIGHT") = kEyeHeight;
    m.attr("EYE_WIDTH") = kEyeWidth;
    m.attr("__version__") = "1.0.0";
}
