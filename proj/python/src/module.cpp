#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dcdepth/cli.hpp"
#include "dcdepth/dataio.hpp"
#include "dcdepth/evalkit.hpp"
#include "dcdepth/losses.hpp"
#include "dcdepth/optim.hpp"
#include "dcdepth/sampler.hpp"

namespace py = pybind11;
using namespace dcdepth;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) for single-channel images, (H, W, C) otherwise
py::array_t<double> to_numpy(const Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels != 1) shape.push_back(img.channels);
  py::array_t<double> out(shape);
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Image from_numpy(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
            a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

py::array_t<bool> mask_to_numpy(const ValidityMask& m, int width, int height) {
  py::array_t<bool> out({height, width});
  std::copy(m.begin(), m.end(), out.mutable_data());
  return out;
}

ValidityMask mask_from_numpy(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  return ValidityMask(a.data(), a.data() + a.size());
}

py::dict report_to_dict(const MetricReport& r) {
  py::dict d;
  d["abs_rel"] = r.abs_rel;
  d["sq_rel"] = r.sq_rel;
  d["rmse"] = r.rmse;
  d["rmse_log"] = r.rmse_log;
  d["delta1"] = r.delta1;
  d["delta2"] = r.delta2;
  d["delta3"] = r.delta3;
  d["valid_count"] = r.valid_count;
  d["cap"] = r.cap;
  if (r.d1_all) d["d1_all"] = *r.d1_all;
  return d;
}

py::dict breakdown_to_dict(const LossBreakdown& b) {
  py::dict d;
  d["image"] = b.image;
  d["smooth"] = b.smooth;
  d["consistency"] = b.consistency;
  d["explainability"] = b.explainability;
  d["total"] = b.total;
  d["per_scale"] = b.per_scale;
  return d;
}

std::array<Image, 4> images_from_list(const std::vector<Array>& arrays) {
  if (arrays.size() != 4) throw py::value_error("expected four images: l, r, l1, r1");
  std::array<Image, 4> out;
  for (std::size_t v = 0; v < 4; ++v) out[v] = from_numpy(arrays[v]);
  return out;
}

}  // namespace

PYBIND11_MODULE(_dcdepth, m) {
  m.doc() = "Per-scene view synthesis and self-supervised depth optimization";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<UnsupportedFormat>(m, "UnsupportedFormat", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<View>(m, "View")
      .value("LEFT", View::kLeft)
      .value("RIGHT", View::kRight)
      .value("NEXT_LEFT", View::kNextLeft)
      .value("NEXT_RIGHT", View::kNextRight);

  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
             Intrinsics K{fx, fy, cx, cy, width, height};
             K.validate();
             return K;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
      .def_readwrite("fx", &Intrinsics::fx)
      .def_readwrite("fy", &Intrinsics::fy)
      .def_readwrite("cx", &Intrinsics::cx)
      .def_readwrite("cy", &Intrinsics::cy)
      .def_readwrite("width", &Intrinsics::width)
      .def_readwrite("height", &Intrinsics::height)
      .def("halved", &Intrinsics::halved)
      .def("__repr__", [](const Intrinsics& K) {
        std::ostringstream s;
        s << "Intrinsics(fx=" << K.fx << ", fy=" << K.fy << ", cx=" << K.cx << ", cy=" << K.cy
          << ", width=" << K.width << ", height=" << K.height << ")";
        return s.str();
      });

  py::class_<Pose6>(m, "Pose6")
      .def(py::init<>())
      .def(py::init<double, double, double, double, double, double>(), py::arg("tx"), py::arg("ty"),
           py::arg("tz"), py::arg("rx"), py::arg("ry"), py::arg("rz"))
      .def("to_list", [](const Pose6& p) { return std::vector<double>(p.v.begin(), p.v.end()); })
      .def("__getitem__",
           [](const Pose6& p, int i) {
             if (i < 0 || i >= 6) throw py::index_error();
             return p[i];
           })
      .def("__len__", [](const Pose6&) { return 6; })
      .def(py::self == py::self)
      .def("__repr__", [](const Pose6& p) { return "Pose6(" + format_pose(p).substr(0, format_pose(p).size() - 1) + ")"; })
      .def_static("compose_small", &compose_small);

  py::class_<LossWeights>(m, "LossWeights")
      .def(py::init<>())
      .def_readwrite("image", &LossWeights::image)
      .def_readwrite("smooth", &LossWeights::smooth)
      .def_readwrite("consistency", &LossWeights::consistency)
      .def_readwrite("explainability", &LossWeights::explainability)
      .def_readwrite("alpha", &LossWeights::alpha)
      .def_readwrite("c1", &LossWeights::c1)
      .def_readwrite("c2", &LossWeights::c2);

  py::class_<PlaneSpec>(m, "PlaneSpec")
      .def(py::init([](double depth, double tilt_x, double tilt_y, std::uint64_t seed) {
             return PlaneSpec{depth, tilt_x, tilt_y, seed};
           }),
           py::arg("depth") = 3.0, py::arg("tilt_x") = 0.0, py::arg("tilt_y") = 0.0, py::arg("texture_seed") = 1)
      .def_readwrite("depth", &PlaneSpec::depth)
      .def_readwrite("tilt_x", &PlaneSpec::tilt_x)
      .def_readwrite("tilt_y", &PlaneSpec::tilt_y)
      .def_readwrite("texture_seed", &PlaneSpec::texture_seed);

  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init<>())
      .def_readwrite("intrinsics", &SceneSpec::intrinsics)
      .def_readwrite("baseline", &SceneSpec::baseline)
      .def_readwrite("temporal", &SceneSpec::temporal)
      .def_readwrite("planes", &SceneSpec::planes)
      .def_readwrite("texture_frequency", &SceneSpec::texture_frequency)
      .def_readwrite("seed", &SceneSpec::seed)
      .def("validate", &SceneSpec::validate)
      .def_static("fronto_parallel", &SceneSpec::fronto_parallel, py::arg("depth") = 3.0)
      .def_static("slanted", &SceneSpec::slanted)
      .def_static("parse", &parse_scene_spec_text, py::arg("text"));

  py::class_<SceneSample>(m, "SceneSample")
      .def(py::init([](const std::vector<Array>& images, const Intrinsics& K, double baseline) {
             SceneSample s{images_from_list(images), K, baseline, std::nullopt};
             s.validate();
             return s;
           }),
           py::arg("images"), py::arg("intrinsics"), py::arg("baseline"))
      .def_property_readonly("images",
                             [](const SceneSample& s) {
                               py::list out;
                               for (const Image& img : s.images) out.append(to_numpy(img));
                               return out;
                             })
      .def_readonly("intrinsics", &SceneSample::intrinsics)
      .def_readonly("baseline", &SceneSample::baseline)
      .def_property_readonly("gt_depth",
                             [](const SceneSample& s) -> py::object {
                               if (!s.ground_truth) return py::none();
                               py::list out;
                               for (const Image& d : s.ground_truth->depth) out.append(to_numpy(d));
                               return out;
                             })
      .def_property_readonly("gt_stereo",
                             [](const SceneSample& s) -> py::object {
                               return s.ground_truth ? py::cast(s.ground_truth->stereo) : py::none();
                             })
      .def_property_readonly("gt_temporal", [](const SceneSample& s) -> py::object {
        return s.ground_truth ? py::cast(s.ground_truth->temporal) : py::none();
      });

  m.def("synth_scene", &synth_scene, py::arg("spec") = SceneSpec::fronto_parallel());
  m.def("load_scene", &load_scene, py::arg("manifest"));

  py::class_<OptimizeConfig>(m, "OptimizeConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &OptimizeConfig::iterations)
      .def_readwrite("scales", &OptimizeConfig::scales)
      .def_readwrite("learning_rate", &OptimizeConfig::learning_rate)
      .def_readwrite("schedule_breakpoints", &OptimizeConfig::schedule_breakpoints)
      .def_readwrite("field_lr_scale", &OptimizeConfig::field_lr_scale)
      .def_readwrite("weights", &OptimizeConfig::weights)
      .def_readwrite("max_disparity", &OptimizeConfig::max_disparity)
      .def_readwrite("init_disparity_logit", &OptimizeConfig::init_disparity_logit)
      .def_readwrite("init_mask_logit", &OptimizeConfig::init_mask_logit)
      .def_readwrite("freeze_stereo_pose", &OptimizeConfig::freeze_stereo_pose)
      .def_readwrite("seed", &OptimizeConfig::seed)
      .def("validate", &OptimizeConfig::validate);

  m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("config"));

  py::class_<OptimizeResult>(m, "OptimizeResult")
      .def(
          "disparity",
          [](const OptimizeResult& r, View v) {
            return to_numpy(normalized_disparity(r.state.params.disparity_logits[static_cast<std::size_t>(idx(v))],
                                                 r.state.params.max_disparity));
          },
          py::arg("view") = View::kRight, "Normalized disparity (fraction of image width).")
      .def_property_readonly("stereo", [](const OptimizeResult& r) { return r.state.params.stereo; })
      .def_property_readonly("temporal", [](const OptimizeResult& r) { return r.state.params.temporal; })
      .def_property_readonly("mask",
                             [](const OptimizeResult& r) {
                               Image p = r.state.params.mask_logits;
                               for (double& x : p.data) x = sigmoid(x);
                               return to_numpy(p);
                             })
      .def_property_readonly("trace", [](const OptimizeResult& r) {
        py::list out;
        for (const TraceRow& t : r.trace) {
          py::dict d = breakdown_to_dict(t.loss);
          d["iteration"] = t.iteration;
          d["scale"] = t.scale;
          d["learning_rate"] = t.learning_rate;
          out.append(d);
        }
        return out;
      });

  m.def(
      "optimize_scene",
      [](const SceneSample& s, const OptimizeConfig& cfg) {
        py::gil_scoped_release release;
        return optimize_scene(s, cfg);
      },
      py::arg("sample"), py::arg("config") = OptimizeConfig{});

  m.def(
      "depth_from_disparity",
      [](const Array& s, const Intrinsics& K, double baseline) {
        return to_numpy(disparity_to_depth(from_numpy(s), K, baseline));
      },
      py::arg("disparity"), py::arg("intrinsics"), py::arg("baseline"));

  m.def(
      "warp_coordinates",
      [](const Array& depth, const Pose6& pose, const Intrinsics& K) {
        const CoordGrid g = warp_coordinates(from_numpy(depth), pose, K);
        py::array_t<double> u({g.height, g.width}), v({g.height, g.width});
        std::copy(g.u.begin(), g.u.end(), u.mutable_data());
        std::copy(g.v.begin(), g.v.end(), v.mutable_data());
        return py::make_tuple(u, v, mask_to_numpy(g.valid, g.width, g.height));
      },
      py::arg("depth"), py::arg("pose"), py::arg("intrinsics"));

  m.def(
      "bilinear_sample",
      [](const Array& src, const Array& u, const Array& v) {
        if (u.ndim() != 2 || v.ndim() != 2 || u.shape(0) != v.shape(0) || u.shape(1) != v.shape(1)) {
          throw py::value_error("u and v must be (H, W) arrays of the same shape");
        }
        CoordGrid g(static_cast<int>(u.shape(1)), static_cast<int>(u.shape(0)));
        std::copy(u.data(), u.data() + u.size(), g.u.begin());
        std::copy(v.data(), v.data() + v.size(), g.v.begin());
        std::fill(g.valid.begin(), g.valid.end(), 1);
        const SampledImage s = bilinear_sample(from_numpy(src), g);
        return py::make_tuple(to_numpy(s.image), mask_to_numpy(s.valid, g.width, g.height));
      },
      py::arg("src"), py::arg("u"), py::arg("v"));

  m.def(
      "ssim_map",
      [](const Array& x, const Array& y, double c1, double c2) {
        return to_numpy(ssim_map(from_numpy(x), from_numpy(y), c1, c2));
      },
      py::arg("x"), py::arg("y"), py::arg("c1") = LossWeights{}.c1, py::arg("c2") = LossWeights{}.c2);

  m.def(
      "explainability_loss", [](const Array& logits) { return explainability_loss(from_numpy(logits)); },
      py::arg("mask_logits"));

  m.def(
      "smoothness_loss",
      [](const Array& disp, const Array& img) { return smoothness_loss(from_numpy(disp), from_numpy(img)); },
      py::arg("disparity"), py::arg("image"));

  m.def(
      "total_loss",
      [](const SceneSample& s, const std::vector<Array>& disparity_logits, const Pose6& stereo,
         const Pose6& temporal, const Array& mask_logits, const LossWeights& w, int scales,
         double max_disparity) {
        const ScenePyramid pyr = ScenePyramid::build(s, scales);
        SceneParams p;
        p.disparity_logits = images_from_list(disparity_logits);
        p.stereo = stereo;
        p.temporal = temporal;
        p.mask_logits = from_numpy(mask_logits);
        p.max_disparity = max_disparity;
        return breakdown_to_dict(total_loss(pyr, 0, p, w));
      },
      py::arg("sample"), py::arg("disparity_logits"), py::arg("stereo"), py::arg("temporal"),
      py::arg("mask_logits"), py::arg("weights") = LossWeights{}, py::arg("scales") = 4,
      py::arg("max_disparity") = 0.3);

  m.def(
      "gradcheck",
      [](std::uint64_t seed, int size, const LossWeights& w, double eps) {
        const GradcheckScene s = random_gradcheck_scene(seed, size, size);
        GradcheckOptions o;
        o.eps = eps;
        const GradcheckReport r = gradcheck(s.pyramid, 0, s.params, w, o);
        py::dict out;
        for (const BlockError& b : r.blocks) out[py::str(b.name)] = b.relative_error;
        return out;
      },
      py::arg("seed"), py::arg("size") = 8, py::arg("weights") = LossWeights{},
      py::arg("eps") = GradcheckOptions{}.eps, "Relative gradient error per parameter block.");

  m.def(
      "eigen_metrics",
      [](const Array& pred, const Array& gt, py::object valid, double cap) {
        const Image g = from_numpy(gt);
        const ValidityMask mask =
            valid.is_none() ? ValidityMask(g.pixels(), 1)
                            : mask_from_numpy(valid.cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>());
        return report_to_dict(eigen_metrics(from_numpy(pred), g, mask, cap));
      },
      py::arg("pred"), py::arg("gt"), py::arg("valid") = py::none(), py::arg("cap") = 80.0);

  m.def(
      "d1_all",
      [](const Array& pred, const Array& gt, py::object valid) {
        const Image g = from_numpy(gt);
        const ValidityMask mask =
            valid.is_none() ? ValidityMask(g.pixels(), 1)
                            : mask_from_numpy(valid.cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>());
        return d1_all(from_numpy(pred), g, mask);
      },
      py::arg("pred_disp"), py::arg("gt_disp"), py::arg("valid") = py::none());

  m.def("flip_merge_weight", &flip_merge_weight, py::arg("x"), py::arg("width"));
  m.def(
      "flip_merge", [](const Array& d, const Array& f) { return to_numpy(flip_merge(from_numpy(d), from_numpy(f))); },
      py::arg("disp"), py::arg("disp_from_flipped"));

  m.def("load_ppm", [](const std::filesystem::path& p) { return to_numpy(load_ppm(p)); }, py::arg("path"));
  m.def(
      "save_ppm", [](const Array& img, const std::filesystem::path& p) { save_ppm(from_numpy(img), p); },
      py::arg("image"), py::arg("path"));
  m.def(
      "load_depth_pgm16",
      [](const std::filesystem::path& p) {
        const ScalarMap s = load_depth_pgm16(p);
        return py::make_tuple(to_numpy(s.values), mask_to_numpy(s.valid, s.values.width, s.values.height));
      },
      py::arg("path"));
  m.def(
      "save_depth_pgm16",
      [](const Array& values, const std::filesystem::path& p) { save_depth_pgm16(from_numpy(values), p); },
      py::arg("values"), py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
