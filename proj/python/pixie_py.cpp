#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "pixie/config.hpp"
#include "pixie/constraint.hpp"
#include "pixie/grid_io.hpp"
#include "pixie/materials.hpp"
#include "pixie/mpm.hpp"
#include "pixie/parallel.hpp"
#include "pixie/predictor.hpp"
#include "pixie/segmentation.hpp"
#include "pixie/synth.hpp"

namespace py = pybind11;
using namespace pixie;

namespace {

template <class T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

// Grid payloads are x-major with channels last, which is numpy's C order for
// shape (n, n, n, d).
template <class T>
py::array_t<T> to_numpy(const std::vector<T>& data, int n, int d) {
  std::vector<py::ssize_t> shape = {n, n, n};
  if (d != 1) shape.push_back(d);
  py::array_t<T> out(shape);
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(T));
  return out;
}

int cube_side(const py::buffer_info& info, int channel_axes, const char* what) {
  if (info.ndim != 3 + channel_axes || info.shape[0] != info.shape[1] || info.shape[1] != info.shape[2]) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must have shape (n, n, n" +
                                                  (channel_axes ? ", d)" : ")"));
  }
  return static_cast<int>(info.shape[0]);
}

template <class T>
std::vector<T> copy_out(const Array<T>& a) {
  return std::vector<T>(a.data(), a.data() + a.size());
}

FeatureGrid feature_grid(const Array<float>& a) {
  const auto info = a.request();
  const int n = cube_side(info, 1, "features");
  return FeatureGrid(GridDims(n, static_cast<int>(info.shape[3])), copy_out(a));
}

OccupancyMask occupancy(const Array<std::uint8_t>& a) {
  const int n = cube_side(a.request(), 0, "mask");
  std::vector<std::uint8_t> data = copy_out(a);
  for (auto& v : data) v = v != 0;
  return OccupancyMask(n, std::move(data));
}

MaterialGrid material_grid(const Array<std::uint8_t>& classes, const Array<double>& params) {
  const int n = cube_side(classes.request(), 0, "classes");
  const auto pinfo = params.request();
  if (cube_side(pinfo, 1, "params") != n || pinfo.shape[3] != 3) {
    throw Error(ErrorCode::DimensionMismatch, "params must have shape (n, n, n, 3) matching classes");
  }
  MaterialGrid g(n);
  const double* p = params.data();
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    const auto c = material_class_from_index(classes.data()[v]);
    if (c != MaterialClass::Background) g.set(v, c, {p[3 * v], p[3 * v + 1], p[3 * v + 2]});
  }
  return g;
}

py::tuple material_arrays(const MaterialGrid& g) {
  std::vector<std::uint8_t> cls(g.voxel_count());
  std::vector<float> params(g.voxel_count() * 3);
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    cls[v] = static_cast<std::uint8_t>(g.material_class(v));
    const auto p = g.raw_params(v);
    std::copy(p.begin(), p.end(), params.begin() + 3 * v);
  }
  return py::make_tuple(to_numpy(cls, g.n(), 1), to_numpy(params, g.n(), 3));
}

py::dict sampled_dict(const SampledMaterials& sampled) {
  py::dict out;
  for (const auto& [name, s] : sampled) {
    py::dict part;
    part["material"] = std::string(material_class_name(s.cls));
    part["E"] = s.params.young_modulus;
    part["nu"] = s.params.poisson_ratio;
    part["density"] = s.params.density;
    out[py::str(name)] = part;
  }
  return out;
}

ParamSample param_sample(const std::map<std::string, std::array<double, 3>>& values) {
  ParamSample s;
  for (const auto& [name, v] : values) s[name] = {v[0], v[1], v[2]};
  return s;
}

QuerySet query_set(const std::vector<std::pair<std::string, std::vector<float>>>& queries) {
  std::vector<PartQuery> parts;
  for (const auto& [name, emb] : queries) parts.push_back({name, emb});
  return QuerySet(std::move(parts));
}

mpm::Boundary boundary_from(const std::string& s) {
  if (s == "sticky") return mpm::Boundary::Sticky;
  if (s == "slip") return mpm::Boundary::Slip;
  if (s == "open") return mpm::Boundary::Open;
  throw Error(ErrorCode::InvalidArgument, "boundary must be sticky, slip or open");
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["mat_acc"] = m.mat_acc;
  d["mse_log_e"] = m.mse_log_e;
  d["mse_nu"] = m.mse_nu;
  d["mse_log_rho"] = m.mse_log_rho;
  d["avg_cont_mse"] = m.avg_cont_mse;
  return d;
}

}  // namespace

PYBIND11_MODULE(pypixie, m) {
  m.doc() = "Voxel material prediction, constrained sampling and MPM simulation";

  // Kept alive for the life of the interpreter.
  static py::handle error_type = py::exception<Error>(m, "PixieError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("code") = std::string(error_code_name(e.code()));
      if (const auto* pe = dynamic_cast<const constraint::ParseError*>(&e)) exc.attr("offset") = pe->offset();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("MATERIAL_CLASSES") = [] {
    py::list names;
    for (auto c : kAllMaterialClasses) names.append(std::string(material_class_name(c)));
    return names;
  }();

  m.def("set_thread_count", &set_thread_count, py::arg("threads"));
  m.def("thread_count", &thread_count);

  m.def("read_grid", [](const std::filesystem::path& path) -> py::array {
    const RawGrid g = read_raw_grid(path);
    if (g.kind == ElementKind::F32) return to_numpy(g.f32, g.dims.n, g.dims.d);
    return to_numpy(g.u8, g.dims.n, g.dims.d);
  }, py::arg("path"), "Reads a grid file as an (n, n, n[, d]) array.");

  m.def("write_feature_grid", [](const std::filesystem::path& path, const Array<float>& features) {
    write_grid(path, feature_grid(features));
  }, py::arg("path"), py::arg("features"));

  m.def("write_mask", [](const std::filesystem::path& path, const Array<std::uint8_t>& mask) {
    write_grid(path, occupancy(mask));
  }, py::arg("path"), py::arg("mask"));

  m.def("read_material_grid", [](const std::filesystem::path& path) {
    return material_arrays(read_material_grid(path));
  }, py::arg("path"), "Returns (classes, params) with params holding E, nu, rho.");

  m.def("write_material_grid", [](const std::filesystem::path& path, const Array<std::uint8_t>& classes,
                                  const Array<double>& params) {
    write_material_grid(path, material_grid(classes, params));
  }, py::arg("path"), py::arg("classes"), py::arg("params"));

  m.def("parse_constraint", [](const std::string& text) { return constraint::to_string(*constraint::parse(text)); },
        py::arg("text"), "Returns the canonical fully parenthesised form.");

  m.def("evaluate_constraint", [](const std::string& text,
                                  const std::map<std::string, std::array<double, 3>>& values) {
    return constraint::evaluate(*constraint::parse(text), param_sample(values));
  }, py::arg("text"), py::arg("values"), "values maps part name to (E, nu, rho).");

  m.def("sample_spec", [](const std::string& spec_json, std::uint64_t seed, int max_tries) {
    const auto spec = config::material_spec_from_json(config::parse_json(spec_json));
    return sampled_dict(sample_spec(spec, seed, max_tries));
  }, py::arg("spec_json"), py::arg("seed") = 0, py::arg("max_tries") = 1000);

  m.def("segment", [](const Array<float>& features, const Array<std::uint8_t>& mask,
                      const std::vector<std::pair<std::string, std::vector<float>>>& queries) {
    const auto r = segment(feature_grid(features), occupancy(mask), query_set(queries));
    return to_numpy(r.labels.data(), r.labels.n(), 1);
  }, py::arg("features"), py::arg("mask"), py::arg("queries"),
        "Cosine-similarity part labels; 255 marks unoccupied voxels.");

  m.def("generate_scene", [](const std::string& spec_json, int n) {
    const auto spec = config::synth_spec_from_json(config::parse_json(spec_json));
    const SynthScene s = generate(spec, n, SceneBounds::unit_cube());
    py::dict out;
    out["features"] = to_numpy(s.features.data(), n, s.features.d());
    out["density"] = to_numpy(s.density.data(), n, 1);
    out["labels"] = to_numpy(s.labels.data(), n, 1);
    const py::tuple material = material_arrays(s.material);
    out["classes"] = material[0];
    out["params"] = material[1];
    out["sampled"] = sampled_dict(s.sampled);
    return out;
  }, py::arg("spec_json"), py::arg("n"));

  py::class_<PredictorModel>(m, "Model")
      .def(py::init([](int input_dim, int width, std::uint64_t seed) {
             return PredictorModel::initialized(input_dim, width, seed);
           }),
           py::arg("input_dim"), py::arg("width"), py::arg("seed") = 0)
      .def_static("load", &read_model, py::arg("path"))
      .def("save", [](const PredictorModel& model, const std::filesystem::path& path) { write_model(path, model); },
           py::arg("path"))
      .def_property_readonly("input_dim", &PredictorModel::input_dim)
      .def_property_readonly("width", &PredictorModel::width)
      .def_property_readonly("params", [](const PredictorModel& model) {
        const auto p = model.params();
        return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
      })
      .def("forward", [](const PredictorModel& model, const Array<float>& features, const Array<std::uint8_t>& mask) {
        const PredictionGrid pred = forward(model, feature_grid(features), occupancy(mask));
        return to_numpy(pred.data(), pred.n(), kOutputChannels);
      }, py::arg("features"), py::arg("mask"), "Per-voxel 8 logits then 3 normalized continuous values.")
      .def("predict_materials", [](const PredictorModel& model, const Array<float>& features,
                                   const Array<std::uint8_t>& mask) {
        const OccupancyMask occ = occupancy(mask);
        return material_arrays(to_material_grid(forward(model, feature_grid(features), occ), occ,
                                                NormStats::defaults()));
      }, py::arg("features"), py::arg("mask"))
      .def("evaluate", [](const PredictorModel& model, const Array<float>& features, const Array<std::uint8_t>& mask,
                          const Array<std::uint8_t>& classes, const Array<double>& params) {
        const OccupancyMask occ = occupancy(mask);
        const auto gt = normalize_targets(material_grid(classes, params), NormStats::defaults());
        return metrics_dict(evaluate_prediction(forward(model, feature_grid(features), occ), gt, occ));
      }, py::arg("features"), py::arg("mask"), py::arg("classes"), py::arg("params"));

  m.def("train", [](PredictorModel model, const py::list& examples, int epochs, double learning_rate,
                    const std::string& optimizer, double lambda) {
    std::vector<TrainingExample> data;
    for (const auto& item : examples) {
      const auto ex = item.cast<py::dict>();
      const auto classes = ex["classes"].cast<Array<std::uint8_t>>();
      MaterialGrid material = material_grid(classes, ex["params"].cast<Array<double>>());
      const OccupancyMask mask = material.occupancy();
      data.push_back({feature_grid(ex["features"].cast<Array<float>>()), std::move(material), mask});
    }
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = learning_rate;
    cfg.lambda = lambda;
    if (optimizer == "adam") cfg.optimizer = Optimizer::Adam;
    else if (optimizer != "gd") throw Error(ErrorCode::InvalidArgument, "optimizer must be gd or adam");
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(std::move(model), data, cfg);
    }
    std::vector<double> losses;
    for (const auto& e : r.trace) losses.push_back(e.loss.total);
    return py::make_tuple(r.model, losses);
  }, py::arg("model"), py::arg("examples"), py::arg("epochs") = 200, py::arg("learning_rate") = 0.5,
        py::arg("optimizer") = "gd", py::arg("lam") = 1.0,
        "examples: dicts with features, classes, params. Returns (model, loss per epoch).");

  m.def("simulate", [](const Array<double>& positions, const Array<double>& volumes,
                       const Array<std::uint8_t>& classes, const Array<double>& params, int grid_res, double dx,
                       double dt, int frames, int substeps, std::array<double, 3> gravity,
                       const std::string& boundary) {
    const auto pinfo = positions.request();
    if (pinfo.ndim != 2 || pinfo.shape[1] != 3) throw Error(ErrorCode::DimensionMismatch, "positions must be (N, 3)");
    const auto count = static_cast<std::size_t>(pinfo.shape[0]);
    if (static_cast<std::size_t>(volumes.size()) != count || static_cast<std::size_t>(classes.size()) != count ||
        static_cast<std::size_t>(params.size()) != 3 * count) {
      throw Error(ErrorCode::DimensionMismatch, "volumes, classes and params must match positions");
    }
    std::vector<mpm::Particle> ps;
    for (std::size_t i = 0; i < count; ++i) {
      const double* x = positions.data() + 3 * i;
      const double* p = params.data() + 3 * i;
      ps.push_back(mpm::make_particle(Vec3(x[0], x[1], x[2]), volumes.data()[i],
                                      material_class_from_index(classes.data()[i]), {p[0], p[1], p[2]}));
    }
    mpm::SimConfig cfg;
    cfg.grid_res = grid_res;
    cfg.dx = dx;
    cfg.dt = dt;
    cfg.frames = frames;
    cfg.substeps = substeps;
    cfg.gravity = Vec3(gravity[0], gravity[1], gravity[2]);
    cfg.boundary.fill(boundary_from(boundary));
    mpm::Trajectory t;
    {
      py::gil_scoped_release release;
      t = mpm::run(cfg, std::move(ps));
    }
    py::array_t<double> out({static_cast<py::ssize_t>(t.frame_count()), static_cast<py::ssize_t>(count),
                             py::ssize_t{3}});
    double* dst = out.mutable_data();
    for (const auto& frame : t.positions) {
      for (const auto& x : frame) {
        *dst++ = x.x();
        *dst++ = x.y();
        *dst++ = x.z();
      }
    }
    return out;
  }, py::arg("positions"), py::arg("volumes"), py::arg("classes"), py::arg("params"), py::arg("grid_res") = 64,
        py::arg("dx") = 1.0 / 64, py::arg("dt") = 1e-4, py::arg("frames") = 50, py::arg("substeps") = 10,
        py::arg("gravity") = std::array<double, 3>{0.0, 0.0, -9.8}, py::arg("boundary") = "sticky",
        "Returns particle positions per frame, shape (frames, N, 3).");
}
