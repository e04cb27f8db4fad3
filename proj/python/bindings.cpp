#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "hit/errors.hpp"
#include "hit/geometry_io.hpp"
#include "hit/trainer.hpp"
#include "hit/verify.hpp"

namespace py = pybind11;
using namespace hit;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Points& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw DimensionError("expected an (n, 3) array of points");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return out;
}

py::array_t<double> from_points(const std::vector<Vec3>& pts) {
  py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int d = 0; d < 3; ++d) w(i, d) = pts[i][d];
  return out;
}

py::array_t<double> from_table(const OccupancyTable& t) {
  py::array_t<double> out({static_cast<py::ssize_t>(t.parts), static_cast<py::ssize_t>(t.queries)});
  std::copy(t.values.begin(), t.values.end(), out.mutable_data());
  return out;
}

PointCloud to_cloud(const Points& a) {
  PointCloud pc;
  pc.points = to_points(a);
  return pc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical convex part decomposition";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputDomainError>(m, "InputDomainError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  m.def("mix_seed", &mix_seed, py::arg("a"), py::arg("b"), py::arg("c") = 0, py::arg("d") = 0);

  py::class_<SyntheticShape>(m, "Shape")
      .def_readonly("family", &SyntheticShape::family)
      .def_property_readonly("part_count", &SyntheticShape::part_count)
      .def("occupancy",
           [](const SyntheticShape& s, const Points& pts) {
             const auto p = to_points(pts);
             py::array_t<bool> out(static_cast<py::ssize_t>(p.size()));
             for (std::size_t i = 0; i < p.size(); ++i) out.mutable_data()[i] = s.occupancy(p[i]);
             return out;
           })
      .def(
          "sample_surface",
          [](const SyntheticShape& s, std::size_t n, std::uint64_t seed) {
            const PointCloud pc = s.sample_surface(n, seed);
            return py::make_tuple(from_points(pc.points), py::array_t<int>(static_cast<py::ssize_t>(pc.labels.size()), pc.labels.data()));
          },
          py::arg("n"), py::arg("seed") = 0);
  m.def("generate_shape", &generate_shape, py::arg("family"), py::arg("seed") = 0);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def_static("desk", &TrainConfig::desk)
      .def_static("paper", &TrainConfig::paper)
      .def_static("parse",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return parse_train_config(in);
                  })
      .def("set", [](TrainConfig& c, const std::string& key, const std::string& value) {
        set_train_config_value(c, key, value);
        return c;
      })
      .def("validate", &TrainConfig::validate)
      .def("text", &format_train_config)
      .def_readwrite("max_steps", &TrainConfig::max_steps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("num_shapes", &TrainConfig::num_shapes)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate);

  m.def(
      "train",
      [](const TrainConfig& cfg, const std::filesystem::path& out) {
        py::gil_scoped_release release;
        const TrainOutputs res = train(cfg, out);
        return std::make_pair(res.log, res.final_checkpoint);
      },
      py::arg("config"), py::arg("out"), "Runs training; returns (metrics log, final checkpoint).");

  py::class_<HierarchySnapshot>(m, "Hierarchy")
      .def_property_readonly("level_count", &HierarchySnapshot::level_count)
      .def("parts", [](const HierarchySnapshot& s, std::size_t l) { return s.level(l).convexes.size(); })
      .def("parents", [](const HierarchySnapshot& s, std::size_t l) { return s.level(l).parents; })
      .def("raw", [](const HierarchySnapshot& s, std::size_t l, const Points& p) { return from_table(s.raw(l, to_points(p))); })
      .def("contained",
           [](const HierarchySnapshot& s, std::size_t l, const Points& p) { return from_table(s.contained(l, to_points(p))); })
      .def("segment",
           [](const HierarchySnapshot& s, const Points& p) {
             return segment_points(s.contained(s.level_count(), to_points(p)));
           })
      .def(
          "export",
          [](const HierarchySnapshot& s, const std::filesystem::path& dir, std::size_t res) {
            const ExportSummary sum = export_hierarchy(s, dir, {res, 0.5, {}});
            return py::make_tuple(sum.meshes, sum.tree, sum.skipped);
          },
          py::arg("dir"), py::arg("res") = 64)
      .def("tree_text", [](const HierarchySnapshot& s) {
        std::vector<TreeNode> nodes;
        for (std::size_t l = 1; l <= s.level_count(); ++l)
          for (std::size_t i = 0; i < s.level(l).convexes.size(); ++i) nodes.push_back({l, i, s.level(l).parents[i], false});
        return format_tree(s, nodes);
      });
  m.def("read_tree", [](const std::filesystem::path& p) { return read_tree(p).snapshot; });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("step", &Checkpoint::step)
      .def_readonly("config", &Checkpoint::config)
      .def("snapshot", [](const Checkpoint& ck, const Points& pts) { return ck.model.snapshot(to_cloud(pts)); })
      .def("parameter_names", [](const Checkpoint& ck) {
        std::vector<std::string> names;
        for (const auto& [n, t] : ck.model.parameters()) names.push_back(n);
        return names;
      });
  m.def("load_checkpoint", py::overload_cast<const std::filesystem::path&>(&load_checkpoint));
  m.def("init_checkpoint", &init_checkpoint);

  m.def(
      "marching_cubes",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> values, double threshold, Vec3 lo, Vec3 hi) {
        if (values.ndim() != 3 || values.shape(0) != values.shape(1) || values.shape(1) != values.shape(2))
          throw DimensionError("marching_cubes: expected a cubic (res, res, res) array indexed [z, y, x]");
        SampleGrid g;
        g.res = static_cast<std::size_t>(values.shape(0));
        g.bounds = {lo, hi};
        g.values.assign(values.data(), values.data() + values.size());
        const Mesh mesh = marching_cubes(g, threshold);
        py::array_t<std::uint32_t> faces({static_cast<py::ssize_t>(mesh.triangles.size()), py::ssize_t{3}});
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i)
          for (int k = 0; k < 3; ++k) faces.mutable_data()[i * 3 + k] = mesh.triangles[i][k];
        return py::make_tuple(from_points(mesh.vertices), faces);
      },
      py::arg("values"), py::arg("threshold") = 0.5, py::arg("lo") = Vec3{-0.55, -0.55, -0.55},
      py::arg("hi") = Vec3{0.55, 0.55, 0.55});

  m.def("chamfer", [](const Points& a, const Points& b) { return chamfer(to_points(a), to_points(b)); });
  m.def("segmentation_iou", [](const std::vector<int>& pred, const std::vector<int>& gt) {
    const SegmentationScore s = segmentation_iou(pred, gt);
    return py::make_tuple(s.mean, s.per_label);
  });
  m.def("associate_labels", [](const std::vector<int>& ref, const std::vector<std::size_t>& seg, std::size_t codes) {
    return associate_labels(ref, seg, codes).code_labels;
  });

  m.def(
      "verify",
      [](const std::string& suite, std::uint64_t seed) {
        const SuiteReport r = run_verify_suite(suite, seed);
        return py::make_tuple(r.passed(), r.format());
      },
      py::arg("suite"), py::arg("seed") = 0);
}
