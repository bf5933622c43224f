#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "openvox/error.hpp"
#include "openvox/frame.hpp"
#include "openvox/pipeline.hpp"
#include "openvox/retrieval.hpp"
#include "openvox/run_config.hpp"
#include "openvox/snapshot.hpp"
#include "openvox/tensor_io.hpp"
#include "openvox/trajgen.hpp"

namespace py = pybind11;
using namespace openvox;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<Eigen::Vector3f> points_from(const F32& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ValidationError("points must have shape (N, 3)");
  std::vector<Eigen::Vector3f> pts(a.shape(0));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) pts[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return pts;
}

py::array keys_array(std::span<const VoxelKey> keys) {
  py::array_t<std::int32_t> out({static_cast<py::ssize_t>(keys.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    w(i, 0) = keys[i].x;
    w(i, 1) = keys[i].y;
    w(i, 2) = keys[i].z;
  }
  return out;
}

py::array tensor_to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
  auto fill = [&](auto arr) {
    std::memcpy(arr.mutable_data(), t.bytes().data(), t.bytes().size());
    return py::array(arr);
  };
  switch (t.dtype()) {
    case DType::F32: return fill(py::array_t<float>(shape));
    case DType::U8: return fill(py::array_t<std::uint8_t>(shape));
    case DType::I32: return fill(py::array_t<std::int32_t>(shape));
  }
  throw InvariantError("unhandled dtype");
}

Tensor tensor_from_numpy(const py::array& a) {
  std::vector<std::uint32_t> dims(a.shape(), a.shape() + a.ndim());
  const std::size_t n = static_cast<std::size_t>(a.size());
  if (py::isinstance<py::array_t<float>>(a)) {
    auto c = py::array_t<float, py::array::c_style>::ensure(a);
    return Tensor::from_f32(dims, {c.data(), n});
  }
  if (py::isinstance<py::array_t<std::uint8_t>>(a)) {
    auto c = py::array_t<std::uint8_t, py::array::c_style>::ensure(a);
    return Tensor::from_u8(dims, {c.data(), n});
  }
  if (py::isinstance<py::array_t<std::int32_t>>(a)) {
    auto c = py::array_t<std::int32_t, py::array::c_style>::ensure(a);
    return Tensor::from_i32(dims, {c.data(), n});
  }
  throw ValidationError("only float32, uint8 and int32 arrays can be stored");
}

py::dict instance_dict(const Instance& inst) {
  py::dict d;
  d["id"] = inst.id;
  d["voxels"] = keys_array(inst.voxels.keys());
  d["feature"] = inst.semantic.vector;
  d["quality"] = inst.semantic.quality;
  d["observations"] = inst.obs_count;
  d["last_seen"] = inst.last_seen;
  return d;
}

py::list ranked(const InstanceMap& map, const F32& query, std::size_t k) {
  py::list out;
  for (const auto& r : rank_instances(map, {query.data(), static_cast<std::size_t>(query.size())}, k))
    out.append(py::make_tuple(r.id, r.cosine));
  return out;
}

py::dict plan_trajectory(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& occ,
                         double cell_size) {
  if (occ.ndim() != 2) throw ValidationError("occupancy grid must be 2-D");
  OccupancyGrid grid = OccupancyGrid::all_free(static_cast<int>(occ.shape(1)), static_cast<int>(occ.shape(0)), cell_size);
  grid.occupied.assign(occ.data(), occ.data() + occ.size());
  grid.validate();
  const ComponentResult comp = largest_component(grid);
  if (comp.largest == 0) throw ValidationError("occupancy grid has no free cells");
  const PlaceDecomposition places = extract_places(comp.grid);
  const PlaceGraph graph = build_place_graph(comp.grid, places);
  const Tour tour = chinese_postman(graph);
  const AgentTrajectory traj = smooth_trajectory(tour, graph, comp.grid);
  py::list pl, edges, poses, actions;
  for (const auto& p : places.places) pl.append(py::make_tuple(p.position.x(), p.position.y()));
  for (const auto& e : graph.edges) edges.append(py::make_tuple(e.u, e.v, e.length));
  for (const auto& p : traj.poses) poses.append(py::make_tuple(p.x, p.y, p.yaw));
  for (auto a : traj.actions) actions.append(action_name(a));
  py::dict d;
  d["largest_component_ratio"] = comp.ratio;
  d["places"] = pl;
  d["edges"] = edges;
  d["tour_length"] = tour.length;
  d["tour_optimal"] = tour.optimal;
  d["poses"] = poses;
  d["actions"] = actions;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Open-vocabulary voxel instance mapping";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", validation.ptr());
  py::register_exception<CorruptionError>(m, "CorruptionError", validation.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", error.ptr());

  m.def("read_tensor", [](const std::string& path) { return tensor_to_numpy(read_tensor(path)); }, py::arg("path"));
  m.def("write_tensor", [](const std::string& path, const py::array& a) { write_tensor(tensor_from_numpy(a), path); },
        py::arg("path"), py::arg("array"));

  m.def("effective_config", [](const std::string& json_text) { return run_config_json(parse_run_config(json_text)); },
        py::arg("json_text"), "Validate a run configuration and return it with every default filled in.");

  m.def("voxelize", [](const F32& pts, double res) { return keys_array(voxelize(points_from(pts), res).keys()); },
        py::arg("points"), py::arg("resolution"));
  m.def("dbscan_labels", [](const F32& pts, double eps, int min_pts) { return dbscan_labels(points_from(pts), eps, min_pts); },
        py::arg("points"), py::arg("eps"), py::arg("min_pts"));
  m.def("solve_assignment", &solve_assignment, py::arg("score"),
        "Maximum-score assignment of a rectangular matrix, as (row, col) pairs.");

  py::class_<InstanceMap>(m, "InstanceMap")
      .def_property_readonly("resolution", &InstanceMap::resolution)
      .def("__len__", [](const InstanceMap& map) { return map.instances().size(); })
      .def("instances",
           [](const InstanceMap& map) {
             py::list out;
             for (const auto& [id, inst] : map.instances()) out.append(instance_dict(inst));
             return out;
           })
      .def("query", &ranked, py::arg("embedding"), py::arg("k") = 5,
           "Top-k instances by cosine similarity, as (id, cosine) pairs.")
      .def("save", [](const InstanceMap& map, const std::string& dir) { save_map(map, dir); }, py::arg("dir"));
  m.def("load_map", [](const std::string& dir) { return load_map(dir); }, py::arg("dir"));

  py::class_<MappingSession>(m, "MappingSession")
      .def(py::init([](const std::string& config_json) { return MappingSession(parse_run_config(config_json).pipeline); }),
           py::arg("config_json") = "{}")
      .def(
          "process",
          [](MappingSession& s, const std::string& frame_dir) {
            const FrameLog log = s.process(load_frame(frame_dir));
            py::dict d;
            d["frame_id"] = log.report.frame_id;
            d["detections"] = log.report.detections;
            d["created"] = log.report.created;
            d["matched"] = log.report.matched;
            d["instances"] = log.stats.instances;
            return d;
          },
          py::arg("frame_dir"))
      .def("finish",
           [](MappingSession& s) {
             const FinalReport r = s.finish();
             return py::make_tuple(r.merged, r.removed, r.instances);
           })
      .def_property_readonly("map", [](const MappingSession& s) { return s.map(); });

  m.def(
      "evaluate",
      [](const InstanceMap& map, const std::string& gt_dir, const std::string& table_path, const std::string& match) {
        EvaluationConfig ec;
        if (match == "strict-iou")
          ec.match_mode = MatchMode::StrictIou;
        else if (match != "all-pairs")
          throw ValidationError("match must be all-pairs or strict-iou");
        const EvaluationReport r = evaluate_map(map, read_ground_truth(gt_dir), read_table(table_path), ec);
        py::dict d;
        d["macc"] = r.segmentation.macc;
        d["miou"] = r.segmentation.miou;
        d["fmiou"] = r.segmentation.fmiou;
        d["unassigned_fraction"] = r.unassigned_fraction;
        d["acc_at_k"] = r.retrieval.acc_at_k;
        d["auc"] = r.retrieval.auc;
        d["matched"] = r.retrieval.matched;
        return d;
      },
      py::arg("map"), py::arg("gt_dir"), py::arg("table"), py::arg("match") = "all-pairs");

  m.def("plan_trajectory", &plan_trajectory, py::arg("occupancy"), py::arg("cell_size") = 0.1,
        "Places, place graph, postman tour and agent actions over a 2-D occupancy grid.");
}
