// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion names (AC1 ... AC9) to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "openvox/bvh.hpp"
#include "openvox/coverage.hpp"
#include "openvox/pipeline.hpp"
#include "openvox/semantics.hpp"
#include "openvox/snapshot.hpp"
#include "openvox/synthbench.hpp"
#include "openvox/tensor_io.hpp"
#include "openvox/trajgen.hpp"
#include "oracles.hpp"

using namespace openvox;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kMeanDTol = 1e-3;
constexpr double kHandCaseTol = 1e-3;
constexpr double kTranslationTol = 1e-4;
constexpr double kConfusionTol = 1e-6;
constexpr double kReplayTol = 1e-6;
constexpr double kAc1Budget = 1.0;
constexpr double kAc3Budget = 30.0;
constexpr double kAc5Budget = 120.0;
constexpr double kAc6Budget = 1800.0;
constexpr double kAc6FrameRatio = 2.0;
constexpr double kAc6MemoryRatio = 2.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}
std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("openvox_accept_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<float> random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(dim);
  double s = 0;
  for (auto& x : v) {
    x = n(rng);
    s += double(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(s));
  return v;
}

VoxelSet random_voxels(std::mt19937_64& rng, int count, int extent, double res, VoxelKey offset = {}) {
  std::uniform_int_distribution<int> d(0, extent - 1);
  std::vector<VoxelKey> keys;
  for (int i = 0; i < count; ++i) keys.push_back({offset.x + d(rng), offset.y + d(rng), offset.z + d(rng)});
  return VoxelSet::from_keys(std::move(keys), res);
}

VoxelSet block(int x0, int y0, int z0, int nx, int ny, int nz, double res) {
  std::vector<VoxelKey> keys;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) keys.push_back({x0 + x, y0 + y, z0 + z});
  return VoxelSet::from_keys(std::move(keys), res);
}

FeatureGrid random_grid(std::mt19937_64& rng, int rows, int cols, int dim) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureGrid g;
  g.rows = rows;
  g.cols = cols;
  g.dim = dim;
  g.data.resize(static_cast<std::size_t>(rows) * cols * dim);
  for (auto& x : g.data) x = n(rng);
  return g;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

bool same_bytes(const fs::path& a, const fs::path& b) { return read_file_bytes(a) == read_file_bytes(b); }

bool same_snapshot_files(const fs::path& a, const fs::path& b) {
  for (const char* name : {"map.json", "voxels.dten", "semantic.dten", "quality.dten", "tracking.dten"}) {
    if (!same_bytes(a / name, b / name)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Outcome ac1_distinctiveness() {
  Outcome o;
  std::mt19937_64 rng(1001);
  double worst_mean = 0, worst_shift = 0;
  for (int t = 0; t < 200; ++t) {
    const int rows = 2 + static_cast<int>(rng() % 15), cols = 2 + static_cast<int>(rng() % 15);
    auto g = random_grid(rng, rows, cols, 16 + static_cast<int>(rng() % 49));
    const auto d = compute_distinctiveness(g);
    const double mean = std::accumulate(d.values.begin(), d.values.end(), 0.0) / d.values.size();
    worst_mean = std::max(worst_mean, std::abs(mean - 1.0));
    std::normal_distribution<float> n(0.0f, 3.0f);
    std::vector<float> shift(g.dim);
    for (auto& s : shift) s = n(rng);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += shift[i % g.dim];
    const auto d2 = compute_distinctiveness(g);
    for (std::size_t i = 0; i < d.values.size(); ++i) worst_shift = std::max(worst_shift, double(std::abs(d2.values[i] - d.values[i])));
  }
  o.require(worst_mean <= kMeanDTol, fmt("mean(D) off by %.2e", worst_mean));
  o.require(worst_shift <= kTranslationTol, fmt("translation changed D by %.2e", worst_shift));

  FeatureGrid uniform;
  uniform.rows = 3;
  uniform.cols = 4;
  uniform.dim = 5;
  uniform.data.assign(60, 0.0f);
  for (std::size_t i = 0; i < 60; ++i) uniform.data[i] = static_cast<float>(i % 5) - 2.0f;
  const auto du = compute_distinctiveness(uniform);
  o.require(std::all_of(du.values.begin(), du.values.end(), [](float v) { return v == 0.0f; }), "uniform grid D != 0");

  FeatureGrid hand;
  hand.rows = hand.cols = 2;
  hand.dim = 2;
  hand.data = {1, 0, 1, 0, 1, 0, 0, 1};
  const auto dh = compute_distinctiveness(hand);
  const double expect[] = {2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 2.0};
  for (int i = 0; i < 4; ++i) o.require(std::abs(dh.values[i] - expect[i]) <= kHandCaseTol, "2x2 hand case");
  o.note(fmt("max |mean(D)-1| %.1e, max shift delta %.1e", worst_mean, worst_shift));
  return o;
}

Outcome ac2_quality() {
  Outcome o;
  const int h = 120, w = 160;
  const int plateau = static_cast<int>(std::ceil(h * w / 3.3));
  bool plateau_ok = true;
  for (int area = 0; area <= h * w; ++area) {
    const float s = s_size(static_cast<std::size_t>(area), h, w);
    const bool on = 3.3 * area >= h * w;
    if ((on && s != 1.0f) || (!on && !(s < 1.0f)) || s < 0.0f) plateau_ok = false;
  }
  o.require(plateau_ok, "s_size plateau");
  o.note("plateau from |M| = " + std::to_string(plateau));

  const std::vector<Eigen::Vector3f> rays(2, Eigen::Vector3f(0, 0, 1));
  const std::vector<Eigen::Vector3f> facing(2, Eigen::Vector3f(0, 0, -1));
  const std::vector<Eigen::Vector3f> side(2, Eigen::Vector3f(1, 0, 0));
  const std::vector<Eigen::Vector3f> mixed{{0, 0, -1}, {0, 0, 1}};
  o.require(s_angle(facing, rays) == 1.0f && s_angle(side, rays) == 0.0f && s_angle(mixed, rays) == 0.5f,
            "s_angle analytic cases");

  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  bool range_ok = true, product_ok = true;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Eigen::Vector3f> n(8), r(8);
    for (int i = 0; i < 8; ++i) {
      const auto a = random_unit(rng, 3), b = random_unit(rng, 3);
      n[i] = {a[0], a[1], a[2]};
      r[i] = {b[0], b[1], b[2]};
    }
    const float sa = s_angle(n, r);
    if (!(sa >= 0.0f && sa <= 1.0f)) range_ok = false;
    const float sz = u(rng), sm = u(rng), sd = 0.5f + 2.0f * u(rng);
    const auto q = quality(sz, sa, sm, sd);
    const float geo = sz * sa;
    if (q.s_geo != geo || q.q != geo * sm * sd) product_ok = false;
  }
  o.require(range_ok, "s_angle outside [0,1]");
  o.require(product_ok, "Q is not the bit-exact product");

  std::vector<SemanticFeature> obs;
  for (int i = 0; i < 20; ++i) obs.push_back({random_unit(rng, 8), u(rng)});
  const auto best = *std::max_element(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.quality < b.quality; });
  bool order_ok = true;
  for (int p = 0; p < 1000; ++p) {
    std::shuffle(obs.begin(), obs.end(), rng);
    SemanticFeature cur = obs[0];
    for (std::size_t i = 1; i < obs.size(); ++i) cur = fuse_semantic(cur, obs[i]);
    if (!(cur == best)) order_ok = false;
  }
  o.require(order_ok, "fuse_semantic depends on order");
  return o;
}

Outcome ac3_geometry() {
  Outcome o;
  std::mt19937_64 rng(1003);
  const double res = 0.05;
  int overlap_bad = 0;
  for (int t = 0; t < 500; ++t) {
    const auto a = random_voxels(rng, 1 + static_cast<int>(rng() % 400), 12, res);
    const auto b = random_voxels(rng, 1 + static_cast<int>(rng() % 400), 12, res,
                                 {static_cast<int>(rng() % 6), 0, static_cast<int>(rng() % 6)});
    const auto ov = voxel_overlap(a, b);
    const std::size_t inter = oracle::intersection(a, b);
    const double omin = static_cast<double>(inter) / static_cast<double>(std::min(a.size(), b.size()));
    if (ov.intersection != inter || ov.overlap_min != omin) ++overlap_bad;
  }
  o.require(overlap_bad == 0, std::to_string(overlap_bad) + " overlap mismatches");

  int dbscan_bad = 0;
  std::size_t largest = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<Eigen::Vector3f> pts;
    const int n = 50 + static_cast<int>(rng() % 1951);
    const int clusters = 1 + static_cast<int>(rng() % 5);
    std::uniform_real_distribution<float> c(-1.0f, 1.0f);
    std::normal_distribution<float> g(0.0f, 0.03f + 0.02f * static_cast<float>(t % 4));
    std::vector<Eigen::Vector3f> centers;
    for (int k = 0; k < clusters; ++k) centers.push_back({c(rng), c(rng), c(rng)});
    for (int i = 0; i < n; ++i) {
      if (i % 10 == 0) {
        pts.push_back({c(rng), c(rng), c(rng)});
      } else {
        pts.push_back(centers[i % clusters] + Eigen::Vector3f(g(rng), g(rng), g(rng)));
      }
    }
    largest = std::max(largest, pts.size());
    const double eps = 0.03 + 0.01 * (t % 5);
    const int min_pts = 3 + t % 8;
    if (dbscan_labels(pts, eps, min_pts) != oracle::dbscan(pts, eps, min_pts)) ++dbscan_bad;
  }
  o.require(largest <= 2000, "cloud larger than 2000 points");
  o.require(dbscan_bad == 0, std::to_string(dbscan_bad) + " DBSCAN label mismatches");

  int bvh_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<VoxelSet> sets;
    std::vector<BvhItem> items;
    const int count = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < count; ++i) {
      sets.push_back(random_voxels(rng, 1 + static_cast<int>(rng() % 30), 8, res,
                                   {static_cast<int>(rng() % 60), static_cast<int>(rng() % 60), static_cast<int>(rng() % 10)}));
      items.push_back({static_cast<std::uint64_t>(i), sets.back().bounds()});
    }
    const Bvh bvh = Bvh::build(items);
    const auto q = random_voxels(rng, 1 + static_cast<int>(rng() % 60), 12, res,
                                 {static_cast<int>(rng() % 60), static_cast<int>(rng() % 60), 0});
    const double margin = 0.1 * static_cast<double>(rng() % 3);
    const auto hits = bvh.query(q.bounds(), margin);
    const std::set<std::uint64_t> got(hits.begin(), hits.end());
    for (int i = 0; i < count; ++i) {
      const bool touches = oracle::intersection(q, sets[i]) > 0;
      const bool box_hit = q.bounds().inflated(margin).intersects(items[i].box);
      if ((touches && !got.count(i)) || (box_hit != static_cast<bool>(got.count(i)))) {
        ++bvh_bad;
        break;
      }
    }
  }
  o.require(bvh_bad == 0, std::to_string(bvh_bad) + " BVH trials missed a contact");
  return o;
}

std::vector<FrameRecord> orbit_frames(const SyntheticScene& scene, int n, int res, const NoiseModel& noise) {
  const auto poses = orbit_trajectory(scene, n, 2.5, 0.8);
  const auto K = default_intrinsics(res, res);
  std::vector<FrameRecord> frames;
  for (int i = 0; i < n; ++i) frames.push_back(render_frame(scene, poses[i], K, noise, i));
  return frames;
}

InstanceMap run_mapping(const std::vector<FrameRecord>& frames) {
  MappingSession session({});
  for (const auto& f : frames) session.process(f);
  session.finish();
  return session.map();
}

Outcome ac4_determinism() {
  Outcome o;
  SceneConfig c;
  c.seed = 1004;
  const auto scene = generate_scene(c);
  const auto frames = orbit_frames(scene, 60, 168, {0.01, 0.05, 0.05});
  ScratchDir dir("ac4");
  const auto a = run_mapping(frames);
  const auto b = run_mapping(frames);
  save_map(a, dir.path() / "a");
  save_map(b, dir.path() / "b");
  o.require(same_snapshot_files(dir.path() / "a", dir.path() / "b"), "snapshots differ");

  std::size_t violations = 0, pairs = 0;
  for (auto i = a.instances().begin(); i != a.instances().end(); ++i)
    for (auto j = std::next(i); j != a.instances().end(); ++j) {
      ++pairs;
      const double omin = static_cast<double>(oracle::intersection(i->second.voxels, j->second.voxels)) /
                          static_cast<double>(std::min(i->second.voxels.size(), j->second.voxels.size()));
      if (omin >= a.config().tau_geo && cosine(i->second.tracking, j->second.tracking) >= a.config().tau_vis) ++violations;
    }
  o.require(violations == 0, std::to_string(violations) + " qualifying pairs after finalize");
  o.note(std::to_string(a.instances().size()) + " instances, " + std::to_string(pairs) + " pairs checked");
  return o;
}

Outcome ac5_end_to_end() {
  Outcome o;
  SceneConfig c;
  c.seed = 7;
  const auto scene = generate_scene(c);
  const auto poses = orbit_trajectory(scene, 200, 2.5, 0.8);
  const auto K = default_intrinsics(224, 224);
  const NoiseModel noise{0.01, 0.05, 0.0};
  MappingSession session({});
  for (int i = 0; i < 200; ++i) session.process(render_frame(scene, poses[i], K, noise, i));
  session.finish();
  const auto report = evaluate_map(session.map(), export_ground_truth(scene, 0.05), prototype_table(scene), {});
  const std::size_t n = session.map().instances().size();
  const double acc1 = report.retrieval.acc_at_k.at(1);
  o.require(n >= 8 && n <= 14, "instance count " + std::to_string(n));
  o.require(acc1 >= 0.9, fmt("Acc@1 %.3f", acc1));
  o.require(report.segmentation.macc >= 0.9, fmt("mAcc %.3f", report.segmentation.macc));
  o.require(report.unassigned_fraction < 0.05, fmt("unassigned %.4f", report.unassigned_fraction));
  o.note(std::to_string(n) + " instances" + fmt(", Acc@1 %.3f, mAcc %.3f", acc1, report.segmentation.macc) +
         fmt(", unassigned %.4f", report.unassigned_fraction));
  return o;
}

Outcome ac6_scalability() {
  Outcome o;
  MultiRoomConfig mc;
  mc.room.seed = 11;
  mc.rooms_x = 4;
  mc.rooms_y = 10;
  const auto scene = generate_multiroom_scene(mc);
  const auto poses = room_tour(scene, 100, 2.5, 0.8);
  const auto K = default_intrinsics(224, 224);
  const NoiseModel noise{0.01, 0.05, 0.0};
  MappingSession session({});
  std::vector<double> ms;
  double per_instance_500 = 0;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const auto log = session.process(render_frame(scene, poses[k], K, noise, static_cast<std::int64_t>(k)));
    ms.push_back(log.milliseconds);
    if (k == 500) per_instance_500 = static_cast<double>(log.stats.memory_bytes) / static_cast<double>(log.stats.instances);
  }
  const auto stats = session.map().stats();
  const double per_instance_end = static_cast<double>(stats.memory_bytes) / static_cast<double>(stats.instances);
  session.finish();
  const std::size_t n = ms.size();
  o.require(n == 4000, "trajectory has " + std::to_string(n) + " frames");
  const double early = median({ms.begin() + 100, ms.begin() + 500});
  const double late = median({ms.end() - static_cast<std::ptrdiff_t>(n / 10), ms.end()});
  o.require(stats.instances >= 300, std::to_string(stats.instances) + " instances");
  o.require(late <= kAc6FrameRatio * early, fmt("late median %.1f ms vs early %.1f ms", late, early));
  o.require(per_instance_end <= kAc6MemoryRatio * per_instance_500, "memory per instance grew");
  o.note(std::to_string(stats.instances) + " instances" + fmt(", median ms early %.1f late %.1f", early, late) +
         fmt(", bytes/instance %.0f -> %.0f", per_instance_500, per_instance_end));
  return o;
}

Outcome ac7_evaluation() {
  Outcome o;
  std::mt19937_64 rng(1007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::vector<double>> s(7, std::vector<double>(7));
    for (auto& row : s)
      for (auto& v : row) v = u(rng);
    double v = 0;
    for (auto [r, c] : solve_assignment(s)) v += s[r][c];
    if (std::abs(v - oracle::best_assignment(s)) > 1e-9) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " Hungarian trials below the optimum");

  bool curve_ok = true;
  for (int t = 0; t < 200; ++t) {
    const std::size_t classes = 2 + rng() % 30;
    TextEmbeddingTable table;
    table.dim = 16;
    for (std::size_t c = 0; c < classes; ++c) {
      table.names.push_back("c" + std::to_string(c));
      const auto e = random_unit(rng, 16);
      table.embeddings.insert(table.embeddings.end(), e.begin(), e.end());
    }
    std::vector<MatchedObject> objs;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 40); ++i) objs.push_back({random_unit(rng, 16), static_cast<int>(rng() % classes)});
    std::vector<std::size_t> ks(classes);
    std::iota(ks.begin(), ks.end(), 1);
    const auto m = retrieval_metrics(objs, table, ks);
    for (std::size_t k = 1; k < classes; ++k)
      if (m.acc_at_k.at(k + 1) < m.acc_at_k.at(k)) curve_ok = false;
    if (m.acc_at_k.at(classes) != 1.0) curve_ok = false;
    if (m.auc < 1.0 / static_cast<double>(classes) - 1e-12 || m.auc > 1.0) curve_ok = false;
  }
  o.require(curve_ok, "Acc@k curve properties");

  ConfusionMatrix cm(2);
  cm.add(0, 0, 5);
  cm.add(0, 1, 5);
  cm.add(1, 1, 10);
  const auto seg = segmentation_metrics(cm);
  o.require(std::abs(seg.macc - 0.75) <= kConfusionTol, fmt("mAcc %.6f", seg.macc));
  o.require(std::abs(seg.miou - 7.0 / 12.0) <= kConfusionTol, fmt("mIoU %.6f", seg.miou));
  return o;
}

// Three rooms around a solid corner, joined by doorways.
OccupancyGrid three_rooms() {
  OccupancyGrid g = OccupancyGrid::all_free(25, 25, 0.1);
  for (int y = 0; y < 25; ++y)
    for (int x = 0; x < 25; ++x) {
      const bool corner = x >= 12 && y >= 12;
      const bool wall_x = x == 12 && (y < 5 || y > 7);
      const bool wall_y = y == 12 && (x < 5 || x > 7);
      if (corner || wall_x || wall_y) g.occupied[g.index(x, y)] = 1;
    }
  return g;
}

Outcome ac8_trajgen() {
  Outcome o;
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<double> w(0.5, 3.0);
  int cpp_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 6);
    PlaceGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back(Eigen::Vector2d(i, 0));
    std::set<std::pair<int, int>> seen;
    for (int v = 1; v < n; ++v) {
      const int u = static_cast<int>(rng() % v);
      g.edges.push_back({u, v, w(rng)});
      seen.insert({u, v});
    }
    while (g.edges.size() < 8 && rng() % 3 != 0) {
      int u = static_cast<int>(rng() % n), v = static_cast<int>(rng() % n);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (!seen.insert({u, v}).second) continue;
      g.edges.push_back({u, v, w(rng)});
    }
    const auto tour = chinese_postman(g);
    if (std::abs(tour.length - oracle::postman_length(g)) > 1e-9 || !tour.optimal) ++cpp_bad;
  }
  o.require(cpp_bad == 0, std::to_string(cpp_bad) + " postman tours above the optimum");

  PlaceGraph cycle;
  for (int i = 0; i < 5; ++i) cycle.nodes.push_back(Eigen::Vector2d(i, 0));
  for (int i = 0; i < 5; ++i) cycle.edges.push_back({i, (i + 1) % 5, 1.0 + i});
  const auto ct = chinese_postman(cycle);
  o.require(ct.duplicated_edges.empty() && std::abs(ct.length - 15.0) < 1e-12, "Eulerian cycle duplicated edges");

  PlaceGraph path;
  for (int i = 0; i < 3; ++i) path.nodes.push_back(Eigen::Vector2d(i, 0));
  path.edges = {{0, 1, 1.0}, {1, 2, 2.0}};
  o.require(chinese_postman(path).length == 6.0, "path graph length");

  const auto grid = three_rooms();
  const auto places = extract_places(grid);
  const auto graph = build_place_graph(grid, places);
  const auto traj = smooth_trajectory(chinese_postman(graph), graph, grid);
  const auto again = replay(traj.poses.front(), traj.actions);
  double drift = 0;
  bool free = true;
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    drift = std::max({drift, std::abs(again.poses[i].x - traj.poses[i].x), std::abs(again.poses[i].y - traj.poses[i].y),
                      std::abs(again.poses[i].yaw - traj.poses[i].yaw)});
    free = free && grid.is_free(Eigen::Vector2d(traj.poses[i].x, traj.poses[i].y));
  }
  o.require(drift <= kReplayTol, fmt("replay drift %.2e", drift));
  o.require(free, "trajectory pose in occupied space");

  // Coverage: monotone in poses and equal to brute-force visibility.
  const double res = 0.05;
  CameraModel cam;
  cam.width = cam.height = 24;
  int vis_bad = 0, mono_bad = 0;
  for (int t = 0; t < 10; ++t) {
    CoverageScene s{res, {}};
    for (std::uint64_t b = 0; b < 3; ++b) {
      const int x = -15 + static_cast<int>(rng() % 30), y = -15 + static_cast<int>(rng() % 30);
      s.instances.push_back({b, "box", 0, block(x, y, 0, 2 + rng() % 8, 2 + rng() % 8, 2 + rng() % 20, res)});
    }
    std::vector<CameraPose> poses;
    std::set<VoxelKey> expected;
    std::size_t last = 0;
    for (int k = 0; k < 4; ++k) {
      const double a = 2 * std::numbers::pi * (k + 0.1 * t) / 4;
      AgentPose ap{2.0 * std::cos(a) + 0.0131, 2.0 * std::sin(a) - 0.0077, 0.0};
      ap.yaw = std::atan2(-ap.y, -ap.x);
      poses.push_back(agent_camera(ap, 0.5));
      const auto one = oracle::covered_voxels(s, poses.back(), cam);
      expected.insert(one.begin(), one.end());
      const auto r = coverage_analysis(s, poses, cam);
      if (r.covered_surface_voxels != expected.size()) ++vis_bad;
      if (r.covered_surface_voxels < last) ++mono_bad;
      last = r.covered_surface_voxels;
    }
  }
  o.require(vis_bad == 0, std::to_string(vis_bad) + " coverage results differ from brute force");
  o.require(mono_bad == 0, "coverage decreased with more poses");
  return o;
}

Outcome ac9_io() {
  Outcome o;
  std::mt19937_64 rng(1009);
  ScratchDir dir("ac9");
  int tensor_bad = 0, snapshot_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const int rank = static_cast<int>(rng() % 5);
    std::vector<std::uint32_t> dims;
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      dims.push_back(static_cast<std::uint32_t>(rng() % 7));
      n *= dims.back();
    }
    Tensor x;
    if (t % 3 == 0) {
      std::vector<float> v(n);
      for (auto& e : v) e = std::normal_distribution<float>(0.0f, 100.0f)(rng);
      x = Tensor::from_f32(dims, v);
    } else if (t % 3 == 1) {
      std::vector<std::uint8_t> v(n);
      for (auto& e : v) e = static_cast<std::uint8_t>(rng());
      x = Tensor::from_u8(dims, v);
    } else {
      std::vector<std::int32_t> v(n);
      for (auto& e : v) e = static_cast<std::int32_t>(rng());
      x = Tensor::from_i32(dims, v);
    }
    const auto p = dir.path() / ("t" + std::to_string(t) + ".dten");
    write_tensor(x, p);
    const Tensor back = read_tensor(p);
    const auto q = dir.path() / ("u" + std::to_string(t) + ".dten");
    write_tensor(back, q);
    if (!(back == x) || !same_bytes(p, q)) ++tensor_bad;
  }
  for (int t = 0; t < 100; ++t) {
    const double res = 0.05;
    std::vector<Instance> insts;
    const int count = static_cast<int>(rng() % 12);
    const int ds = 4 + static_cast<int>(rng() % 8), dt = 2 + static_cast<int>(rng() % 8);
    std::uint64_t id = 0;
    for (int i = 0; i < count; ++i) {
      Instance inst;
      id += 1 + rng() % 5;
      inst.id = id;
      inst.voxels = random_voxels(rng, 1 + static_cast<int>(rng() % 200), 20, res,
                                  {static_cast<int>(rng() % 100) - 50, static_cast<int>(rng() % 100) - 50, 0});
      inst.semantic = {random_unit(rng, ds), std::uniform_real_distribution<float>(0.0f, 2.0f)(rng)};
      inst.tracking = random_unit(rng, dt);
      inst.obs_count = 1 + static_cast<std::uint32_t>(rng() % 50);
      inst.last_seen = static_cast<std::int64_t>(rng() % 1000);
      insts.push_back(std::move(inst));
    }
    AssociationConfig cfg;
    cfg.tau_geo = 0.1 + 0.05 * (t % 10);
    const auto map = InstanceMap::restore(res, cfg, insts, id + 1);
    const auto a = dir.path() / ("m" + std::to_string(t));
    const auto b = dir.path() / ("n" + std::to_string(t));
    save_map(map, a);
    save_map(load_map(a), b);
    if (!same_snapshot_files(a, b)) ++snapshot_bad;
  }
  o.require(tensor_bad == 0, std::to_string(tensor_bad) + " tensor round-trips differ");
  o.require(snapshot_bad == 0, std::to_string(snapshot_bad) + " snapshot round-trips differ");

  CoverageReport r;
  const auto csv = coverage_csv(r);
  o.require(csv.substr(0, csv.find('\n')) == "ID,Category,Region,Model Voxels,Covered Voxels,Coverage (%)",
            "coverage CSV header");
  return o;
}

struct Criterion {
  const char* name;
  const char* title;
  std::function<Outcome()> run;
  double budget_s;  // 0 = none
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"AC1", "distinctiveness", ac1_distinctiveness, kAc1Budget},
      {"AC2", "quality score", ac2_quality, 0},
      {"AC3", "geometry oracles", ac3_geometry, kAc3Budget},
      {"AC4", "association determinism and fixpoint", ac4_determinism, 0},
      {"AC5", "synthetic end-to-end", ac5_end_to_end, kAc5Budget},
      {"AC6", "scalability", ac6_scalability, kAc6Budget},
      {"AC7", "evaluation oracles", ac7_evaluation, 0},
      {"AC8", "trajgen oracles", ac8_trajgen, 0},
      {"AC9", "I/O round-trips", ac9_io, 0},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0) o.require(s < c.budget_s, fmt("runtime %.1f s over budget %.0f s", s, c.budget_s));
    std::printf("%s %s  %s (%.2f s)%s%s\n", c.name, o.pass ? "PASS" : "FAIL", c.title, s, o.detail.empty() ? "" : ": ",
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
