#include "openvox/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "openvox/tensor_io.hpp"

namespace openvox {

namespace fs = std::filesystem;
using nlohmann::json;

void TextEmbeddingTable::validate() const {
  if (dim <= 0) throw ValidationError("embedding table: dimension must be positive");
  if (embeddings.size() != names.size() * static_cast<std::size_t>(dim)) {
    throw ValidationError("embedding table: payload does not match class count");
  }
  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("embedding table: class names must be unique");
  }
  for (std::size_t c = 0; c < classes(); ++c) {
    if (std::abs(norm(row(c)) - 1.0) > 1e-4) throw ValidationError("embedding table: row '" + names[c] + "' is not unit length");
  }
}

TextEmbeddingTable read_table(const fs::path& json_path) {
  TextEmbeddingTable table;
  try {
    const json j = json::parse(read_text_file(json_path));
    table.names = j.at("names").get<std::vector<std::string>>();
    const Tensor t = read_tensor(json_path.parent_path() / j.at("embeddings_file").get<std::string>());
    if (t.dtype() != DType::F32 || t.ndim() != 2 || t.dims()[0] != table.names.size()) {
      throw ValidationError("embedding table: expected f32 [C, D] with one row per name");
    }
    table.dim = static_cast<int>(t.dims()[1]);
    table.embeddings.assign(t.f32().begin(), t.f32().end());
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  table.validate();
  return table;
}

void write_table(const TextEmbeddingTable& table, const fs::path& json_path) {
  table.validate();
  const std::string payload = json_path.stem().string() + ".dten";
  write_tensor(Tensor::from_f32({static_cast<std::uint32_t>(table.classes()), static_cast<std::uint32_t>(table.dim)},
                                table.embeddings),
               json_path.parent_path() / payload);
  const json j = {{"format_version", 1}, {"names", table.names}, {"embeddings_file", payload}};
  write_text_file(json_path, j.dump(2) + "\n");
}

void GroundTruth::validate(std::size_t classes) const {
  if (points.size() != labels.size()) throw ValidationError("ground truth: one label per point required");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw ValidationError("ground truth: label out of range");
  }
  for (const auto& inst : instances) {
    if (inst.voxels.empty()) throw ValidationError("ground truth: empty instance voxel set");
    if (inst.class_index < 0 || static_cast<std::size_t>(inst.class_index) >= classes) {
      throw ValidationError("ground truth: instance class out of range");
    }
  }
}

GroundTruth read_ground_truth(const fs::path& dir) {
  GroundTruth gt;
  const fs::path index_path = dir / "gt.json";
  try {
    const json j = json::parse(read_text_file(index_path));
    gt.resolution = j.at("resolution").get<double>();
    const Tensor pts = read_tensor(dir / "gt_points.dten");
    const Tensor labels = read_tensor(dir / "gt_labels.dten");
    const Tensor voxels = read_tensor(dir / "gt_voxels.dten");
    if (pts.dtype() != DType::F32 || pts.ndim() != 2 || pts.dims()[1] != 3) throw ValidationError("gt_points: expected f32 [N,3]");
    if (labels.dtype() != DType::I32 || labels.ndim() != 1 || labels.dims()[0] != pts.dims()[0]) {
      throw ValidationError("gt_labels: expected i32 [N]");
    }
    if (voxels.dtype() != DType::I32 || voxels.ndim() != 2 || voxels.dims()[1] != 3) {
      throw ValidationError("gt_voxels: expected i32 [V,3]");
    }
    const auto p = pts.f32();
    for (std::size_t i = 0; i < pts.dims()[0]; ++i) gt.points.emplace_back(p[3 * i], p[3 * i + 1], p[3 * i + 2]);
    gt.labels.assign(labels.i32().begin(), labels.i32().end());
    std::size_t cursor = 0;
    const auto k = voxels.i32();
    for (const auto& row : j.at("instances")) {
      GtInstance inst;
      inst.id = row.at("id").get<std::uint64_t>();
      inst.class_index = row.at("class").get<int>();
      const auto count = row.at("voxel_count").get<std::size_t>();
      if (cursor + count > voxels.dims()[0]) throw CorruptionError("gt_voxels: instance counts overrun payload");
      std::vector<VoxelKey> keys(count);
      for (std::size_t v = 0; v < count; ++v) {
        const std::size_t o = 3 * (cursor + v);
        keys[v] = {k[o], k[o + 1], k[o + 2]};
      }
      cursor += count;
      inst.voxels = VoxelSet::from_keys(std::move(keys), gt.resolution);
      gt.instances.push_back(std::move(inst));
    }
  } catch (const json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
  return gt;
}

void write_ground_truth(const GroundTruth& gt, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<float> pts;
  pts.reserve(3 * gt.points.size());
  for (const auto& p : gt.points) pts.insert(pts.end(), {p.x(), p.y(), p.z()});
  std::vector<std::int32_t> keys;
  json rows = json::array();
  for (const auto& inst : gt.instances) {
    for (const auto& k : inst.voxels.keys()) keys.insert(keys.end(), {k.x, k.y, k.z});
    rows.push_back({{"id", inst.id}, {"class", inst.class_index}, {"voxel_count", inst.voxels.size()}});
  }
  const auto n = static_cast<std::uint32_t>(gt.points.size());
  write_tensor(Tensor::from_f32({n, 3}, pts), dir / "gt_points.dten");
  write_tensor(Tensor::from_i32({n}, gt.labels), dir / "gt_labels.dten");
  write_tensor(Tensor::from_i32({static_cast<std::uint32_t>(keys.size() / 3), 3}, keys), dir / "gt_voxels.dten");
  const json j = {{"format_version", 1}, {"resolution", gt.resolution}, {"instances", rows}};
  write_text_file(dir / "gt.json", j.dump(2) + "\n");
}

std::vector<RankedInstance> rank_instances(const InstanceMap& map, std::span<const float> query, std::size_t k) {
  std::vector<RankedInstance> ranked;
  ranked.reserve(map.instances().size());
  for (const auto& [id, inst] : map.instances()) ranked.push_back({id, cosine(query, inst.semantic.vector)});
  const auto better = [](const RankedInstance& a, const RankedInstance& b) {
    return a.cosine > b.cosine || (a.cosine == b.cosine && a.id < b.id);
  };
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + keep, ranked.end(), better);
  ranked.resize(keep);
  return ranked;
}

namespace {

std::vector<double> class_scores(std::span<const float> feature, const TextEmbeddingTable& table) {
  if (static_cast<int>(feature.size()) != table.dim) throw ValidationError("feature dimension differs from the table");
  std::vector<double> s(table.classes());
  for (std::size_t c = 0; c < table.classes(); ++c) s[c] = cosine(feature, table.row(c));
  return s;
}

}  // namespace

std::vector<int> classify_topk(std::span<const float> feature, const TextEmbeddingTable& table, std::size_t k) {
  const auto scores = class_scores(feature, table);
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t keep = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(),
                    [&](int a, int b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(keep);
  return idx;
}

std::size_t class_rank(std::span<const float> feature, const TextEmbeddingTable& table, int c) {
  const auto scores = class_scores(feature, table);
  if (c < 0 || static_cast<std::size_t>(c) >= scores.size()) throw ValidationError("class_rank: class out of range");
  std::size_t rank = 1;
  for (std::size_t o = 0; o < scores.size(); ++o) {
    const int oi = static_cast<int>(o);
    if (scores[o] > scores[c] || (scores[o] == scores[c] && oi < c)) ++rank;
  }
  return rank;
}

DenseTransfer dense_transfer(const InstanceMap& map, std::span<const Eigen::Vector3f> points,
                             const TextEmbeddingTable& table, double d_assign) {
  if (!(d_assign > 0.0)) throw ValidationError("dense_transfer: d_assign must be positive");
  struct Center {
    Eigen::Vector3d p;
    std::uint64_t id;
  };
  std::unordered_map<VoxelKey, std::vector<Center>, VoxelKeyHash> grid;
  std::unordered_map<std::uint64_t, int> top1;
  for (const auto& [id, inst] : map.instances()) {
    top1[id] = classify_topk(inst.semantic.vector, table, 1).front();
    for (const auto& k : inst.voxels.keys()) {
      const Eigen::Vector3d c = inst.voxels.center(k);
      grid[voxel_key(c, d_assign)].push_back({c, id});
    }
  }

  DenseTransfer out;
  out.labels.assign(points.size(), kUnassigned);
  out.instance_ids.assign(points.size(), -1);
  const double limit = d_assign * d_assign;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d p = points[i].cast<double>();
    const VoxelKey cell = voxel_key(p, d_assign);
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t best_id = 0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({cell.x + dx, cell.y + dy, cell.z + dz});
          if (it == grid.end()) continue;
          for (const auto& c : it->second) {
            const double d = (c.p - p).squaredNorm();
            if (d < best || (d == best && c.id < best_id)) {
              best = d;
              best_id = c.id;
            }
          }
        }
      }
    }
    if (best <= limit) {
      out.labels[i] = top1.at(best_id);
      out.instance_ids[i] = static_cast<std::int64_t>(best_id);
    } else {
      ++out.unassigned;
    }
  }
  return out;
}

ConfusionMatrix ConfusionMatrix::from_labels(std::size_t classes, std::span<const int> gt, std::span<const int> pred) {
  if (gt.size() != pred.size()) throw ValidationError("confusion: label arrays differ in length");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] == kUnassigned) continue;
    m.add(gt[i], pred[i]);
  }
  return m;
}

void ConfusionMatrix::add(int gt, int pred, std::uint64_t count) {
  if (gt < 0 || pred < 0 || static_cast<std::size_t>(gt) >= classes_ || static_cast<std::size_t>(pred) >= classes_) {
    throw ValidationError("confusion: class index out of range");
  }
  counts_[static_cast<std::size_t>(gt) * classes_ + pred] += count;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(c, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, c);
  return s;
}

SegmentationMetrics segmentation_metrics(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.classes();
  SegmentationMetrics m;
  m.class_accuracy.assign(n, 0.0);
  m.class_iou.assign(n, 0.0);
  m.class_support.assign(n, 0);
  double weighted = 0.0;
  std::uint64_t support = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const std::uint64_t row = confusion.row_sum(c);
    m.class_support[c] = row;
    if (row == 0) continue;
    const double diag = static_cast<double>(confusion.at(c, c));
    m.class_accuracy[c] = diag / static_cast<double>(row);
    m.class_iou[c] = diag / static_cast<double>(row + confusion.col_sum(c) - confusion.at(c, c));
    m.macc += m.class_accuracy[c];
    m.miou += m.class_iou[c];
    weighted += static_cast<double>(row) * m.class_iou[c];
    support += row;
    ++m.present_classes;
  }
  if (m.present_classes) {
    m.macc /= static_cast<double>(m.present_classes);
    m.miou /= static_cast<double>(m.present_classes);
    m.fmiou = weighted / static_cast<double>(support);
  }
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> solve_assignment(const std::vector<std::vector<double>>& score) {
  const std::size_t rows = score.size();
  const std::size_t cols = rows ? score.front().size() : 0;
  for (const auto& r : score) {
    if (r.size() != cols) throw ValidationError("solve_assignment: ragged score matrix");
  }
  if (rows == 0 || cols == 0) return {};
  // The potential-based solver wants rows <= cols.
  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows;
  const std::size_t m = transposed ? rows : cols;
  const auto cost = [&](std::size_t i, std::size_t j) { return transposed ? -score[j][i] : -score[i][j]; };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    if (transposed) {
      out.emplace_back(j - 1, match[j] - 1);
    } else {
      out.emplace_back(match[j] - 1, j - 1);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<double>> iou_matrix(std::span<const VoxelSet> pred, std::span<const VoxelSet> gt) {
  std::vector<std::vector<double>> m(pred.size(), std::vector<double>(gt.size(), 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Aabb pb = pred[i].bounds();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (!pb.intersects(gt[j].bounds())) continue;
      m[i][j] = voxel_overlap(pred[i], gt[j]).iou;
    }
  }
  return m;
}

std::vector<MatchPair> hungarian_match(const std::vector<std::vector<double>>& iou, MatchMode mode) {
  std::vector<MatchPair> pairs;
  for (const auto& [p, g] : solve_assignment(iou)) {
    const double value = iou[p][g];
    if (mode == MatchMode::StrictIou && value <= 0.5) continue;
    pairs.push_back({p, g, value});
  }
  return pairs;
}

RetrievalMetrics retrieval_metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t classes,
                                              std::span<const std::size_t> ks) {
  RetrievalMetrics r;
  r.matched = ranks.size();
  r.curve.assign(classes, 0.0);
  if (!ranks.empty() && classes > 0) {
    std::vector<std::size_t> histogram(classes + 1, 0);
    for (auto rank : ranks) {
      if (rank < 1 || rank > classes) throw ValidationError("retrieval: rank out of range");
      ++histogram[rank];
    }
    std::size_t cumulative = 0;
    for (std::size_t k = 1; k <= classes; ++k) {
      cumulative += histogram[k];
      r.curve[k - 1] = static_cast<double>(cumulative) / static_cast<double>(ranks.size());
    }
    r.auc = std::accumulate(r.curve.begin(), r.curve.end(), 0.0) / static_cast<double>(classes);
  }
  for (auto k : ks) {
    if (k == 0) throw ValidationError("retrieval: k must be >= 1");
    r.acc_at_k[k] = r.curve.empty() ? 0.0 : r.curve[std::min(k, classes) - 1];
  }
  return r;
}

RetrievalMetrics retrieval_metrics(std::span<const MatchedObject> matched, const TextEmbeddingTable& table,
                                   std::span<const std::size_t> ks) {
  std::vector<std::size_t> ranks;
  ranks.reserve(matched.size());
  for (const auto& m : matched) ranks.push_back(class_rank(m.feature, table, m.gt_class));
  return retrieval_metrics_from_ranks(ranks, table.classes(), ks);
}

}  // namespace openvox
