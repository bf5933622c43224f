#pragma once

// Open-vocabulary querying over a frozen map, and the evaluation protocol:
// dense label transfer, segmentation metrics, Hungarian instance matching,
// Acc@k and the normalized area under the Acc@k curve.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "openvox/instance_map.hpp"

namespace openvox {

struct TextEmbeddingTable {
  std::vector<std::string> names;
  int dim = 0;
  std::vector<float> embeddings;  // classes x dim, unit rows

  std::size_t classes() const { return names.size(); }
  std::span<const float> row(std::size_t c) const {
    return {embeddings.data() + c * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  void validate() const;
};

// classes.json + a DTEN f32 [C, D] payload next to it.
TextEmbeddingTable read_table(const std::filesystem::path& json_path);
void write_table(const TextEmbeddingTable& table, const std::filesystem::path& json_path);

struct GtInstance {
  std::uint64_t id = 0;
  int class_index = 0;
  VoxelSet voxels;
};

struct GroundTruth {
  double resolution = 0.05;
  std::vector<Eigen::Vector3f> points;
  std::vector<int> labels;  // one class index per point
  std::vector<GtInstance> instances;

  void validate(std::size_t classes) const;
};

// gt.json plus gt_points / gt_labels / gt_voxels tensors in one directory.
GroundTruth read_ground_truth(const std::filesystem::path& dir);
void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir);

struct RankedInstance {
  std::uint64_t id = 0;
  double cosine = 0.0;
};

// Descending cosine, ties by ascending id; at most k entries.
std::vector<RankedInstance> rank_instances(const InstanceMap& map, std::span<const float> query, std::size_t k);

// Indices of the k best-matching table rows, descending cosine, ties by index.
std::vector<int> classify_topk(std::span<const float> feature, const TextEmbeddingTable& table, std::size_t k);

// 1-based rank of class c in the same ordering classify_topk uses.
std::size_t class_rank(std::span<const float> feature, const TextEmbeddingTable& table, int c);

inline constexpr int kUnassigned = -1;

struct DenseTransfer {
  std::vector<int> labels;                 // predicted class, or kUnassigned
  std::vector<std::int64_t> instance_ids;  // nearest instance, or -1
  std::size_t unassigned = 0;
  double unassigned_fraction() const {
    return labels.empty() ? 0.0 : static_cast<double>(unassigned) / static_cast<double>(labels.size());
  }
};

// Each point takes the top-1 class of the instance owning the nearest voxel
// center (ties: lower instance id). Points farther than d_assign from every
// voxel center stay unassigned.
DenseTransfer dense_transfer(const InstanceMap& map, std::span<const Eigen::Vector3f> points,
                             const TextEmbeddingTable& table, double d_assign);

// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  // Unassigned predictions are skipped.
  static ConfusionMatrix from_labels(std::size_t classes, std::span<const int> gt, std::span<const int> pred);

  void add(int gt, int pred, std::uint64_t count = 1);
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::size_t classes() const { return classes_; }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct SegmentationMetrics {
  double macc = 0.0;
  double miou = 0.0;
  double fmiou = 0.0;
  std::vector<double> class_accuracy;  // NaN-free; 0 for classes absent from GT
  std::vector<double> class_iou;
  std::vector<std::uint64_t> class_support;
  std::size_t present_classes = 0;
};

// Means run over classes present in the ground truth; fmIoU weights by
// ground-truth frequency.
SegmentationMetrics segmentation_metrics(const ConfusionMatrix& confusion);

// Maximum-weight assignment on a dense rows x cols score matrix
// (Kuhn-Munkres with potentials, O(n^3)). Returns (row, col) pairs, one per
// row or column, whichever is fewer.
std::vector<std::pair<std::size_t, std::size_t>> solve_assignment(const std::vector<std::vector<double>>& score);

enum class MatchMode {
  AllPairs,   // keep every assigned pair
  StrictIou,  // drop assigned pairs with IoU <= 0.5
};

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

std::vector<std::vector<double>> iou_matrix(std::span<const VoxelSet> pred, std::span<const VoxelSet> gt);
// iou is indexed [pred][gt].
std::vector<MatchPair> hungarian_match(const std::vector<std::vector<double>>& iou, MatchMode mode);

struct RetrievalMetrics {
  std::map<std::size_t, double> acc_at_k;
  std::vector<double> curve;  // Acc@1 .. Acc@C
  double auc = 0.0;           // mean of curve
  std::size_t matched = 0;
};

RetrievalMetrics retrieval_metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t classes,
                                              std::span<const std::size_t> ks);

struct MatchedObject {
  std::vector<float> feature;
  int gt_class = 0;
};

RetrievalMetrics retrieval_metrics(std::span<const MatchedObject> matched, const TextEmbeddingTable& table,
                                   std::span<const std::size_t> ks);

}  // namespace openvox
