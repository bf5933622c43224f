#pragma once

// End-to-end glue: frames in, map out; map plus ground truth in, metrics out.

#include <cstdint>
#include <vector>

#include "openvox/ingest.hpp"
#include "openvox/instance_map.hpp"
#include "openvox/retrieval.hpp"

namespace openvox {

struct PipelineConfig {
  IngestConfig ingest;
  AssociationConfig association;

  void validate() const;
};

struct FrameLog {
  FrameReport report;
  std::size_t segments = 0;
  std::vector<SegmentDrop> dropped;
  double milliseconds = 0.0;
  MapStats stats;
};

class MappingSession {
 public:
  explicit MappingSession(PipelineConfig config);

  FrameLog process(const FrameRecord& frame);
  FinalReport finish();

  const InstanceMap& map() const { return map_; }
  InstanceMap& map() { return map_; }
  const PipelineConfig& config() const { return config_; }
  std::size_t frames() const { return frames_; }

 private:
  PipelineConfig config_;
  InstanceMap map_;
  std::size_t frames_ = 0;
};

inline constexpr double kAssignVoxels = 5.0;

struct EvaluationConfig {
  double d_assign = 0.0;  // meters; <= 0 selects kAssignVoxels x map resolution
  MatchMode match_mode = MatchMode::AllPairs;
  std::vector<std::size_t> ks{1, 5, 10};
};

struct EvaluationReport {
  SegmentationMetrics segmentation;
  double unassigned_fraction = 0.0;
  std::vector<MatchPair> matches;
  RetrievalMetrics retrieval;
  std::size_t predicted_instances = 0;
  std::size_t gt_instances = 0;
};

EvaluationReport evaluate_map(const InstanceMap& map, const GroundTruth& gt, const TextEmbeddingTable& table,
                              const EvaluationConfig& config);

}  // namespace openvox
