#include "openvox/pipeline.hpp"

#include <chrono>

namespace openvox {

void PipelineConfig::validate() const {
  ingest.validate();
  association.validate();
}

MappingSession::MappingSession(PipelineConfig config)
    : config_(std::move(config)), map_(config_.ingest.resolution, config_.association) {
  config_.validate();
}

FrameLog MappingSession::process(const FrameRecord& frame) {
  const auto start = std::chrono::steady_clock::now();
  FrameLog log;
  log.segments = frame.masks.size();
  IngestResult ingest = build_detections(frame, config_.ingest);
  log.report = map_.associate_frame(ingest.detections, frame.frame_id);
  log.dropped = std::move(ingest.dropped);
  log.milliseconds = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  log.stats = map_.stats();
  ++frames_;
  return log;
}

FinalReport MappingSession::finish() { return map_.finalize(); }

EvaluationReport evaluate_map(const InstanceMap& map, const GroundTruth& gt, const TextEmbeddingTable& table,
                              const EvaluationConfig& config) {
  table.validate();
  gt.validate(table.classes());
  const double d_assign = config.d_assign > 0.0 ? config.d_assign : kAssignVoxels * map.resolution();
  EvaluationReport report;
  report.predicted_instances = map.instances().size();
  report.gt_instances = gt.instances.size();

  const DenseTransfer transfer = dense_transfer(map, gt.points, table, d_assign);
  report.unassigned_fraction = transfer.unassigned_fraction();
  report.segmentation =
      segmentation_metrics(ConfusionMatrix::from_labels(table.classes(), gt.labels, transfer.labels));

  std::vector<VoxelSet> pred, truth;
  std::vector<const Instance*> order;
  for (const auto& [id, inst] : map.instances()) {
    pred.push_back(inst.voxels);
    order.push_back(&inst);
  }
  for (const auto& g : gt.instances) truth.push_back(g.voxels);
  report.matches = hungarian_match(iou_matrix(pred, truth), config.match_mode);

  std::vector<MatchedObject> matched;
  for (const auto& m : report.matches) {
    matched.push_back({order[m.pred]->semantic.vector, gt.instances[m.gt].class_index});
  }
  report.retrieval = retrieval_metrics(matched, table, config.ks);
  return report;
}

}  // namespace openvox
