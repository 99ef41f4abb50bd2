// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_METRICS_H_
#define NOISYVOS_METRICS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "noisyvos/dataset.h"
#include "noisyvos/grid.h"

namespace noisyvos {

struct Overlap {
  uint64_t intersection = 0;
  uint64_t union_ = 0;
  uint64_t predicted = 0;
  // 0/0 := 1: an empty prediction on an empty region is perfect agreement.
  double Iou() const {
    return union_ == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(union_);
  }
};

Overlap ComputeOverlap(const BinaryMask& prediction, const BinaryMask& truth);
double Iou(const BinaryMask& prediction, const BinaryMask& truth);

// One (object, frame) evaluation unit. `gt_region` is the object's annotated
// region for both active and inactive objects.
struct EvalSample {
  std::string clip_id;
  int object_id = 0;
  std::string frame_id;
  BinaryMask prediction;
  BinaryMask gt_region;
  bool active = false;
};

struct PartitionedValue {
  std::optional<double> positive;  // nullopt when the partition is empty
  std::optional<double> negative;
};

PartitionedValue PartitionedMiou(const std::vector<EvalSample>& samples);
PartitionedValue PartitionedCiou(const std::vector<EvalSample>& samples);
// Active: IoU; inactive: 1 iff the prediction is empty. Throws on empty input.
double GeneralizedIou(const std::vector<EvalSample>& samples);

struct ObjectDecision {
  bool predicted_active = false;
  bool active = false;
};
double Accuracy(const std::vector<ObjectDecision>& decisions);

// Mean probability strictly inside `region` > 0.5. Throws on an empty region.
bool DecideActive(const ProbabilityMap& probabilities, const BinaryMask& region);
// Pools the region pixels of several frames before averaging.
bool DecideActive(const std::vector<ProbabilityMap>& probabilities,
                  const std::vector<BinaryMask>& regions);

BinaryMask Threshold(const ProbabilityMap& probabilities, double threshold = 0.5);

struct SampleScore {
  std::string clip_id;
  int object_id = 0;
  std::string frame_id;
  bool active = false;
  Overlap overlap;
};

struct MetricsReport {
  std::optional<double> p_miou;
  std::optional<double> n_miou;
  std::optional<double> p_ciou;
  std::optional<double> n_ciou;
  double giou = 0.0;
  double acc = 0.0;
  std::size_t positive_samples = 0;
  std::size_t negative_samples = 0;
  std::vector<SampleScore> samples;
};

// Sample-level metrics from `samples`, Acc from `decisions`.
MetricsReport BuildReport(const std::vector<EvalSample>& samples,
                          const std::vector<ObjectDecision>& decisions);

// Prediction file for one (clip, object, frame) under a predictions root.
std::filesystem::path PredictionPath(const std::filesystem::path& root,
                                     const std::string& clip_id, int object_id,
                                     const std::string& frame_id);

// Loads every prediction for `dataset` (threshold 0.5) and scores it.
MetricsReport Evaluate(const Dataset& dataset, const std::filesystem::path& predictions);

std::string ReportJson(const MetricsReport& report);
MetricsReport ParseReportJson(const std::string& text);

}  // namespace noisyvos

#endif  // NOISYVOS_METRICS_H_
