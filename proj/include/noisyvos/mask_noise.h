// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_MASK_NOISE_H_
#define NOISYVOS_MASK_NOISE_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "noisyvos/dataset.h"
#include "noisyvos/grid.h"
#include "noisyvos/metrics.h"

namespace noisyvos {

// Side length of a square structuring element; odd and >= 1.
class DilationKernel {
 public:
  explicit DilationKernel(int k);
  int size() const { return k_; }
  int radius() const { return (k_ - 1) / 2; }

 private:
  int k_;
};

// out[x,y] = max of in over the k x k window centred on (x,y); pixels
// outside the grid count as 0.
BinaryMask Dilate(const BinaryMask& mask, DilationKernel kernel);

// Each pixel takes the id of the first mask in `dilated` covering it.
LabelMask CombineFirstHit(const std::vector<std::pair<int, BinaryMask>>& dilated,
                          int width, int height);

// Separate, dilate, and combine the `positive_ids` objects of `annotation`
// in the given order. With `keep_negatives`, pixels still unlabelled take
// their original non-positive object id.
LabelMask CorruptMask(const LabelMask& annotation, const std::vector<int>& positive_ids,
                      DilationKernel kernel, bool keep_negatives = false);

inline bool IsSupportedNoiseKernel(int k) { return k == 0 || k == 9 || k == 15 || k == 21; }

// Writes a copy of `dataset` under `destination` with every frame mask
// corrupted over the clip's active objects in ascending id order.
// k == 0 copies masks unchanged.
Dataset CorruptDatasetMasks(const Dataset& dataset, int k,
                            const std::filesystem::path& destination,
                            bool keep_negatives = false);

struct SeverityEntry {
  std::string clip_id;
  int object_id = 0;
  std::string frame_id;
  Overlap overlap;
};

struct SeverityStats {
  double miou = 1.0;
  double ciou = 1.0;
  std::vector<SeverityEntry> per_object;
};

// IoU between noisy and clean masks of every active (clip, object, frame).
SeverityStats ComputeSeverityStats(const Dataset& clean, const Dataset& noisy);
// Same from in-memory mask pairs.
SeverityStats ComputeSeverityStats(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs);

std::string SeverityJson(int kernel, const SeverityStats& stats);

}  // namespace noisyvos

#endif  // NOISYVOS_MASK_NOISE_H_
