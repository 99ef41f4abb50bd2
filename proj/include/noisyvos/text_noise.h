// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_TEXT_NOISE_H_
#define NOISYVOS_TEXT_NOISE_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisyvos/dataset.h"
#include "noisyvos/rng.h"

namespace noisyvos {

enum class TextNoiseBranch { kFlipped, kSynonym, kSkipped };
const char* BranchName(TextNoiseBranch branch);

struct CategoryCorruption {
  std::string category;
  int class_id = 0;
  TextNoiseBranch branch = TextNoiseBranch::kSynonym;
  std::optional<int> flipped_class_id;
};

// Class flipping with probability `rate`, otherwise within-class synonym
// substitution. Draw order:
//   d1 = uniform01; if d1 < rate: d2 = next_index(K-1) over the other class
//   ids in ascending order, d3 = next_index(|M(flip)|);
//   else d2 = next_index(|M(class_id)|).
// The synonym branch may re-emit the original category.
CategoryCorruption CorruptCategory(const std::string& category, int class_id,
                                   double rate, const ClassMapping& mapping,
                                   Pcg32& rng);

struct TextNoiseProvenance {
  std::string clip_id;
  int object_id = 0;
  std::string original_category;
  int original_class_id = 0;
  std::string emitted_category;
  int emitted_class_id = 0;
  TextNoiseBranch branch = TextNoiseBranch::kSynonym;
  std::optional<int> flipped_class_id;
};

struct TextNoiseResult {
  Dataset dataset;
  std::vector<TextNoiseProvenance> provenance;  // manifest order
};

// One substream per prompt, labelled "<clip_id>/<object_id>". Only category
// and class_id fields change. With `active_only`, inactive prompts are copied
// through and logged with the skipped branch.
TextNoiseResult CorruptDatasetText(const Dataset& dataset, double rate,
                                   const ClassMapping& mapping, uint64_t seed,
                                   bool active_only = false);

std::string ProvenanceJsonLines(const std::vector<TextNoiseProvenance>& provenance);

using CategoryHistogram = std::map<std::string, double>;

// Category -> share of prompts. Throws ArgumentError on an empty dataset.
CategoryHistogram ComputeCategoryHistogram(const Dataset& dataset);

struct ShiftRow {
  std::string category;
  double clean = 0.0;
  double noisy = 0.0;
  double delta() const { return noisy - clean; }
};

inline constexpr const char* kOthersCategory = "Others";

// Rows for categories whose clean share exceeds `threshold` (largest first),
// then one "Others" row aggregating everything else on both sides.
std::vector<ShiftRow> ShiftReport(const CategoryHistogram& clean,
                                  const CategoryHistogram& noisy,
                                  double threshold = 0.01);

}  // namespace noisyvos

#endif  // NOISYVOS_TEXT_NOISE_H_
