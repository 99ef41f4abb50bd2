// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/text_noise.h"

#include <algorithm>

#include "json.hpp"
#include "noisyvos/errors.h"

namespace noisyvos {

const char* BranchName(TextNoiseBranch branch) {
  switch (branch) {
    case TextNoiseBranch::kFlipped:
      return "flipped";
    case TextNoiseBranch::kSynonym:
      return "synonym";
    case TextNoiseBranch::kSkipped:
      return "skipped";
  }
  return "unknown";
}

CategoryCorruption CorruptCategory(const std::string& category, int class_id,
                                   double rate, const ClassMapping& mapping,
                                   Pcg32& rng) {
  if (!mapping.Contains(class_id)) {
    throw ArgumentError("corrupt_category: unknown class_id " + std::to_string(class_id));
  }
  const auto& own = mapping.Categories(class_id);
  if (std::find(own.begin(), own.end(), category) == own.end()) {
    throw ArgumentError("corrupt_category: '" + category + "' is not listed under class " +
                        std::to_string(class_id));
  }

  CategoryCorruption out;
  if (rng.NextUniform01() < rate) {
    std::vector<int> others;
    for (const auto& [id, names] : mapping.classes) {
      if (id != class_id) others.push_back(id);
    }
    if (others.empty()) {
      throw ArgumentError("corrupt_category: class flipping needs at least two classes");
    }
    const int flip = others[rng.NextIndex(static_cast<uint32_t>(others.size()))];
    const auto& names = mapping.Categories(flip);
    out.category = names[rng.NextIndex(static_cast<uint32_t>(names.size()))];
    out.class_id = flip;
    out.branch = TextNoiseBranch::kFlipped;
    out.flipped_class_id = flip;
  } else {
    out.category = own[rng.NextIndex(static_cast<uint32_t>(own.size()))];
    out.class_id = class_id;
    out.branch = TextNoiseBranch::kSynonym;
  }
  return out;
}

TextNoiseResult CorruptDatasetText(const Dataset& dataset, double rate,
                                   const ClassMapping& mapping, uint64_t seed,
                                   bool active_only) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ArgumentError("corrupt-text: rate must lie in [0, 1]");
  }
  TextNoiseResult result;
  result.dataset = dataset;
  result.provenance.reserve(dataset.PromptCount());
  for (auto& clip : result.dataset.clips) {
    for (auto& record : clip.objects) {
      TextNoiseProvenance entry;
      entry.clip_id = clip.clip_id;
      entry.object_id = record.object_id;
      entry.original_category = record.category;
      entry.original_class_id = record.class_id;
      if (active_only && !record.active) {
        entry.branch = TextNoiseBranch::kSkipped;
      } else {
        Pcg32 rng = RngSubstream(seed, clip.clip_id + "/" + std::to_string(record.object_id));
        try {
          const CategoryCorruption c =
              CorruptCategory(record.category, record.class_id, rate, mapping, rng);
          record.category = c.category;
          record.class_id = c.class_id;
          entry.branch = c.branch;
          entry.flipped_class_id = c.flipped_class_id;
        } catch (const ArgumentError& e) {
          throw ArgumentError("clip '" + clip.clip_id + "' object " +
                              std::to_string(record.object_id) + ": " + e.what());
        }
      }
      entry.emitted_category = record.category;
      entry.emitted_class_id = record.class_id;
      result.provenance.push_back(std::move(entry));
    }
  }
  return result;
}

std::string ProvenanceJsonLines(const std::vector<TextNoiseProvenance>& provenance) {
  std::string out;
  for (const auto& p : provenance) {
    nlohmann::ordered_json line;
    line["clip_id"] = p.clip_id;
    line["object_id"] = p.object_id;
    line["original"] = p.original_category;
    line["original_class_id"] = p.original_class_id;
    line["emitted"] = p.emitted_category;
    line["emitted_class_id"] = p.emitted_class_id;
    line["branch"] = BranchName(p.branch);
    line["flipped_class_id"] =
        p.flipped_class_id ? nlohmann::ordered_json(*p.flipped_class_id) : nullptr;
    out += line.dump() + "\n";
  }
  return out;
}

CategoryHistogram ComputeCategoryHistogram(const Dataset& dataset) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& clip : dataset.clips) {
    for (const auto& record : clip.objects) {
      ++counts[record.category];
      ++total;
    }
  }
  if (total == 0) throw ArgumentError("category_histogram: dataset has no prompts");
  CategoryHistogram histogram;
  for (const auto& [category, n] : counts) {
    histogram[category] = static_cast<double>(n) / static_cast<double>(total);
  }
  return histogram;
}

std::vector<ShiftRow> ShiftReport(const CategoryHistogram& clean,
                                  const CategoryHistogram& noisy, double threshold) {
  std::vector<ShiftRow> rows;
  for (const auto& [category, share] : clean) {
    if (share > threshold) {
      auto it = noisy.find(category);
      rows.push_back({category, share, it == noisy.end() ? 0.0 : it->second});
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ShiftRow& a, const ShiftRow& b) { return a.clean > b.clean; });

  auto is_major = [&](const std::string& category) {
    return std::any_of(rows.begin(), rows.end(),
                       [&](const ShiftRow& r) { return r.category == category; });
  };
  ShiftRow others{kOthersCategory, 0.0, 0.0};
  for (const auto& [category, share] : clean) {
    if (!is_major(category)) others.clean += share;
  }
  for (const auto& [category, share] : noisy) {
    if (!is_major(category)) others.noisy += share;
  }
  rows.push_back(others);
  return rows;
}

}  // namespace noisyvos
