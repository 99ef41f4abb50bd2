// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/mask_noise.h"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "noisyvos/errors.h"
#include "noisyvos/pnm.h"

namespace noisyvos {
namespace fs = std::filesystem;

DilationKernel::DilationKernel(int k) : k_(k) {
  if (k < 1 || k % 2 == 0) {
    throw ArgumentError("dilation kernel must be odd and >= 1, got " + std::to_string(k));
  }
}

namespace {

// 1-D max filter along `count` elements spaced `stride` apart.
void MaxFilterLine(const uint8_t* in, uint8_t* out, int count, std::size_t stride,
                   int radius, std::vector<int>& prefix) {
  prefix.assign(static_cast<std::size_t>(count) + 1, 0);
  for (int i = 0; i < count; ++i) prefix[i + 1] = prefix[i] + (in[i * stride] != 0);
  for (int i = 0; i < count; ++i) {
    const int lo = std::max(0, i - radius);
    const int hi = std::min(count - 1, i + radius);
    out[i * stride] = prefix[hi + 1] - prefix[lo] > 0 ? 1 : 0;
  }
}

}  // namespace

BinaryMask Dilate(const BinaryMask& mask, DilationKernel kernel) {
  const int r = kernel.radius();
  if (r == 0) return mask;
  BinaryMask horizontal(mask.width, mask.height);
  std::vector<int> prefix;
  for (int y = 0; y < mask.height; ++y) {
    MaxFilterLine(&mask.at(0, y), &horizontal.at(0, y), mask.width, 1, r, prefix);
  }
  BinaryMask out(mask.width, mask.height);
  for (int x = 0; x < mask.width; ++x) {
    MaxFilterLine(&horizontal.values[x], &out.values[x], mask.height,
                  static_cast<std::size_t>(mask.width), r, prefix);
  }
  return out;
}

LabelMask CombineFirstHit(const std::vector<std::pair<int, BinaryMask>>& dilated,
                          int width, int height) {
  std::set<int> ids;
  for (const auto& [id, mask] : dilated) {
    if (id < 1 || id > 65535) throw ArgumentError("combine_first_hit: object id out of range");
    if (!ids.insert(id).second) {
      throw ArgumentError("combine_first_hit: duplicate object id " + std::to_string(id));
    }
    if (!mask.SameShape(width, height)) {
      throw ArgumentError("combine_first_hit: mask dimensions do not match " +
                          std::to_string(width) + "x" + std::to_string(height));
    }
  }
  LabelMask out(width, height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& [id, mask] : dilated) {
      if (mask.values[i] != 0) {
        out.values[i] = static_cast<uint16_t>(id);
        break;
      }
    }
  }
  return out;
}

LabelMask CorruptMask(const LabelMask& annotation, const std::vector<int>& positive_ids,
                      DilationKernel kernel, bool keep_negatives) {
  if (positive_ids.empty()) throw ArgumentError("corrupt_mask: no positive object ids");
  std::vector<std::pair<int, BinaryMask>> dilated;
  dilated.reserve(positive_ids.size());
  for (int id : positive_ids) {
    dilated.emplace_back(id, Dilate(Binarize(annotation, id), kernel));
  }
  LabelMask out = CombineFirstHit(dilated, annotation.width, annotation.height);
  if (keep_negatives) {
    const std::set<int> positives(positive_ids.begin(), positive_ids.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const int original = annotation.values[i];
      if (out.values[i] == 0 && original != 0 && positives.count(original) == 0) {
        out.values[i] = annotation.values[i];
      }
    }
  }
  return out;
}

Dataset CorruptDatasetMasks(const Dataset& dataset, int k, const fs::path& destination,
                            bool keep_negatives) {
  if (!IsSupportedNoiseKernel(k)) {
    throw ArgumentError("corrupt-mask: kernel must be one of 0, 9, 15, 21");
  }
  Dataset noisy = CopyDataset(dataset, destination);
  if (k == 0) return noisy;
  const DilationKernel kernel(k);
  for (const auto& clip : noisy.clips) {
    std::vector<int> positives;
    for (const auto& object : clip.objects) {
      if (object.active) positives.push_back(object.object_id);
    }
    std::sort(positives.begin(), positives.end());
    for (const auto& frame : clip.frames) {
      const LabelMask clean = ReadMask(dataset.MaskPath(frame));
      LabelMask corrupted(clean.width, clean.height);
      if (!positives.empty()) {
        corrupted = CorruptMask(clean, positives, kernel, keep_negatives);
      } else if (keep_negatives) {
        corrupted = clean;
      }
      WriteMask(corrupted, noisy.MaskPath(frame));
    }
  }
  return noisy;
}

SeverityStats ComputeSeverityStats(
    const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs) {
  SeverityStats stats;
  if (pairs.empty()) return stats;
  double iou_sum = 0.0;
  uint64_t inter = 0, uni = 0;
  for (const auto& [noisy, clean] : pairs) {
    const Overlap o = ComputeOverlap(noisy, clean);
    iou_sum += o.Iou();
    inter += o.intersection;
    uni += o.union_;
    stats.per_object.push_back({"", 0, "", o});
  }
  stats.miou = iou_sum / static_cast<double>(pairs.size());
  stats.ciou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return stats;
}

SeverityStats ComputeSeverityStats(const Dataset& clean, const Dataset& noisy) {
  if (clean.clips.size() != noisy.clips.size()) {
    throw ValidationError("severity_stats: datasets have different clip counts");
  }
  std::vector<std::pair<BinaryMask, BinaryMask>> pairs;
  std::vector<SeverityEntry> keys;
  for (std::size_t c = 0; c < clean.clips.size(); ++c) {
    const Clip& a = clean.clips[c];
    const Clip& b = noisy.clips[c];
    if (a.clip_id != b.clip_id || a.frames.size() != b.frames.size() ||
        a.objects.size() != b.objects.size()) {
      throw ValidationError("severity_stats: clip '" + a.clip_id + "' is misaligned");
    }
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
      if (a.frames[f].frame_id != b.frames[f].frame_id) {
        throw ValidationError("severity_stats: clip '" + a.clip_id +
                              "' frame order differs");
      }
      const LabelMask clean_mask = ReadMask(clean.MaskPath(a.frames[f]));
      const LabelMask noisy_mask = ReadMask(noisy.MaskPath(b.frames[f]));
      if (!clean_mask.SameShape(noisy_mask)) {
        throw ValidationError("severity_stats: clip '" + a.clip_id + "' frame '" +
                              a.frames[f].frame_id + "' dimensions differ");
      }
      for (std::size_t o = 0; o < a.objects.size(); ++o) {
        if (a.objects[o].object_id != b.objects[o].object_id) {
          throw ValidationError("severity_stats: clip '" + a.clip_id +
                                "' object order differs");
        }
        if (!a.objects[o].active) continue;
        const int id = a.objects[o].object_id;
        pairs.emplace_back(Binarize(noisy_mask, id), Binarize(clean_mask, id));
        keys.push_back({a.clip_id, id, a.frames[f].frame_id, {}});
      }
    }
  }
  SeverityStats stats = ComputeSeverityStats(pairs);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i].overlap = stats.per_object[i].overlap;
  }
  stats.per_object = std::move(keys);
  return stats;
}

std::string SeverityJson(int kernel, const SeverityStats& stats) {
  nlohmann::ordered_json doc;
  doc["kernel"] = kernel;
  doc["miou"] = stats.miou;
  doc["ciou"] = stats.ciou;
  auto per_object = nlohmann::ordered_json::array();
  for (const auto& e : stats.per_object) {
    nlohmann::ordered_json row;
    row["clip_id"] = e.clip_id;
    row["object_id"] = e.object_id;
    row["frame_id"] = e.frame_id;
    row["intersection"] = e.overlap.intersection;
    row["union"] = e.overlap.union_;
    row["iou"] = e.overlap.Iou();
    per_object.push_back(std::move(row));
  }
  doc["per_object"] = std::move(per_object);
  return doc.dump(2) + "\n";
}

}  // namespace noisyvos
