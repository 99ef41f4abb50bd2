// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_DATASET_H_
#define NOISYVOS_DATASET_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisyvos/grid.h"

namespace noisyvos {

// class id -> ordered category names. Class ids are the keys, ascending.
struct ClassMapping {
  std::map<int, std::vector<std::string>> classes;

  // Throws ValidationError on empty lists or duplicate names within a list.
  void Validate() const;
  bool Contains(int class_id) const { return classes.count(class_id) != 0; }
  const std::vector<std::string>& Categories(int class_id) const;
  // First class (ascending id) listing `category`.
  std::optional<int> ClassOf(const std::string& category) const;
  // Every category name, by ascending class id then list order.
  std::vector<std::string> AllCategories() const;

  friend bool operator==(const ClassMapping&, const ClassMapping&) = default;
};

ClassMapping LoadClassMapping(const std::filesystem::path& path);
void SaveClassMapping(const ClassMapping& mapping, const std::filesystem::path& path);
std::string ClassMappingJson(const ClassMapping& mapping);

// One (clip, object) supervision unit.
struct PromptRecord {
  std::string clip_id;
  int object_id = 0;
  std::string category;
  int class_id = 0;
  std::string narration;
  bool active = false;

  // "{category} used in the action of {narration}"
  std::string RenderPrompt() const;
  // First whitespace-delimited token of the narration.
  std::string Verb() const;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

struct FrameRef {
  std::string frame_id;
  std::string image;  // relative to the dataset root
  std::string mask;   // relative to the dataset root

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

struct Clip {
  std::string clip_id;
  std::vector<FrameRef> frames;
  std::vector<PromptRecord> objects;

  friend bool operator==(const Clip&, const Clip&) = default;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<Clip> clips;

  std::filesystem::path ImagePath(const FrameRef& frame) const { return root / frame.image; }
  std::filesystem::path MaskPath(const FrameRef& frame) const { return root / frame.mask; }
  std::size_t PromptCount() const;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kClassesFile = "classes.json";

// Parses and fully validates a manifest. Relative paths resolve against the
// manifest's directory. When `mapping` is given, every class id must be a key.
Dataset LoadManifest(const std::filesystem::path& path,
                     const ClassMapping* mapping = nullptr);
// Checks every invariant of an in-memory dataset (no file checks).
void ValidateDataset(const Dataset& dataset, const ClassMapping* mapping = nullptr);
std::string ManifestJson(const Dataset& dataset);
void SaveManifest(const Dataset& dataset, const std::filesystem::path& path);

// Copies `source` (manifest, frames, masks, classes file when present) under
// `destination` and returns the dataset rooted there.
Dataset CopyDataset(const Dataset& source, const std::filesystem::path& destination);

BinaryMask Binarize(const LabelMask& mask, int object_id);

}  // namespace noisyvos

#endif  // NOISYVOS_DATASET_H_
