// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/dataset.h"

#include <set>
#include <sstream>

#include "json.hpp"
#include "noisyvos/pnm.h"

namespace noisyvos {
namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const json& Field(const json& object, const char* key, json::value_t type,
                  const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  const bool ok = type == json::value_t::number_integer
                      ? it->is_number_integer()
                      : it->type() == type;
  if (!ok) throw ValidationError(where + ": field '" + key + "' has wrong type");
  return *it;
}

json ParseJson(const fs::path& path) {
  try {
    return json::parse(ReadFileBytes(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

void ClassMapping::Validate() const {
  for (const auto& [id, names] : classes) {
    if (names.empty()) {
      throw ValidationError("class mapping: class " + std::to_string(id) +
                            " has no categories");
    }
    std::set<std::string> seen;
    for (const auto& name : names) {
      if (name.empty() || !seen.insert(name).second) {
        throw ValidationError("class mapping: class " + std::to_string(id) +
                              " has empty or duplicate category '" + name + "'");
      }
    }
  }
}

const std::vector<std::string>& ClassMapping::Categories(int class_id) const {
  auto it = classes.find(class_id);
  if (it == classes.end()) {
    throw ArgumentError("unknown class id " + std::to_string(class_id));
  }
  return it->second;
}

std::optional<int> ClassMapping::ClassOf(const std::string& category) const {
  for (const auto& [id, names] : classes) {
    for (const auto& name : names) {
      if (name == category) return id;
    }
  }
  return std::nullopt;
}

std::vector<std::string> ClassMapping::AllCategories() const {
  std::vector<std::string> all;
  for (const auto& [id, names] : classes) all.insert(all.end(), names.begin(), names.end());
  return all;
}

ClassMapping LoadClassMapping(const fs::path& path) {
  const json doc = ParseJson(path);
  const std::string where = path.string();
  if (!doc.is_object()) throw ValidationError(where + ": expected an object");
  const json& classes = Field(doc, "classes", json::value_t::object, where);
  ClassMapping mapping;
  for (const auto& [key, names] : classes.items()) {
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ValidationError(where + ": class key '" + key + "' is not an integer");
    }
    if (id < 1) throw ValidationError(where + ": class ids start at 1");
    if (!names.is_array()) throw ValidationError(where + ": class '" + key + "' is not a list");
    auto& list = mapping.classes[id];
    for (const auto& name : names) {
      if (!name.is_string()) throw ValidationError(where + ": non-string category");
      list.push_back(name.get<std::string>());
    }
  }
  mapping.Validate();
  return mapping;
}

std::string ClassMappingJson(const ClassMapping& mapping) {
  ordered_json classes = ordered_json::object();
  for (const auto& [id, names] : mapping.classes) classes[std::to_string(id)] = names;
  ordered_json doc;
  doc["classes"] = classes;
  return doc.dump(2) + "\n";
}

void SaveClassMapping(const ClassMapping& mapping, const fs::path& path) {
  WriteFileBytes(path, ClassMappingJson(mapping));
}

std::string PromptRecord::RenderPrompt() const {
  return category + " used in the action of " + narration;
}

std::string PromptRecord::Verb() const {
  std::istringstream in(narration);
  std::string verb;
  in >> verb;
  return verb;
}

std::size_t Dataset::PromptCount() const {
  std::size_t n = 0;
  for (const auto& clip : clips) n += clip.objects.size();
  return n;
}

void ValidateDataset(const Dataset& dataset, const ClassMapping* mapping) {
  std::set<std::string> clip_ids;
  for (const auto& clip : dataset.clips) {
    const std::string where = "clip '" + clip.clip_id + "'";
    if (clip.clip_id.empty()) throw ValidationError("clip with empty clip_id");
    if (!clip_ids.insert(clip.clip_id).second) {
      throw ValidationError("duplicate clip_id '" + clip.clip_id + "'");
    }
    if (clip.frames.empty()) throw ValidationError(where + ": no frames");
    std::set<std::string> frame_ids;
    for (const auto& frame : clip.frames) {
      if (frame.frame_id.empty() || !frame_ids.insert(frame.frame_id).second) {
        throw ValidationError(where + ": empty or duplicate frame_id '" +
                              frame.frame_id + "'");
      }
    }
    std::set<int> object_ids;
    for (const auto& object : clip.objects) {
      if (object.object_id < 1 || object.object_id > 65535) {
        throw ValidationError(where + ": object_id " + std::to_string(object.object_id) +
                              " outside [1, 65535]");
      }
      if (!object_ids.insert(object.object_id).second) {
        throw ValidationError(where + ": duplicate object_id " +
                              std::to_string(object.object_id));
      }
      if (object.clip_id != clip.clip_id) {
        throw ValidationError(where + ": prompt record carries clip_id '" +
                              object.clip_id + "'");
      }
      if (object.category.empty()) {
        throw ValidationError(where + ": object " + std::to_string(object.object_id) +
                              " has an empty category");
      }
      if (mapping != nullptr && !mapping->Contains(object.class_id)) {
        throw ValidationError(where + ": object " + std::to_string(object.object_id) +
                              " has unknown class_id " + std::to_string(object.class_id));
      }
    }
  }
}

Dataset LoadManifest(const fs::path& path, const ClassMapping* mapping) {
  const json doc = ParseJson(path);
  const std::string where = path.string();
  if (!doc.is_object()) throw ValidationError(where + ": expected an object");
  if (Field(doc, "version", json::value_t::number_integer, where).get<int>() != 1) {
    throw ValidationError(where + ": unsupported version");
  }
  Dataset dataset;
  dataset.root = path.parent_path();
  for (const auto& c : Field(doc, "clips", json::value_t::array, where)) {
    if (!c.is_object()) throw ValidationError(where + ": clip is not an object");
    Clip clip;
    clip.clip_id = Field(c, "clip_id", json::value_t::string, where).get<std::string>();
    const std::string cwhere = where + ": clip '" + clip.clip_id + "'";
    for (const auto& f : Field(c, "frames", json::value_t::array, cwhere)) {
      FrameRef frame;
      frame.frame_id = Field(f, "frame_id", json::value_t::string, cwhere).get<std::string>();
      frame.image = Field(f, "image", json::value_t::string, cwhere).get<std::string>();
      frame.mask = Field(f, "mask", json::value_t::string, cwhere).get<std::string>();
      clip.frames.push_back(std::move(frame));
    }
    for (const auto& o : Field(c, "objects", json::value_t::array, cwhere)) {
      PromptRecord record;
      record.clip_id = clip.clip_id;
      record.object_id = Field(o, "object_id", json::value_t::number_integer, cwhere).get<int>();
      record.category = Field(o, "category", json::value_t::string, cwhere).get<std::string>();
      record.class_id = Field(o, "class_id", json::value_t::number_integer, cwhere).get<int>();
      record.narration = Field(o, "narration", json::value_t::string, cwhere).get<std::string>();
      record.active = Field(o, "active", json::value_t::boolean, cwhere).get<bool>();
      clip.objects.push_back(std::move(record));
    }
    dataset.clips.push_back(std::move(clip));
  }
  ValidateDataset(dataset, mapping);
  for (const auto& clip : dataset.clips) {
    for (const auto& frame : clip.frames) {
      for (const fs::path& p : {dataset.ImagePath(frame), dataset.MaskPath(frame)}) {
        if (!fs::is_regular_file(p)) {
          throw ValidationError(where + ": clip '" + clip.clip_id + "' frame '" +
                                frame.frame_id + "' references missing file " + p.string());
        }
      }
    }
  }
  return dataset;
}

std::string ManifestJson(const Dataset& dataset) {
  ordered_json clips = ordered_json::array();
  for (const auto& clip : dataset.clips) {
    ordered_json frames = ordered_json::array();
    for (const auto& frame : clip.frames) {
      ordered_json f;
      f["frame_id"] = frame.frame_id;
      f["image"] = frame.image;
      f["mask"] = frame.mask;
      frames.push_back(std::move(f));
    }
    ordered_json objects = ordered_json::array();
    for (const auto& object : clip.objects) {
      ordered_json o;
      o["object_id"] = object.object_id;
      o["category"] = object.category;
      o["class_id"] = object.class_id;
      o["narration"] = object.narration;
      o["active"] = object.active;
      objects.push_back(std::move(o));
    }
    ordered_json c;
    c["clip_id"] = clip.clip_id;
    c["frames"] = std::move(frames);
    c["objects"] = std::move(objects);
    clips.push_back(std::move(c));
  }
  ordered_json doc;
  doc["version"] = 1;
  doc["clips"] = std::move(clips);
  return doc.dump(2) + "\n";
}

void SaveManifest(const Dataset& dataset, const fs::path& path) {
  WriteFileBytes(path, ManifestJson(dataset));
}

Dataset CopyDataset(const Dataset& source, const fs::path& destination) {
  Dataset copy = source;
  copy.root = destination;
  fs::create_directories(destination);
  for (const auto& clip : source.clips) {
    for (const auto& frame : clip.frames) {
      for (const auto& rel : {frame.image, frame.mask}) {
        const fs::path target = destination / rel;
        fs::create_directories(target.parent_path());
        fs::copy_file(source.root / rel, target, fs::copy_options::overwrite_existing);
      }
    }
  }
  const fs::path classes = source.root / kClassesFile;
  if (fs::is_regular_file(classes)) {
    fs::copy_file(classes, destination / kClassesFile, fs::copy_options::overwrite_existing);
  }
  SaveManifest(copy, destination / kManifestFile);
  return copy;
}

BinaryMask Binarize(const LabelMask& mask, int object_id) {
  if (object_id < 1) throw ArgumentError("binarize: object_id must be >= 1");
  BinaryMask out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.values[i] = mask.values[i] == object_id ? 1 : 0;
  }
  return out;
}

}  // namespace noisyvos
