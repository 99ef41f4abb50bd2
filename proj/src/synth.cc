// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/synth.h"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "noisyvos/errors.h"
#include "noisyvos/pnm.h"
#include "noisyvos/rng.h"

namespace noisyvos {
namespace fs = std::filesystem;

namespace {

// Corners of the RGB cube, pulled in from the extremes.
constexpr std::array<std::array<uint8_t, 3>, 8> kPalette = {{
    {220, 40, 40},
    {40, 200, 60},
    {40, 80, 230},
    {230, 210, 40},
    {200, 50, 200},
    {40, 210, 210},
    {240, 140, 30},
    {120, 60, 20},
}};

struct Box {
  int x = 0, y = 0, w = 0, h = 0;
  bool Overlaps(const Box& o, int gap) const {
    return x < o.x + o.w + gap && o.x < x + w + gap && y < o.y + o.h + gap && o.y < y + h + gap;
  }
};

struct SynthObject {
  int object_id = 0;
  int class_id = 0;
  std::string category;
  bool active = false;
  bool ellipse = false;
  std::array<int, 3> color{};
  std::vector<Box> boxes;  // one per frame
};

bool Inside(const SynthObject& o, const Box& b, int x, int y) {
  if (x < b.x || x >= b.x + b.w || y < b.y || y >= b.y + b.h) return false;
  if (!o.ellipse) return true;
  const double rx = b.w / 2.0, ry = b.h / 2.0;
  const double dx = (x + 0.5 - b.x - rx) / rx;
  const double dy = (y + 0.5 - b.y - ry) / ry;
  return dx * dx + dy * dy <= 1.0;
}

uint8_t ClampByte(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

int Range(Pcg32& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.NextIndex(static_cast<uint32_t>(hi - lo + 1)));
}

std::string Padded(const char* prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

}  // namespace

SynthConfig SynthConfig::Default() {
  SynthConfig c;
  c.classes.classes = {
      {1, {"container", "food container"}}, {2, {"fridge", "refrigerator"}}, {3, {"knife", "blade"}},
      {4, {"pepper", "capsicum"}},  {5, {"plate", "dish"}},          {6, {"cup", "mug"}},
  };
  for (int id = 1; id <= 6; ++id) c.class_colors[id] = kPalette[id - 1];
  c.verbs = {
      {"open", {1, 2, 6}},
      {"cut", {3, 4, 5}},
      {"wash", {2, 5, 6}},
      {"take", {1, 3, 4}},
  };
  return c;
}

void SynthConfig::Validate() const {
  if (n_clips < 1 || frames_per_clip < 1 || width < 1 || height < 1) {
    throw ArgumentError("synth: clip, frame and image sizes must be positive");
  }
  if (min_objects < 1 || max_objects < min_objects) {
    throw ArgumentError("synth: object count range is invalid");
  }
  if (max_objects > 65535) throw ArgumentError("synth: more than 65535 objects per clip");
  if (min_size < 1 || max_size < min_size || max_size > std::min(width, height)) {
    throw ArgumentError("synth: object size range must fit the image");
  }
  if (max_motion < 0) throw ArgumentError("synth: max_motion must be non-negative");
  if (!(active_fraction >= 0.0 && active_fraction <= 1.0)) {
    throw ArgumentError("synth: active_fraction must lie in [0, 1]");
  }
  if (classes.classes.empty()) throw ArgumentError("synth: empty class vocabulary");
  classes.Validate();
  for (const auto& [id, names] : classes.classes) {
    if (!class_colors.count(id)) {
      throw ArgumentError("synth: class " + std::to_string(id) + " has no colour");
    }
  }
  if (verbs.empty()) throw ArgumentError("synth: empty verb vocabulary");
  for (const auto& verb : verbs) {
    if (verb.name.empty() || verb.name.find(' ') != std::string::npos) {
      throw ArgumentError("synth: verbs must be single non-empty words");
    }
    for (int id : verb.compatible_classes) {
      if (!classes.Contains(id)) {
        throw ArgumentError("synth: verb '" + verb.name + "' names unknown class " +
                            std::to_string(id));
      }
    }
  }
}

SynthConfig SynthConfigFromJson(const std::string& text, SynthConfig base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  }
  try {
    auto read = [&doc](const char* key, auto& field) {
      if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("n_clips", base.n_clips);
    read("frames_per_clip", base.frames_per_clip);
    read("width", base.width);
    read("height", base.height);
    read("min_objects", base.min_objects);
    read("max_objects", base.max_objects);
    read("min_size", base.min_size);
    read("max_size", base.max_size);
    read("max_motion", base.max_motion);
    read("active_fraction", base.active_fraction);
    read("seed", base.seed);
    read("split", base.split);
    if (doc.contains("classes")) {
      base.classes.classes.clear();
      base.class_colors.clear();
      for (const auto& [key, names] : doc.at("classes").items()) {
        const int id = std::stoi(key);
        base.classes.classes[id] = names.get<std::vector<std::string>>();
        if (id >= 1 && id <= static_cast<int>(kPalette.size())) {
          base.class_colors[id] = kPalette[id - 1];
        }
      }
    }
    if (doc.contains("class_colors")) {
      for (const auto& [key, rgb] : doc.at("class_colors").items()) {
        base.class_colors[std::stoi(key)] = rgb.get<std::array<uint8_t, 3>>();
      }
    }
    if (doc.contains("verbs")) {
      base.verbs.clear();
      for (const auto& v : doc.at("verbs")) {
        base.verbs.push_back({v.at("name").get<std::string>(),
                              v.at("classes").get<std::set<int>>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("synth config: class keys must be integers");
  }
  base.Validate();
  return base;
}

std::string SynthConfigToJson(const SynthConfig& c) {
  nlohmann::ordered_json doc;
  doc["n_clips"] = c.n_clips;
  doc["frames_per_clip"] = c.frames_per_clip;
  doc["width"] = c.width;
  doc["height"] = c.height;
  doc["min_objects"] = c.min_objects;
  doc["max_objects"] = c.max_objects;
  doc["min_size"] = c.min_size;
  doc["max_size"] = c.max_size;
  doc["max_motion"] = c.max_motion;
  doc["active_fraction"] = c.active_fraction;
  doc["seed"] = c.seed;
  doc["split"] = c.split;
  nlohmann::ordered_json classes, colors;
  for (const auto& [id, names] : c.classes.classes) classes[std::to_string(id)] = names;
  for (const auto& [id, rgb] : c.class_colors) colors[std::to_string(id)] = rgb;
  doc["classes"] = classes;
  doc["class_colors"] = colors;
  auto verbs = nlohmann::ordered_json::array();
  for (const auto& v : c.verbs) {
    nlohmann::ordered_json entry;
    entry["name"] = v.name;
    entry["classes"] = v.compatible_classes;
    verbs.push_back(entry);
  }
  doc["verbs"] = verbs;
  return doc.dump(2) + "\n";
}

Dataset SynthGenerate(const SynthConfig& config, const fs::path& out) {
  config.Validate();
  Dataset dataset;
  dataset.root = out;
  fs::create_directories(out);
  const int W = config.width, H = config.height;

  for (int c = 0; c < config.n_clips; ++c) {
    Pcg32 rng = RngSubstream(config.seed, config.split + "/clip/" + std::to_string(c));
    Clip clip;
    clip.clip_id = config.split + "_" + Padded("", c, 4);
    const VerbSpec& verb =
        config.verbs[rng.NextIndex(static_cast<uint32_t>(config.verbs.size()))];
    const int n_objects = Range(rng, config.min_objects, config.max_objects);

    std::vector<SynthObject> objects;
    std::set<int> used;
    for (int i = 0; i < n_objects; ++i) {
      const bool want_active = i == 0 || rng.NextUniform01() < config.active_fraction;
      std::vector<int> active_pool, inactive_pool;
      for (const auto& [id, names] : config.classes.classes) {
        if (used.count(id)) continue;
        (verb.compatible_classes.count(id) ? active_pool : inactive_pool).push_back(id);
      }
      const std::vector<int>* pool = want_active ? &active_pool : &inactive_pool;
      if (pool->empty()) pool = want_active ? &inactive_pool : &active_pool;
      if (pool->empty()) break;

      SynthObject o;
      o.class_id = (*pool)[rng.NextIndex(static_cast<uint32_t>(pool->size()))];
      const auto& names = config.classes.Categories(o.class_id);
      o.category = names[rng.NextIndex(static_cast<uint32_t>(names.size()))];
      o.active = verb.compatible_classes.count(o.class_id) != 0;
      o.ellipse = rng.NextIndex(2) == 1;
      const int w = Range(rng, config.min_size, config.max_size);
      const int h = Range(rng, config.min_size, config.max_size);
      const auto& base = config.class_colors.at(o.class_id);
      for (int ch = 0; ch < 3; ++ch) o.color[ch] = base[ch] + Range(rng, -12, 12);
      const int dx = Range(rng, -config.max_motion, config.max_motion);
      const int dy = Range(rng, -config.max_motion, config.max_motion);

      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const int x0 = Range(rng, 0, W - w);
        const int y0 = Range(rng, 0, H - h);
        std::vector<Box> boxes;
        for (int t = 0; t < config.frames_per_clip; ++t) {
          boxes.push_back({std::clamp(x0 + t * dx, 0, W - w), std::clamp(y0 + t * dy, 0, H - h),
                           w, h});
        }
        placed = std::none_of(objects.begin(), objects.end(), [&](const SynthObject& other) {
          for (int t = 0; t < config.frames_per_clip; ++t) {
            if (boxes[t].Overlaps(other.boxes[t], 1)) return true;
          }
          return false;
        });
        if (placed) o.boxes = std::move(boxes);
      }
      if (!placed) continue;
      used.insert(o.class_id);
      o.object_id = static_cast<int>(objects.size()) + 1;
      objects.push_back(std::move(o));
    }

    const std::string narration_object = objects.front().category;
    const std::string narration = verb.name + " " + narration_object;
    const int background = Range(rng, 90, 150);
    for (int t = 0; t < config.frames_per_clip; ++t) {
      RgbImage image(W, H);
      LabelMask mask(W, H);
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          uint8_t* px = image.pixel(x, y);
          for (int ch = 0; ch < 3; ++ch) px[ch] = ClampByte(background + Range(rng, -10, 10));
        }
      }
      for (const auto& o : objects) {
        const Box& b = o.boxes[t];
        for (int y = b.y; y < b.y + b.h; ++y) {
          for (int x = b.x; x < b.x + b.w; ++x) {
            if (!Inside(o, b, x, y)) continue;
            uint8_t* px = image.pixel(x, y);
            for (int ch = 0; ch < 3; ++ch) px[ch] = ClampByte(o.color[ch] + Range(rng, -6, 6));
            mask.at(x, y) = static_cast<uint16_t>(o.object_id);
          }
        }
      }
      FrameRef frame;
      frame.frame_id = Padded("f", t, 2);
      frame.image = "frames/" + clip.clip_id + "/" + frame.frame_id + ".ppm";
      frame.mask = "masks/" + clip.clip_id + "/" + frame.frame_id + ".pgm";
      WriteImage(image, out / frame.image);
      WriteMask(mask, out / frame.mask);
      clip.frames.push_back(std::move(frame));
    }
    for (const auto& o : objects) {
      clip.objects.push_back(
          {clip.clip_id, o.object_id, o.category, o.class_id, narration, o.active});
    }
    dataset.clips.push_back(std::move(clip));
  }
  ValidateDataset(dataset, &config.classes);
  SaveClassMapping(config.classes, out / kClassesFile);
  SaveManifest(dataset, out / kManifestFile);
  return dataset;
}

}  // namespace noisyvos
