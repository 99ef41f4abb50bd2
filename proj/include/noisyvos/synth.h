// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_SYNTH_H_
#define NOISYVOS_SYNTH_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "noisyvos/dataset.h"

namespace noisyvos {

struct VerbSpec {
  std::string name;
  std::set<int> compatible_classes;  // objects of these classes are active
};

struct SynthConfig {
  int n_clips = 40;
  int frames_per_clip = 3;
  int width = 64;
  int height = 64;
  int min_objects = 2;
  int max_objects = 3;
  int min_size = 18;
  int max_size = 28;
  int max_motion = 2;  // pixels per frame along each axis
  ClassMapping classes;
  std::map<int, std::array<uint8_t, 3>> class_colors;
  std::vector<VerbSpec> verbs;
  double active_fraction = 0.5;
  uint64_t seed = 0;
  std::string split = "train";

  // A kitchen-flavoured vocabulary of 6 classes and 4 verbs; every verb
  // applies to half of the classes.
  static SynthConfig Default();
  void Validate() const;
};

SynthConfig SynthConfigFromJson(const std::string& text, SynthConfig base = SynthConfig::Default());
std::string SynthConfigToJson(const SynthConfig& config);

// Generates frames, label masks, classes.json and manifest.json under `out`.
// Byte-deterministic given the config. Every object is visible in every
// frame; clip i draws from the substream "<split>/clip/<i>".
Dataset SynthGenerate(const SynthConfig& config, const std::filesystem::path& out);

}  // namespace noisyvos

#endif  // NOISYVOS_SYNTH_H_
