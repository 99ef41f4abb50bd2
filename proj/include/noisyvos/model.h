// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_MODEL_H_
#define NOISYVOS_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "noisyvos/dataset.h"
#include "noisyvos/grid.h"
#include "noisyvos/pmhm.h"
#include "noisyvos/rng.h"

namespace noisyvos {

// Per-pixel inputs: centred RGB scaled to [-4, 4] and coordinates in
// [-0.5, 0.5]. The wider colour range lets colour detectors form within a
// few epochs.
struct FrameFeatures {
  static constexpr int kChannels = 5;
  static constexpr double kColourScale = 8.0;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // kChannels per pixel, row-major

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

FrameFeatures MakeFeatures(const RgbImage& image);

// Brightness shift, contrast scaling around the frame mean, and uniform
// per-channel pixel noise on the colour channels, in unscaled [0, 1] colour
// units. Draw order: brightness, contrast, then one draw per colour value in
// pixel order.
struct PhotometricJitter {
  double brightness = 0.0;
  double contrast = 0.0;
  double noise = 0.0;
};
FrameFeatures ApplyPhotometric(const FrameFeatures& features, const PhotometricJitter& jitter,
                               Pcg32& rng);

struct PromptIds {
  int category = 0;
  int verb = 0;
};

// Text-conditioned per-pixel scorer:
//   x = [pixel features, category embedding, verb embedding]
//   h1 = tanh(W1 x + b1), h2 = tanh(W2 h1 + b2)
//   stage 1 = sigmoid(readout(h1)), stage 2 = sigmoid(readout(h2)),
//   main (stage 3) = sigmoid(readout(h2)), aux = sigmoid(readout(dropout(h2))).
class ToyModel {
 public:
  static constexpr int kCategoryWidth = 8;
  static constexpr int kVerbWidth = 4;
  static constexpr int kHidden = 32;
  static constexpr int kStages = 3;
  static constexpr int kInput = FrameFeatures::kChannels + kCategoryWidth + kVerbWidth;
  static constexpr double kEmbeddingInit = 1.5;
  // Readout biases start at logit(kForegroundPrior): objects cover a small
  // share of each frame.
  static constexpr double kForegroundPrior = 0.05;

  // Vocabularies exclude the reserved "unk" row appended after them.
  ToyModel(std::vector<std::string> categories, std::vector<std::string> verbs);

  // Glorot-uniform weights and U(-kEmbeddingInit, kEmbeddingInit) embeddings
  // drawn from the substream (seed, "model-init") in layout order. Hidden
  // biases start at zero.
  void Initialize(uint64_t seed);

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  // [begin, end) of the auxiliary readout inside parameters().
  std::pair<std::size_t, std::size_t> AuxParameterRange() const;

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<std::string>& verbs() const { return verbs_; }
  PromptIds Encode(const PromptRecord& record) const;
  PromptIds Encode(const std::string& category, const std::string& verb) const;

  struct ForwardPass {
    HeadOutputs outputs;
    PromptIds prompt;
    const FrameFeatures* features = nullptr;
    std::vector<double> h1;           // kHidden per pixel
    std::vector<double> h2;           // kHidden per pixel
    std::vector<uint8_t> aux_keep;    // kHidden per pixel; empty = no dropout
    double aux_scale = 1.0;
  };

  // Training forward pass over all heads. With aux_dropout > 0, each hidden
  // unit feeding the auxiliary readout is dropped with that probability
  // (one draw per pixel and unit, pixel-major) and survivors are rescaled.
  ForwardPass Forward(const FrameFeatures& features, PromptIds prompt, double aux_dropout = 0.0,
                      Pcg32* rng = nullptr) const;

  // Inference: the main head only; the auxiliary head is not evaluated.
  ProbabilityMap Predict(const FrameFeatures& features, PromptIds prompt) const;

  // d loss / d probability for each head; an empty grid means zero.
  struct OutputGradients {
    std::vector<ProbabilityMap> stages;  // size kStages or empty
    ProbabilityMap aux;
  };

  // Accumulates d loss / d parameters into `grad` (same layout as parameters()).
  void Backward(const ForwardPass& pass, const OutputGradients& output_grad,
                std::span<double> grad) const;

  std::string ToJson() const;
  static ToyModel FromJson(const std::string& text);
  void Save(const std::filesystem::path& path) const;
  static ToyModel Load(const std::filesystem::path& path);

 private:
  struct Layout {
    std::size_t category_embedding, verb_embedding, w1, b1, w2, b2;
    std::size_t readout[kStages];  // kHidden weights then one bias
    std::size_t aux;
    std::size_t total;
  };
  Layout MakeLayout() const;
  // Hidden pre-activation contribution shared by every pixel of a prompt.
  void PromptBias(PromptIds prompt, double* out) const;
  void Trunk(const double* feature, const double* prompt_bias, double* h1, double* h2) const;
  double Readout(int stage, const double* h) const;

  std::vector<std::string> categories_;
  std::vector<std::string> verbs_;
  Layout layout_;
  std::vector<double> params_;
};

}  // namespace noisyvos

#endif  // NOISYVOS_MODEL_H_
