// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/model.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "noisyvos/errors.h"
#include "noisyvos/pnm.h"

namespace noisyvos {
namespace {

constexpr int H = ToyModel::kHidden;
constexpr int C = FrameFeatures::kChannels;

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double Centered(int v, int extent) {
  return extent > 1 ? static_cast<double>(v) / (extent - 1) - 0.5 : 0.0;
}

}  // namespace

FrameFeatures MakeFeatures(const RgbImage& image) {
  FrameFeatures f{image.width, image.height, {}};
  f.values.resize(f.pixels() * C);
  double* out = f.values.data();
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const uint8_t* px = image.pixel(x, y);
      *out++ = FrameFeatures::kColourScale * (px[0] / 255.0 - 0.5);
      *out++ = FrameFeatures::kColourScale * (px[1] / 255.0 - 0.5);
      *out++ = FrameFeatures::kColourScale * (px[2] / 255.0 - 0.5);
      *out++ = Centered(x, image.width);
      *out++ = Centered(y, image.height);
    }
  }
  return f;
}

FrameFeatures ApplyPhotometric(const FrameFeatures& features, const PhotometricJitter& jitter,
                               Pcg32& rng) {
  FrameFeatures out = features;
  const double brightness = jitter.brightness * (2.0 * rng.NextUniform01() - 1.0);
  const double contrast = 1.0 + jitter.contrast * (2.0 * rng.NextUniform01() - 1.0);
  double mean = 0.0;
  const std::size_t n = features.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) mean += features.values[i * C + c];
  }
  mean /= std::max<std::size_t>(1, 3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      double& v = out.values[i * C + c];
      const double noise = jitter.noise * (2.0 * rng.NextUniform01() - 1.0);
      const double limit = 0.5 * FrameFeatures::kColourScale;
      const double shift = (brightness + noise) * FrameFeatures::kColourScale;
      v = std::clamp((v - mean) * contrast + mean + shift, -limit, limit);
    }
  }
  return out;
}

ToyModel::ToyModel(std::vector<std::string> categories, std::vector<std::string> verbs)
    : categories_(std::move(categories)), verbs_(std::move(verbs)) {
  layout_ = MakeLayout();
  params_.assign(layout_.total, 0.0);
}

ToyModel::Layout ToyModel::MakeLayout() const {
  Layout l{};
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t begin = at;
    at += n;
    return begin;
  };
  l.category_embedding = take((categories_.size() + 1) * kCategoryWidth);
  l.verb_embedding = take((verbs_.size() + 1) * kVerbWidth);
  l.w1 = take(static_cast<std::size_t>(kInput) * H);
  l.b1 = take(H);
  l.w2 = take(static_cast<std::size_t>(H) * H);
  l.b2 = take(H);
  for (auto& r : l.readout) r = take(H + 1);
  l.aux = take(H + 1);
  l.total = at;
  return l;
}

std::pair<std::size_t, std::size_t> ToyModel::AuxParameterRange() const {
  return {layout_.aux, layout_.aux + H + 1};
}

void ToyModel::Initialize(uint64_t seed) {
  Pcg32 rng = RngSubstream(seed, "model-init");
  auto uniform = [&rng](double limit) { return limit * (2.0 * rng.NextUniform01() - 1.0); };
  std::fill(params_.begin(), params_.end(), 0.0);
  for (std::size_t i = layout_.category_embedding; i < layout_.w1; ++i) {
    params_[i] = uniform(kEmbeddingInit);
  }
  const double w1_limit = std::sqrt(6.0 / (kInput + H));
  for (std::size_t i = 0; i < static_cast<std::size_t>(kInput) * H; ++i) {
    params_[layout_.w1 + i] = uniform(w1_limit);
  }
  const double w2_limit = std::sqrt(6.0 / (H + H));
  for (std::size_t i = 0; i < static_cast<std::size_t>(H) * H; ++i) {
    params_[layout_.w2 + i] = uniform(w2_limit);
  }
  const double readout_limit = std::sqrt(6.0 / (H + 1));
  for (std::size_t r : {layout_.readout[0], layout_.readout[1], layout_.readout[2], layout_.aux}) {
    for (int j = 0; j < H; ++j) params_[r + j] = uniform(readout_limit);
    params_[r + H] = std::log(kForegroundPrior / (1.0 - kForegroundPrior));
  }
}

PromptIds ToyModel::Encode(const std::string& category, const std::string& verb) const {
  auto index = [](const std::vector<std::string>& vocab, const std::string& word) {
    auto it = std::find(vocab.begin(), vocab.end(), word);
    return static_cast<int>(it - vocab.begin());  // vocab.size() is "unk"
  };
  return {index(categories_, category), index(verbs_, verb)};
}

PromptIds ToyModel::Encode(const PromptRecord& record) const {
  return Encode(record.category, record.Verb());
}

void ToyModel::PromptBias(PromptIds prompt, double* out) const {
  const double* w1 = &params_[layout_.w1];
  const double* cat = &params_[layout_.category_embedding + prompt.category * kCategoryWidth];
  const double* verb = &params_[layout_.verb_embedding + prompt.verb * kVerbWidth];
  for (int j = 0; j < H; ++j) out[j] = params_[layout_.b1 + j];
  for (int e = 0; e < kCategoryWidth; ++e) {
    const double* row = w1 + (C + e) * H;
    for (int j = 0; j < H; ++j) out[j] += row[j] * cat[e];
  }
  for (int e = 0; e < kVerbWidth; ++e) {
    const double* row = w1 + (C + kCategoryWidth + e) * H;
    for (int j = 0; j < H; ++j) out[j] += row[j] * verb[e];
  }
}

void ToyModel::Trunk(const double* feature, const double* prompt_bias, double* h1,
                     double* h2) const {
  const double* w1 = &params_[layout_.w1];
  const double* w2 = &params_[layout_.w2];
  double a[H];
  for (int j = 0; j < H; ++j) a[j] = prompt_bias[j];
  for (int c = 0; c < C; ++c) {
    const double* row = w1 + c * H;
    for (int j = 0; j < H; ++j) a[j] += row[j] * feature[c];
  }
  for (int j = 0; j < H; ++j) h1[j] = std::tanh(a[j]);
  for (int j = 0; j < H; ++j) a[j] = params_[layout_.b2 + j];
  for (int k = 0; k < H; ++k) {
    const double* row = w2 + k * H;
    for (int j = 0; j < H; ++j) a[j] += row[j] * h1[k];
  }
  for (int j = 0; j < H; ++j) h2[j] = std::tanh(a[j]);
}

double ToyModel::Readout(int stage, const double* h) const {
  const double* w = &params_[layout_.readout[stage]];
  double z = w[H];
  for (int j = 0; j < H; ++j) z += w[j] * h[j];
  return Sigmoid(z);
}

ToyModel::ForwardPass ToyModel::Forward(const FrameFeatures& features, PromptIds prompt,
                                        double aux_dropout, Pcg32* rng) const {
  if (aux_dropout > 0.0 && rng == nullptr) {
    throw ArgumentError("forward: dropout needs a random stream");
  }
  ForwardPass pass;
  pass.prompt = prompt;
  pass.features = &features;
  const int w = features.width, h = features.height;
  const std::size_t n = features.pixels();
  pass.h1.resize(n * H);
  pass.h2.resize(n * H);
  for (int s = 0; s < kStages; ++s) pass.outputs.stages.emplace_back(w, h);
  pass.outputs.aux = ProbabilityMap(w, h);
  if (aux_dropout > 0.0) {
    pass.aux_keep.resize(n * H);
    pass.aux_scale = 1.0 / (1.0 - aux_dropout);
  }
  double bias[H];
  PromptBias(prompt, bias);
  const double* aux_w = &params_[layout_.aux];
  for (std::size_t i = 0; i < n; ++i) {
    double* h1 = &pass.h1[i * H];
    double* h2 = &pass.h2[i * H];
    Trunk(&features.values[i * C], bias, h1, h2);
    pass.outputs.stages[0].values[i] = Readout(0, h1);
    pass.outputs.stages[1].values[i] = Readout(1, h2);
    pass.outputs.stages[2].values[i] = Readout(2, h2);
    double z = aux_w[H];
    if (aux_dropout > 0.0) {
      uint8_t* keep = &pass.aux_keep[i * H];
      for (int j = 0; j < H; ++j) {
        keep[j] = rng->NextUniform01() >= aux_dropout ? 1 : 0;
        if (keep[j]) z += aux_w[j] * (h2[j] * pass.aux_scale);
      }
    } else {
      for (int j = 0; j < H; ++j) z += aux_w[j] * h2[j];
    }
    pass.outputs.aux.values[i] = Sigmoid(z);
  }
  return pass;
}

ProbabilityMap ToyModel::Predict(const FrameFeatures& features, PromptIds prompt) const {
  ProbabilityMap out(features.width, features.height);
  double bias[H], h1[H], h2[H];
  PromptBias(prompt, bias);
  for (std::size_t i = 0; i < features.pixels(); ++i) {
    Trunk(&features.values[i * C], bias, h1, h2);
    out.values[i] = Readout(kStages - 1, h2);
  }
  return out;
}

void ToyModel::Backward(const ForwardPass& pass, const OutputGradients& output_grad,
                        std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ArgumentError("backward: gradient size mismatch");
  const FrameFeatures& features = *pass.features;
  const std::size_t n = features.pixels();
  const bool has_stage[kStages] = {
      output_grad.stages.size() > 0 && !output_grad.stages[0].values.empty(),
      output_grad.stages.size() > 1 && !output_grad.stages[1].values.empty(),
      output_grad.stages.size() > 2 && !output_grad.stages[2].values.empty()};
  const bool has_aux = !output_grad.aux.values.empty();

  const double* w2 = &params_[layout_.w2];
  const double* v[kStages] = {&params_[layout_.readout[0]], &params_[layout_.readout[1]],
                              &params_[layout_.readout[2]]};
  const double* va = &params_[layout_.aux];
  double* g_w1 = &grad[layout_.w1];
  double* g_w2 = &grad[layout_.w2];
  double* g_b2 = &grad[layout_.b2];
  double* g_v[kStages] = {&grad[layout_.readout[0]], &grad[layout_.readout[1]],
                          &grad[layout_.readout[2]]};
  double* g_va = &grad[layout_.aux];

  double sum_da1[H] = {};
  double dh2[H], da2[H], dh1[H], da1[H], h2_aux[H];
  for (std::size_t i = 0; i < n; ++i) {
    double gl[kStages];
    bool any = false;
    for (int s = 0; s < kStages; ++s) {
      gl[s] = 0.0;
      if (has_stage[s]) {
        const double p = pass.outputs.stages[s].values[i];
        gl[s] = output_grad.stages[s].values[i] * p * (1.0 - p);
        any = any || gl[s] != 0.0;
      }
    }
    double ga = 0.0;
    if (has_aux) {
      const double p = pass.outputs.aux.values[i];
      ga = output_grad.aux.values[i] * p * (1.0 - p);
      any = any || ga != 0.0;
    }
    if (!any) continue;

    const double* h1 = &pass.h1[i * H];
    const double* h2 = &pass.h2[i * H];
    const double* f = &features.values[i * C];
    const uint8_t* keep = pass.aux_keep.empty() ? nullptr : &pass.aux_keep[i * H];
    for (int j = 0; j < H; ++j) {
      h2_aux[j] = keep == nullptr ? h2[j] : (keep[j] ? h2[j] * pass.aux_scale : 0.0);
    }

    g_v[0][H] += gl[0];
    g_v[1][H] += gl[1];
    g_v[2][H] += gl[2];
    g_va[H] += ga;
    for (int j = 0; j < H; ++j) {
      g_v[0][j] += gl[0] * h1[j];
      g_v[1][j] += gl[1] * h2[j];
      g_v[2][j] += gl[2] * h2[j];
      g_va[j] += ga * h2_aux[j];
      const double aux_path =
          keep == nullptr ? va[j] : (keep[j] ? va[j] * pass.aux_scale : 0.0);
      dh2[j] = gl[1] * v[1][j] + gl[2] * v[2][j] + ga * aux_path;
      da2[j] = dh2[j] * (1.0 - h2[j] * h2[j]);
      g_b2[j] += da2[j];
    }
    for (int k = 0; k < H; ++k) {
      double* row = g_w2 + k * H;
      const double* wrow = w2 + k * H;
      double acc = gl[0] * v[0][k];
      for (int j = 0; j < H; ++j) {
        row[j] += h1[k] * da2[j];
        acc += wrow[j] * da2[j];
      }
      dh1[k] = acc;
    }
    for (int j = 0; j < H; ++j) {
      da1[j] = dh1[j] * (1.0 - h1[j] * h1[j]);
      sum_da1[j] += da1[j];
    }
    for (int c = 0; c < C; ++c) {
      double* row = g_w1 + c * H;
      for (int j = 0; j < H; ++j) row[j] += f[c] * da1[j];
    }
  }

  const double* w1 = &params_[layout_.w1];
  const int cat = pass.prompt.category;
  const int verb = pass.prompt.verb;
  const double* cat_e = &params_[layout_.category_embedding + cat * kCategoryWidth];
  const double* verb_e = &params_[layout_.verb_embedding + verb * kVerbWidth];
  double* g_cat = &grad[layout_.category_embedding + cat * kCategoryWidth];
  double* g_verb = &grad[layout_.verb_embedding + verb * kVerbWidth];
  for (int j = 0; j < H; ++j) grad[layout_.b1 + j] += sum_da1[j];
  for (int e = 0; e < kCategoryWidth; ++e) {
    const double* wrow = w1 + (C + e) * H;
    double* grow = g_w1 + (C + e) * H;
    double acc = 0.0;
    for (int j = 0; j < H; ++j) {
      grow[j] += cat_e[e] * sum_da1[j];
      acc += wrow[j] * sum_da1[j];
    }
    g_cat[e] += acc;
  }
  for (int e = 0; e < kVerbWidth; ++e) {
    const double* wrow = w1 + (C + kCategoryWidth + e) * H;
    double* grow = g_w1 + (C + kCategoryWidth + e) * H;
    double acc = 0.0;
    for (int j = 0; j < H; ++j) {
      grow[j] += verb_e[e] * sum_da1[j];
      acc += wrow[j] * sum_da1[j];
    }
    g_verb[e] += acc;
  }
}

std::string ToyModel::ToJson() const {
  nlohmann::ordered_json doc;
  doc["format"] = "noisyvos-toy-model-1";
  doc["categories"] = categories_;
  doc["verbs"] = verbs_;
  doc["parameters"] = params_;
  return doc.dump() + "\n";
}

ToyModel ToyModel::FromJson(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format").get<std::string>() != "noisyvos-toy-model-1") {
      throw FormatError("model: field 'format' has an unsupported value");
    }
    ToyModel model(doc.at("categories").get<std::vector<std::string>>(),
                   doc.at("verbs").get<std::vector<std::string>>());
    auto params = doc.at("parameters").get<std::vector<double>>();
    if (params.size() != model.params_.size()) {
      throw FormatError("model: field 'parameters' has the wrong length");
    }
    model.params_ = std::move(params);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

void ToyModel::Save(const std::filesystem::path& path) const { WriteFileBytes(path, ToJson()); }

ToyModel ToyModel::Load(const std::filesystem::path& path) {
  return FromJson(ReadFileBytes(path));
}

}  // namespace noisyvos
