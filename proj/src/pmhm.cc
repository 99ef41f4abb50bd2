// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/pmhm.h"

#include <algorithm>
#include <cmath>

#include "noisyvos/errors.h"

namespace noisyvos {

void PmhmParams::Validate() const {
  if (!(tau_m > 0.0 && tau_m < 0.5)) throw ArgumentError("pmhm: tau_m must lie in (0, 0.5)");
  if (!(tau_e > 0.0)) throw ArgumentError("pmhm: tau_e must be positive");
  if (lambda_head < 0.0 || lambda_layer < 0.0) {
    throw ArgumentError("pmhm: loss weights must be non-negative");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("pmhm: dropout must lie in [0, 1)");
  if (!(freeze0 >= 0.0 && freeze0 <= 1.0)) throw ArgumentError("pmhm: freeze0 must lie in [0, 1]");
}

BinaryMask UncertaintyMask(const ProbabilityMap& main, const PmhmParams& params) {
  const int w = main.width;
  const int h = main.height;
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double p = main.at(x, y);
      double gx = 0.0, gy = 0.0;
      if (w > 1) gx = x + 1 < w ? main.at(x + 1, y) - p : p - main.at(x - 1, y);
      if (h > 1) gy = y + 1 < h ? main.at(x, y + 1) - p : p - main.at(x, y - 1);
      const bool margin = std::abs(p - 0.5) < params.tau_m;
      const bool edge = std::sqrt(gx * gx + gy * gy) > params.tau_e;
      out.at(x, y) = margin || edge ? 1 : 0;
    }
  }
  return out;
}

SymKl BernoulliSymKl(double p, double q, double eps) {
  p = std::clamp(p, eps, 1.0 - eps);
  q = std::clamp(q, eps, 1.0 - eps);
  const double log_ratio = std::log(p / q);
  const double log_ratio_c = std::log((1.0 - p) / (1.0 - q));
  SymKl out;
  // KL(p||q) + KL(q||p) = (p - q) log(p/q) + (q - p) log((1-p)/(1-q))
  out.value = (p - q) * (log_ratio - log_ratio_c);
  out.d_p = log_ratio - log_ratio_c - q / p + (1.0 - q) / (1.0 - p);
  out.d_q = -log_ratio + log_ratio_c - p / q + (1.0 - p) / (1.0 - q);
  return out;
}

namespace {

void CheckFrames(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ArgumentError(std::string(what) + ": frame count mismatch");
}

std::size_t TotalCount(std::span<const BinaryMask> masks, bool ones) {
  std::size_t n = 0;
  for (const auto& m : masks) {
    const std::size_t c = CountOnes(m);
    n += ones ? c : m.size() - c;
  }
  return n;
}

}  // namespace

HeadConsistency HeadConsistencyLoss(std::span<const ProbabilityMap> main,
                                    std::span<const ProbabilityMap> aux,
                                    std::span<const BinaryMask> uncertain,
                                    const PmhmParams& params) {
  CheckFrames(main.size(), aux.size(), "head_consistency");
  CheckFrames(main.size(), uncertain.size(), "head_consistency");
  HeadConsistency out;
  for (std::size_t t = 0; t < main.size(); ++t) {
    if (!main[t].SameShape(aux[t]) || !main[t].SameShape(uncertain[t])) {
      throw ArgumentError("head_consistency: dimension mismatch");
    }
    out.grad_main.emplace_back(main[t].width, main[t].height);
    out.grad_aux.emplace_back(main[t].width, main[t].height);
  }
  const std::size_t count = TotalCount(uncertain, true);
  if (count == 0) return out;
  const double scale = 1.0 / static_cast<double>(count);
  for (std::size_t t = 0; t < main.size(); ++t) {
    for (std::size_t i = 0; i < main[t].size(); ++i) {
      if (uncertain[t].values[i] == 0) continue;
      const SymKl kl = BernoulliSymKl(main[t].values[i], aux[t].values[i], params.kl_epsilon);
      out.value += kl.value;
      out.grad_main[t].values[i] = scale * kl.d_p;
      out.grad_aux[t].values[i] = scale * kl.d_q;
    }
  }
  out.value *= scale;
  return out;
}

LayerConsistency LayerConsistencyLoss(std::span<const HeadOutputs> frames,
                                      std::span<const BinaryMask> uncertain,
                                      const PmhmParams& params) {
  CheckFrames(frames.size(), uncertain.size(), "layer_consistency");
  LayerConsistency out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& stages = frames[t].stages;
    if (stages.size() < 2) {
      throw ArgumentError("layer_consistency: needs at least 2 decoder stages");
    }
    auto& g = out.grad.emplace_back();
    for (const auto& s : stages) {
      if (!s.SameShape(uncertain[t])) throw ArgumentError("layer_consistency: dimension mismatch");
      g.emplace_back(s.width, s.height);
    }
  }
  const std::size_t count = TotalCount(uncertain, true);
  if (count == 0) return out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& stages = frames[t].stages;
    const std::size_t last = stages.size() - 1;
    const double scale = 1.0 / (static_cast<double>(count) * static_cast<double>(last));
    for (std::size_t i = 0; i < uncertain[t].size(); ++i) {
      if (uncertain[t].values[i] == 0) continue;
      const double final_p = stages[last].values[i];
      for (std::size_t l = 0; l < last; ++l) {
        const SymKl kl = BernoulliSymKl(final_p, stages[l].values[i], params.kl_epsilon);
        out.value += scale * kl.value;
        out.grad[t][last].values[i] += scale * kl.d_p;
        out.grad[t][l].values[i] += scale * kl.d_q;
      }
    }
  }
  return out;
}

HardLoss ConfidentHardLoss(std::span<const ProbabilityMap> main,
                           std::span<const BinaryMask> targets,
                           std::span<const BinaryMask> uncertain,
                           const PmhmParams& params) {
  CheckFrames(main.size(), targets.size(), "hard_loss");
  CheckFrames(main.size(), uncertain.size(), "hard_loss");
  HardLoss out;
  for (const auto& m : main) out.grad.emplace_back(m.width, m.height);
  const std::size_t count = TotalCount(uncertain, false);
  if (count == 0) return out;
  const double scale = 1.0 / static_cast<double>(count);
  double inter = 0.0, mass = 0.0;
  for (std::size_t t = 0; t < main.size(); ++t) {
    if (!main[t].SameShape(targets[t]) || !main[t].SameShape(uncertain[t])) {
      throw ArgumentError("hard_loss: dimension mismatch");
    }
    for (std::size_t i = 0; i < main[t].size(); ++i) {
      if (uncertain[t].values[i] != 0) continue;
      const double p = main[t].values[i];
      const double y = targets[t].values[i];
      const LossValue f = Focal(p, y, params.hard_focal);
      out.value += scale * f.value;
      out.grad[t].values[i] = scale * f.grad;
      inter += p * y;
      mass += p + y;
    }
  }
  if (params.hard_dice) {
    // 1 - (2 I + 1) / (S + 1)
    const double denom = mass + 1.0;
    const double ratio = (2.0 * inter + 1.0) / denom;
    out.value += 1.0 - ratio;
    for (std::size_t t = 0; t < main.size(); ++t) {
      for (std::size_t i = 0; i < main[t].size(); ++i) {
        if (uncertain[t].values[i] != 0) continue;
        const double y = targets[t].values[i];
        out.grad[t].values[i] -= (2.0 * y * denom - (2.0 * inter + 1.0)) / (denom * denom);
      }
    }
  }
  return out;
}

SegLoss TotalSegLoss(double hard, double head, double layer, const PmhmParams& params) {
  return {hard, head, layer,
          hard + params.lambda_head * head + params.lambda_layer * layer};
}

AuxPerturbation AuxPerturbationSchedule(int epoch, int total_epochs, const PmhmParams& params) {
  if (total_epochs < 1 || epoch < 0 || epoch > total_epochs) {
    throw ArgumentError("aux_perturbation_schedule: epoch outside [0, total_epochs]");
  }
  const double remaining = 1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return {params.dropout, params.freeze0 * remaining};
}

}  // namespace noisyvos
