// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_LOSSES_H_
#define NOISYVOS_LOSSES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace noisyvos {

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before any
// log or power. Derivatives are taken w.r.t. the (clamped) probability.
inline constexpr double kProbEpsilon = 1e-7;
double ClampProbability(double p);

struct LossValue {
  double value = 0.0;
  double grad = 0.0;  // d value / d p
};

LossValue CrossEntropy(double p, double y);
// Cross entropy with roles swapped; log 0 is replaced by `log_zero`.
LossValue ReverseCrossEntropy(double p, double y, double log_zero = -4.0);

struct GceParams {
  double q = 0.7;
};
// (1 - r^q) / q with correctness r = y p + (1 - y)(1 - p).
LossValue Gce(double p, double y, const GceParams& params = {});

struct SceParams {
  double alpha = 0.1;
  double beta = 1.0;
  double log_zero = -4.0;
};
LossValue Sce(double p, double y, const SceParams& params = {});

struct AplParams {
  double q = 0.7;
  double w_active = 1.0;
  double w_passive = 1.0;
};
// Active (1 - r^q)/q plus passive |p - y|; the subgradient at p == y is 0.
LossValue Apl(double p, double y, const AplParams& params = {});

struct FocalParams {
  double alpha = 0.5;
  double gamma = 2.0;
};
LossValue Focal(double p, double y, const FocalParams& params = {});

// --- Early-learning regularisation -----------------------------------------

// kPublished: R = -log(1 - d + eps), as published for this setting.
// kOriginal: R = +log(1 - d + eps), the sign of the original ELR objective.
enum class ElrSign { kPublished, kOriginal };

struct ElrParams {
  double beta = 0.9;  // weight of the current prediction in the EMA
  double epsilon = 1e-6;
  double lambda = 1.0;
  FocalParams focal;
  ElrSign sign = ElrSign::kPublished;
};

struct ElrState {
  double s = 0.5;
};

// s <- (1 - beta) s + beta p
double ElrUpdateTarget(double s, double p, const ElrParams& params);
// Focal plus lambda * R(d), d = p s + (1 - p)(1 - s), with s held constant.
LossValue ElrLoss(double p, double y, double s, const ElrParams& params = {});

struct ElrStep {
  LossValue loss;
  ElrState state;
};
// Updates the target first, then evaluates the loss against the new target.
ElrStep ElrStepPixel(double p, double y, ElrState state, const ElrParams& params = {});

// --- NPN: partial labels, negative learning, weak-to-strong consistency -----

struct NpnParams {
  double alpha = 0.1;  // weight of the negative-learning term
  double beta = 0.2;   // weight of the consistency term
};

struct NpnState {
  uint32_t m1 = 0;
  uint32_t m0 = 0;
};

// -w (y* log p + (1 - y*) log(1 - p))
LossValue NpnPartialLabel(double p, int proxy_label, double reliability);
// -(1 - [a1 >= 1]) log(1 - p) - (1 - [a0 >= 1]) log p
LossValue NpnNegative(double p, int a1, int a0);
// Cross entropy of the strong view against a hard target.
LossValue NpnConsistency(double p_strong, int target);

struct NpnStep {
  double value = 0.0;
  double grad_weak = 0.0;
  double grad_strong = 0.0;
  NpnState state;
  int proxy_label = 0;
  double reliability = 0.0;
  double pll = 0.0;
  double nl = 0.0;
  double cr = 0.0;
};

// Accumulates this visit's candidate indicators into the counts, then
// evaluates pll + alpha nl + beta cr. The hard target of the consistency term
// carries no gradient to the weak view.
NpnStep NpnStepPixel(double p_weak, double p_strong, int y, NpnState state,
                     const NpnParams& params = {});

// --- Co-teaching -----------------------------------------------------------

struct CoTeachSchedule {
  double rho = 0.2;
  double t_k = 6.0;
  double cap = 0.95;
};

// min(cap, 1 - rho * min(n / T_k, 1))
double KeepRate(int epoch, const CoTeachSchedule& schedule);

// Indices of the max(1, floor(rate * B)) smallest losses, ascending by
// (loss, index).
std::vector<std::size_t> SelectSmallLoss(std::span<const double> losses, double rate);

}  // namespace noisyvos

#endif  // NOISYVOS_LOSSES_H_
