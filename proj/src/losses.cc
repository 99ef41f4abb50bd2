// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noisyvos/errors.h"

namespace noisyvos {
namespace {

// Logs and reciprocals see their argument clamped at kProbEpsilon; terms
// whose label weight is zero are skipped so exact labels give exact zeros.
double SafeLog(double v) { return std::log(std::max(v, kProbEpsilon)); }
double SafeInv(double v) { return 1.0 / std::max(v, kProbEpsilon); }

// base^exponent, with 0^e := 0 for the e > 0 powers used below.
double Pow(double base, double exponent) {
  if (base <= 0.0) return exponent == 0.0 ? 1.0 : 0.0;
  return std::pow(base, exponent);
}

}  // namespace

double ClampProbability(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

LossValue CrossEntropy(double p, double y) {
  LossValue out;
  if (y != 0.0) {
    out.value -= y * SafeLog(p);
    out.grad -= y * SafeInv(p);
  }
  if (y != 1.0) {
    out.value -= (1.0 - y) * SafeLog(1.0 - p);
    out.grad += (1.0 - y) * SafeInv(1.0 - p);
  }
  return out;
}

LossValue ReverseCrossEntropy(double p, double y, double log_zero) {
  auto log_label = [log_zero](double v) { return v <= 0.0 ? log_zero : std::log(v); };
  const double log_y = log_label(y);
  const double log_not_y = log_label(1.0 - y);
  return {-(p * log_y + (1.0 - p) * log_not_y), -log_y + log_not_y};
}

LossValue Gce(double p, double y, const GceParams& params) {
  if (!(params.q > 0.0 && params.q <= 1.0)) throw ArgumentError("gce: q must lie in (0, 1]");
  const double r = std::max(y * p + (1.0 - y) * (1.0 - p), kProbEpsilon);
  const double q = params.q;
  return {(1.0 - std::pow(r, q)) / q, -(2.0 * y - 1.0) * std::pow(r, q - 1.0)};
}

LossValue Sce(double p, double y, const SceParams& params) {
  const LossValue ce = CrossEntropy(p, y);
  const LossValue rce = ReverseCrossEntropy(p, y, params.log_zero);
  return {params.alpha * ce.value + params.beta * rce.value,
          params.alpha * ce.grad + params.beta * rce.grad};
}

LossValue Apl(double p, double y, const AplParams& params) {
  const LossValue active = Gce(p, y, GceParams{params.q});
  const double diff = p - y;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  return {params.w_active * active.value + params.w_passive * std::abs(diff),
          params.w_active * active.grad + params.w_passive * sign};
}

LossValue Focal(double p, double y, const FocalParams& params) {
  const double a = params.alpha;
  const double g = params.gamma;
  LossValue out;
  if (y != 0.0) {
    // -y a (1-p)^g log p
    const double w = a * Pow(1.0 - p, g);
    const double dw = -a * g * Pow(1.0 - p, g - 1.0);
    out.value -= y * w * SafeLog(p);
    out.grad -= y * (dw * SafeLog(p) + w * SafeInv(p));
  }
  if (y != 1.0) {
    // -(1-y) (1-a) p^g log(1-p)
    const double w = (1.0 - a) * Pow(p, g);
    const double dw = (1.0 - a) * g * Pow(p, g - 1.0);
    out.value -= (1.0 - y) * w * SafeLog(1.0 - p);
    out.grad -= (1.0 - y) * (dw * SafeLog(1.0 - p) - w * SafeInv(1.0 - p));
  }
  return out;
}

double ElrUpdateTarget(double s, double p, const ElrParams& params) {
  return (1.0 - params.beta) * s + params.beta * p;
}

LossValue ElrLoss(double p, double y, double s, const ElrParams& params) {
  LossValue out = Focal(p, y, params.focal);
  if (params.lambda == 0.0) return out;
  constexpr double kMaxAgreement = 1.0 - 1e-12;
  const double d_raw = p * s + (1.0 - p) * (1.0 - s);
  const double d = std::min(d_raw, kMaxAgreement);
  const double inner = 1.0 - d + params.epsilon;
  const double dd_dp = d_raw > kMaxAgreement ? 0.0 : 2.0 * s - 1.0;
  const double sign = params.sign == ElrSign::kPublished ? -1.0 : 1.0;
  // R = sign * log(inner), dR/dp = -sign * dd/dp / inner
  out.value += params.lambda * sign * std::log(inner);
  out.grad += params.lambda * (-sign) * dd_dp / inner;
  return out;
}

ElrStep ElrStepPixel(double p, double y, ElrState state, const ElrParams& params) {
  state.s = ElrUpdateTarget(state.s, p, params);
  return {ElrLoss(p, y, state.s, params), state};
}

LossValue NpnPartialLabel(double p, int proxy_label, double reliability) {
  const LossValue ce = CrossEntropy(p, proxy_label);
  return {reliability * ce.value, reliability * ce.grad};
}

LossValue NpnNegative(double p, int a1, int a0) {
  LossValue out;
  if (a1 < 1) {
    out.value -= SafeLog(1.0 - p);
    out.grad += SafeInv(1.0 - p);
  }
  if (a0 < 1) {
    out.value -= SafeLog(p);
    out.grad -= SafeInv(p);
  }
  return out;
}

LossValue NpnConsistency(double p_strong, int target) {
  return CrossEntropy(p_strong, target);
}

NpnStep NpnStepPixel(double p_weak, double p_strong, int y, NpnState state,
                     const NpnParams& params) {
  if (y != 0 && y != 1) throw ArgumentError("npn: label must be 0 or 1");
  const int predicted = p_weak > 0.5 ? 1 : 0;
  const int a1 = y + predicted;
  const int a0 = (1 - y) + (1 - predicted);
  state.m1 += static_cast<uint32_t>(a1);
  state.m0 += static_cast<uint32_t>(a0);

  NpnStep out;
  out.state = state;
  out.proxy_label = state.m1 >= state.m0 ? 1 : 0;
  out.reliability = static_cast<double>(std::max(state.m1, state.m0)) /
                    static_cast<double>(state.m1 + state.m0);
  const LossValue pll = NpnPartialLabel(p_weak, out.proxy_label, out.reliability);
  const LossValue nl = NpnNegative(p_weak, a1, a0);
  const LossValue cr = NpnConsistency(p_strong, predicted);
  out.pll = pll.value;
  out.nl = nl.value;
  out.cr = cr.value;
  out.value = pll.value + params.alpha * nl.value + params.beta * cr.value;
  out.grad_weak = pll.grad + params.alpha * nl.grad;
  out.grad_strong = params.beta * cr.grad;
  return out;
}

double KeepRate(int epoch, const CoTeachSchedule& schedule) {
  if (epoch < 0) throw ArgumentError("keep_rate: epoch must be >= 0");
  const double progress = std::min(static_cast<double>(epoch) / schedule.t_k, 1.0);
  return std::min(schedule.cap, 1.0 - schedule.rho * progress);
}

std::vector<std::size_t> SelectSmallLoss(std::span<const double> losses, double rate) {
  if (losses.empty()) throw ArgumentError("select_small_loss: empty loss list");
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ArgumentError("select_small_loss: rate must lie in (0, 1]");
  }
  const std::size_t batch = losses.size();
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(rate * static_cast<double>(batch))));
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace noisyvos
