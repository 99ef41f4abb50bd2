// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_PMHM_H_
#define NOISYVOS_PMHM_H_

#include <span>
#include <vector>

#include "noisyvos/grid.h"
#include "noisyvos/losses.h"

namespace noisyvos {

struct PmhmParams {
  double tau_m = 0.20;  // margin around 0.5
  double tau_e = 0.85;  // spatial-gradient threshold
  double lambda_head = 0.1;
  double lambda_layer = 0.1;
  double kl_epsilon = 1e-7;
  double dropout = 0.1;  // auxiliary-head input dropout
  double freeze0 = 0.5;  // initial auxiliary-head freeze probability
  bool hard_dice = false;
  bool hard_on_aux = true;  // the auxiliary head also takes L_hard
  FocalParams hard_focal;

  void Validate() const;
};

// Per-frame decoder outputs. stages.back() is the main head.
struct HeadOutputs {
  std::vector<ProbabilityMap> stages;
  ProbabilityMap aux;

  const ProbabilityMap& main() const { return stages.back(); }
};

// |p - 0.5| < tau_m or ||grad p||_2 > tau_e. Forward differences; the last
// column/row falls back to backward differences.
BinaryMask UncertaintyMask(const ProbabilityMap& main, const PmhmParams& params);

struct SymKl {
  double value = 0.0;
  double d_p = 0.0;
  double d_q = 0.0;
};
// KL(p||q) + KL(q||p) for Bernoulli distributions, inputs clamped to
// [eps, 1 - eps].
SymKl BernoulliSymKl(double p, double q, double eps = 1e-7);

struct HeadConsistency {
  double value = 0.0;
  std::vector<ProbabilityMap> grad_main;
  std::vector<ProbabilityMap> grad_aux;
};

// Mean symmetric KL between main and aux over the uncertain pixels of all
// frames (normalised by the total uncertain count; 0 when there are none).
HeadConsistency HeadConsistencyLoss(std::span<const ProbabilityMap> main,
                                    std::span<const ProbabilityMap> aux,
                                    std::span<const BinaryMask> uncertain,
                                    const PmhmParams& params);

struct LayerConsistency {
  double value = 0.0;
  // grad[frame][stage], same layout as HeadOutputs::stages.
  std::vector<std::vector<ProbabilityMap>> grad;
};

// Mean over uncertain pixels of the average symmetric KL between the final
// stage and each earlier stage. Throws ArgumentError for fewer than 2 stages.
LayerConsistency LayerConsistencyLoss(std::span<const HeadOutputs> frames,
                                      std::span<const BinaryMask> uncertain,
                                      const PmhmParams& params);

struct HardLoss {
  double value = 0.0;
  std::vector<ProbabilityMap> grad;
};

// Focal loss (plus optional soft dice) over pixels outside the uncertain set,
// normalised by the total confident count; 0 when every pixel is uncertain.
HardLoss ConfidentHardLoss(std::span<const ProbabilityMap> main,
                           std::span<const BinaryMask> targets,
                           std::span<const BinaryMask> uncertain,
                           const PmhmParams& params);

struct SegLoss {
  double hard = 0.0;
  double head = 0.0;
  double layer = 0.0;
  double total = 0.0;
};
SegLoss TotalSegLoss(double hard, double head, double layer, const PmhmParams& params);

struct AuxPerturbation {
  double dropout_rate = 0.0;
  double freeze_probability = 0.0;
};
// Constant dropout; freeze probability freeze0 * (1 - epoch / total_epochs).
AuxPerturbation AuxPerturbationSchedule(int epoch, int total_epochs, const PmhmParams& params);

}  // namespace noisyvos

#endif  // NOISYVOS_PMHM_H_
