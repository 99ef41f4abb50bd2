// SPDX-License-Identifier: Apache-2.0
// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Scratch data goes under --work.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "noisyvos/dataset.h"
#include "noisyvos/experiment.h"
#include "noisyvos/losses.h"
#include "noisyvos/mask_noise.h"
#include "noisyvos/metrics.h"
#include "noisyvos/model.h"
#include "noisyvos/pmhm.h"
#include "noisyvos/pnm.h"
#include "noisyvos/rng.h"
#include "noisyvos/synth.h"
#include "noisyvos/text_noise.h"
#include "noisyvos/train.h"
#include "gradcheck.h"
#include "oracles.h"

namespace noisyvos {
namespace {

namespace fs = std::filesystem;
using testing::CentralDifference;
using testing::ProbabilityGrid;
using testing::RelativeError;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failure notes; the first few are kept for the summary line.
class Tally {
 public:
  void Expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (notes_.size() < 3) notes_.push_back(what);
  }
  Outcome Finish(const std::string& detail) const {
    Outcome o{failures_ == 0, detail};
    for (const auto& n : notes_) o.detail += "; " + n;
    if (failures_ > 3) o.detail += "; ... " + std::to_string(failures_) + " failures";
    return o;
  }

 private:
  int failures_ = 0;
  std::vector<std::string> notes_;
};

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string Sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string Fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// --- 1 ----------------------------------------------------------------------

Outcome FlipRate(const fs::path&) {
  const ClassMapping mapping = SynthConfig::Default().classes;
  const auto names = mapping.AllCategories();
  Dataset d;
  const int n = 100000, per_clip = 10;
  for (int i = 0; i < n; ++i) {
    if (i % per_clip == 0) {
      Clip clip;
      clip.clip_id = "clip" + std::to_string(i / per_clip);
      clip.frames.push_back({"f00", "frames/x.ppm", "masks/x.pgm"});
      d.clips.push_back(clip);
    }
    Clip& clip = d.clips.back();
    PromptRecord r;
    r.clip_id = clip.clip_id;
    r.object_id = static_cast<int>(clip.objects.size()) + 1;
    r.category = names[i % names.size()];
    r.class_id = *mapping.ClassOf(r.category);
    r.narration = "open " + r.category;
    r.active = true;
    clip.objects.push_back(r);
  }
  Tally tally;
  std::string detail;
  double worst_time = 0.0;
  for (double rho : {0.2, 0.4, 0.6}) {
    const auto start = std::chrono::steady_clock::now();
    const TextNoiseResult result = CorruptDatasetText(d, rho, mapping, 2024);
    const double took = Seconds(start);
    worst_time = std::max(worst_time, took);
    std::size_t flipped = 0;
    for (const auto& p : result.provenance) flipped += p.emitted_class_id != p.original_class_id;
    const double fraction = static_cast<double>(flipped) / n;
    detail += "rho " + Fixed(rho, 1) + " -> " + Fixed(fraction) + " ";
    tally.Expect(std::abs(fraction - rho) <= 0.005, "rho " + Fixed(rho, 1) + " off by more than 0.005");
    tally.Expect(took < 10.0, "rho " + Fixed(rho, 1) + " took " + Fixed(took, 2) + " s");
  }
  return tally.Finish(detail + "(slowest " + Fixed(worst_time, 2) + " s)");
}

// --- 2 ----------------------------------------------------------------------

Outcome Morphology(const fs::path&) {
  Pcg32 rng = RngSubstream(31, "acceptance/morphology");
  Tally tally;
  double dilate_time = 0.0;
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = 1 + static_cast<int>(rng.NextIndex(64));
    const int h = 1 + static_cast<int>(rng.NextIndex(64));
    const BinaryMask m = testing::RandomBinaryMask(rng, w, h, 0.15 * rng.NextUniform01());
    for (int k : {1, 9, 15, 21}) {
      const auto start = std::chrono::steady_clock::now();
      const BinaryMask got = Dilate(m, DilationKernel(k));
      dilate_time += Seconds(start);
      tally.Expect(got == testing::NaiveDilate(m, k),
                   "mask " + std::to_string(trial) + " k " + std::to_string(k));
      ++compared;
    }
  }
  tally.Expect(dilate_time < 30.0, "dilation took " + Fixed(dilate_time, 2) + " s");
  return tally.Finish(std::to_string(compared) + " dilations exact, " + Fixed(dilate_time, 3) +
                      " s");
}

// --- 3 ----------------------------------------------------------------------

Outcome Severity(const fs::path& work) {
  SynthConfig c = SynthConfig::Default();
  c.n_clips = 100;
  c.seed = 33;
  const Dataset clean = SynthGenerate(c, work / "clean");
  Tally tally;
  tally.Expect(clean.PromptCount() >= 200, "corpus has only " + std::to_string(clean.PromptCount()) +
                                               " objects");
  std::vector<SeverityStats> stats;
  std::string detail = std::to_string(clean.PromptCount()) + " objects;";
  for (int k : {9, 15, 21}) {
    const Dataset noisy = CorruptDatasetMasks(clean, k, work / ("k" + std::to_string(k)));
    stats.push_back(ComputeSeverityStats(clean, noisy));
    detail += " k" + std::to_string(k) + " mIoU " + Fixed(stats.back().miou) + " cIoU " +
              Fixed(stats.back().ciou);
  }
  for (std::size_t i = 1; i < stats.size(); ++i) {
    tally.Expect(stats[i].miou < stats[i - 1].miou, "mIoU not strictly decreasing");
    tally.Expect(stats[i].ciou < stats[i - 1].ciou, "cIoU not strictly decreasing");
  }
  // A 4x6 object well inside the frame grows to 12x14 at k = 9.
  const BinaryMask rect = testing::FilledRect(32, 32, 12, 10, 4, 6);
  const SeverityStats r = ComputeSeverityStats({{Dilate(rect, DilationKernel(9)), rect}});
  tally.Expect(std::abs(r.miou - 1.0 / 7.0) <= 1e-12, "rectangle mIoU " + Fixed(r.miou, 15));
  return tally.Finish(detail + "; rectangle " + Fixed(r.miou, 12));
}

// --- 4 ----------------------------------------------------------------------

std::vector<EvalSample> RandomInstance(Pcg32& rng) {
  const int w = 1 + rng.NextIndex(32), h = 1 + rng.NextIndex(32);
  std::vector<EvalSample> s(1 + rng.NextIndex(8));
  for (auto& x : s) {
    x.gt_region = testing::RandomBinaryMask(rng, w, h, rng.NextUniform01() * 0.5);
    const double mode = rng.NextUniform01();
    if (mode < 0.2) {
      x.prediction = BinaryMask(w, h);
    } else {
      x.prediction = x.gt_region;
      for (auto& v : x.prediction.values) if (rng.NextUniform01() < mode * 0.5) v ^= 1;
    }
    x.active = rng.NextIndex(2) == 1;
  }
  return s;
}

Outcome MetricOracle(const fs::path&) {
  Pcg32 rng = RngSubstream(34, "acceptance/metrics");
  Tally tally;
  double worst = 0.0;
  auto compare = [&](const std::optional<double>& a, const std::optional<double>& b,
                     const std::string& what) {
    if (a.has_value() != b.has_value()) {
      tally.Expect(false, what + " partition presence differs");
      return;
    }
    if (!a) return;
    worst = std::max(worst, std::abs(*a - *b));
    tally.Expect(std::abs(*a - *b) <= 1e-12, what);
  };
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = RandomInstance(rng);
    const auto want = testing::BruteForceMetrics(s);
    const auto miou = PartitionedMiou(s);
    const auto ciou = PartitionedCiou(s);
    const std::string tag = "instance " + std::to_string(trial);
    compare(miou.positive, want.p_miou, tag + " p-mIoU");
    compare(miou.negative, want.n_miou, tag + " n-mIoU");
    compare(ciou.positive, want.p_ciou, tag + " p-cIoU");
    compare(ciou.negative, want.n_ciou, tag + " n-cIoU");
    compare(GeneralizedIou(s), want.giou, tag + " gIoU");
    std::vector<ObjectDecision> decisions(1 + rng.NextIndex(20));
    for (auto& d : decisions) d = {rng.NextIndex(2) == 1, rng.NextIndex(2) == 1};
    compare(Accuracy(decisions), testing::ConfusionAccuracy(decisions), tag + " Acc");
  }
  return tally.Finish("200 instances, largest difference " + Sci(worst));
}

// --- 5 ----------------------------------------------------------------------

using PixelLoss = std::function<LossValue(double p, double y)>;

std::vector<std::pair<std::string, PixelLoss>> AllLosses() {
  return {
      {"ce", [](double p, double y) { return CrossEntropy(p, y); }},
      {"rce", [](double p, double y) { return ReverseCrossEntropy(p, y); }},
      {"gce", [](double p, double y) { return Gce(p, y); }},
      {"sce", [](double p, double y) { return Sce(p, y); }},
      {"apl", [](double p, double y) { return Apl(p, y); }},
      {"focal", [](double p, double y) { return Focal(p, y); }},
      {"elr", [](double p, double y) { return ElrLoss(p, y, 0.3); }},
      {"npn_pll", [](double p, double y) { return NpnPartialLabel(p, static_cast<int>(y), 0.75); }},
      {"npn_nl", [](double p, double y) { return NpnNegative(p, y == 1.0 ? 2 : 0, y == 1.0 ? 0 : 2); }},
      {"npn_cr", [](double p, double y) { return NpnConsistency(p, static_cast<int>(y)); }},
  };
}

ProbabilityMap RandomMap(Pcg32& rng, int w, int h, double lo, double hi) {
  ProbabilityMap m(w, h);
  for (auto& v : m.values) v = lo + (hi - lo) * rng.NextUniform01();
  return m;
}

Outcome Gradients(const fs::path&) {
  Tally tally;
  double worst = 0.0;
  auto check = [&](double analytic, double numeric, double floor, const std::string& what) {
    const double rel = RelativeError(analytic, numeric, floor);
    worst = std::max(worst, rel);
    tally.Expect(rel <= 1e-6, what + " rel " + Sci(rel));
  };
  int checked = 0;
  for (const auto& [name, fn] : AllLosses()) {
    for (double y : {0.0, 1.0}) {
      for (double p : ProbabilityGrid()) {
        check(fn(p, y).grad, CentralDifference([&](double x) { return fn(x, y).value; }, p), 1e-8,
              name + " p=" + Fixed(p, 2));
        ++checked;
      }
    }
  }
  for (int y : {0, 1}) {
    for (double pw : ProbabilityGrid()) {
      for (double ps : {0.05, 0.4, 0.93}) {
        const NpnState state{3, 2};
        const NpnStep s = NpnStepPixel(pw, ps, y, state);
        check(s.grad_weak,
              CentralDifference([&](double x) { return NpnStepPixel(x, ps, y, state).value; }, pw),
              1e-8, "npn step weak");
        check(s.grad_strong,
              CentralDifference([&](double x) { return NpnStepPixel(pw, x, y, state).value; }, ps),
              1e-8, "npn step strong");
        checked += 2;
      }
    }
  }

  // Consistency losses on random maps, uncertain set held fixed.
  Pcg32 rng = RngSubstream(35, "acceptance/consistency");
  const PmhmParams params;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<HeadOutputs> frames(2);
    std::vector<ProbabilityMap> aux;
    std::vector<BinaryMask> u;
    for (auto& f : frames) {
      f.stages = {RandomMap(rng, 3, 3, 0.02, 0.98), RandomMap(rng, 3, 3, 0.02, 0.98),
                  RandomMap(rng, 3, 3, 0.02, 0.98)};
      aux.push_back(RandomMap(rng, 3, 3, 0.02, 0.98));
      u.push_back(testing::RandomBinaryMask(rng, 3, 3, 0.6));
    }
    auto mains = [&] {
      std::vector<ProbabilityMap> m;
      for (const auto& f : frames) m.push_back(f.main());
      return m;
    };
    auto perturbed = [&](double& slot, const std::function<double()>& loss) {
      return [&slot, loss](double x) {
        const double keep = slot;
        slot = x;
        const double v = loss();
        slot = keep;
        return v;
      };
    };
    const auto head_loss = [&] { return HeadConsistencyLoss(mains(), aux, u, params).value; };
    const auto layer_loss = [&] { return LayerConsistencyLoss(frames, u, params).value; };
    const HeadConsistency head = HeadConsistencyLoss(mains(), aux, u, params);
    const LayerConsistency layer = LayerConsistencyLoss(frames, u, params);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      for (std::size_t i = 0; i < u[t].size(); ++i) {
        double& pm = frames[t].stages.back().values[i];
        check(head.grad_main[t].values[i], CentralDifference(perturbed(pm, head_loss), pm), 1e-8,
              "L_head main");
        double& pa = aux[t].values[i];
        check(head.grad_aux[t].values[i], CentralDifference(perturbed(pa, head_loss), pa), 1e-8,
              "L_head aux");
        for (std::size_t l = 0; l < 3; ++l) {
          double& ps = frames[t].stages[l].values[i];
          check(layer.grad[t][l].values[i], CentralDifference(perturbed(ps, layer_loss), ps), 1e-8,
                "L_layer stage " + std::to_string(l));
        }
        checked += 5;
      }
    }
  }
  // The symmetric KL over the full grid needs the fourth-order stencil near
  // the ends and a unit scale on the diagonal, where both sides vanish.
  for (double p : ProbabilityGrid()) {
    for (double q : ProbabilityGrid()) {
      const SymKl kl = BernoulliSymKl(p, q);
      check(kl.d_p,
            testing::FivePointDifference([&](double x) { return BernoulliSymKl(x, q).value; }, p,
                                         1e-5),
            1e-3, "sym-KL d/dp");
      check(kl.d_q,
            testing::FivePointDifference([&](double x) { return BernoulliSymKl(p, x).value; }, q,
                                         1e-5),
            1e-3, "sym-KL d/dq");
      checked += 2;
    }
  }

  double model_worst = 0.0;
  for (uint64_t seed : {1u, 2u, 3u}) {
    const auto r = testing::ModelGradientCheck(seed);
    model_worst = std::max(model_worst, r.worst_relative);
    tally.Expect(r.worst_relative <= 1e-5,
                 "model seed " + std::to_string(seed) + " rel " + Sci(r.worst_relative));
  }
  return tally.Finish(std::to_string(checked) + " pixel derivatives (worst rel " +
                      Sci(worst) + "), model worst rel " + Sci(model_worst));
}

// --- 6 ----------------------------------------------------------------------

Outcome Schedules(const fs::path&) {
  Tally tally;
  const CoTeachSchedule s{0.6, 6.0, 0.95};
  tally.Expect(KeepRate(0, s) == 0.95, "keep_rate(0)");
  tally.Expect(std::abs(KeepRate(3, s) - 0.7) <= 1e-15, "keep_rate(3)");
  for (int n : {6, 7, 10, 100}) {
    tally.Expect(std::abs(KeepRate(n, s) - 0.4) <= 1e-15, "keep_rate(" + std::to_string(n) + ")");
  }
  Pcg32 rng = RngSubstream(36, "acceptance/small-loss");
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> losses(1 + rng.NextIndex(64));
    const bool coarse = trial % 2 == 0;  // coarse values force ties
    for (auto& v : losses) {
      v = coarse ? static_cast<double>(rng.NextIndex(6)) / 5.0 : rng.NextUniform01();
    }
    const double rate = 0.05 + 0.95 * rng.NextUniform01();
    const std::size_t m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(rate * static_cast<double>(losses.size()))));
    const auto got = SelectSmallLoss(losses, rate);
    auto want = testing::SortSmallest(losses, m);
    std::sort(want.begin(), want.end());
    tally.Expect(got.size() == m, "batch " + std::to_string(trial) + " cardinality");
    tally.Expect(std::is_sorted(got.begin(), got.end()), "batch " + std::to_string(trial) + " order");
    tally.Expect(got == want, "batch " + std::to_string(trial) + " selection");
  }
  return tally.Finish("keep rates 0.95/0.7/0.4; 1000 batches match the sort oracle");
}

// --- 7 ----------------------------------------------------------------------

Outcome StateLearners(const fs::path&) {
  Tally tally;
  double worst = 0.0;
  for (double p : {0.0, 0.2, 0.7, 1.0}) {
    for (double beta : {0.9, 0.5, 0.3}) {
      ElrParams params;
      params.beta = beta;
      ElrState state;
      for (int n = 1; n <= 50; ++n) {
        state = ElrStepPixel(p, 1.0, state, params).state;
        const double closed = p + std::pow(1.0 - beta, n) * (0.5 - p);
        worst = std::max(worst, std::abs(state.s - closed));
      }
    }
  }
  tally.Expect(worst <= 1e-12, "ELR EMA off by " + Sci(worst));

  Pcg32 rng = RngSubstream(37, "acceptance/npn");
  double w_min = 1.0, w_max = 0.0;
  for (int pixel = 0; pixel < 2000; ++pixel) {
    NpnState state;
    const int y = static_cast<int>(rng.NextIndex(2));
    for (int epoch = 0; epoch < 10; ++epoch) {
      const NpnStep s = NpnStepPixel(rng.NextUniform01(), rng.NextUniform01(), y, state);
      w_min = std::min(w_min, s.reliability);
      w_max = std::max(w_max, s.reliability);
      state = s.state;
    }
  }
  tally.Expect(w_min >= 0.5 && w_max <= 1.0, "reliability outside [0.5, 1]");
  for (int y : {0, 1}) {
    NpnState state;
    for (int epoch = 0; epoch < 20; ++epoch) {
      const NpnStep s = NpnStepPixel(y ? 0.9 : 0.1, y ? 0.8 : 0.2, y, state);
      tally.Expect(s.proxy_label == y && s.reliability == 1.0,
                   "persistent agreement lost at epoch " + std::to_string(epoch));
      state = s.state;
    }
  }
  return tally.Finish("EMA worst error " + Sci(worst) + "; w in [" + Fixed(w_min, 3) +
                      ", " + Fixed(w_max, 3) + "]");
}

// --- 8 ----------------------------------------------------------------------

Outcome PmhmIdentities(const fs::path&) {
  Tally tally;
  Pcg32 rng = RngSubstream(38, "acceptance/pmhm");
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const ProbabilityMap p = RandomMap(rng, 8, 8, 0.0, 1.0);
    const ProbabilityMap m[] = {p};
    const BinaryMask u[] = {BinaryMask(8, 8, uint8_t{1})};
    HeadOutputs h;
    h.stages = {p, p, p};
    const HeadOutputs f[] = {h};
    worst = std::max({worst, std::abs(HeadConsistencyLoss(m, m, u, PmhmParams{}).value),
                      std::abs(LayerConsistencyLoss(f, u, PmhmParams{}).value)});
  }
  tally.Expect(worst <= 1e-12, "identity losses reach " + Sci(worst));

  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + rng.NextIndex(24), h = 1 + rng.NextIndex(24);
    ProbabilityMap p = RandomMap(rng, w, h, 0.0, 1.0);
    for (auto& v : p.values) if (rng.NextUniform01() < 0.4) v = rng.NextIndex(2);
    tally.Expect(UncertaintyMask(p, PmhmParams{}) == testing::NaiveUncertainty(p, 0.2, 0.85),
                 "U_t differs on map " + std::to_string(trial));
  }

  // Same parameters, inference with and without the training-time head.
  ToyModel model({"cup", "knife", "plate"}, {"cut", "open"});
  model.Initialize(38);
  RgbImage image(9, 7);
  for (auto& v : image.rgb) v = static_cast<uint8_t>(rng.NextIndex(256));
  const FrameFeatures features = MakeFeatures(image);
  const PromptIds prompt = model.Encode("knife", "cut");
  const ProbabilityMap plain = model.Predict(features, prompt);
  Pcg32 dropout(39);
  tally.Expect(model.Forward(features, prompt, 0.1, &dropout).outputs.main().values == plain.values,
               "main head changes under auxiliary dropout");
  const auto [begin, end] = model.AuxParameterRange();
  for (std::size_t i = begin; i < end; ++i) model.parameters()[i] += 1.0;
  tally.Expect(model.Predict(features, prompt).values == plain.values,
               "main head depends on auxiliary parameters");
  return tally.Finish("identities <= " + Sci(worst) +
                      ", 200 uncertainty maps exact, inference bit-identical");
}

// --- 9 ----------------------------------------------------------------------

struct TrendSetup {
  Dataset eval;
  ClassMapping mapping;
  fs::path runs;
};

TrainConfig TrendConfig(Method method, uint64_t seed, const NoiseSetting& noise) {
  TrainConfig c;
  c.method = method;
  c.epochs = 12;
  c.lr = 0.3;
  c.seed = seed;
  c.noise = {noise.text_rate, noise.kernel, 7};
  // At q = 0.7 GCE underfits this model even on clean data.
  if (method == Method::kGce) c.gce.q = 0.4;
  // Cross-entropy-like hard loss on the confident pixels.
  if (method == Method::kPmhm) c.pmhm.hard_focal.gamma = 0.0;
  return c;
}

Outcome Trend(const fs::path& work) {
  SynthConfig train_synth = SynthConfig::Default();
  train_synth.seed = 101;
  SynthConfig eval_synth = train_synth;
  eval_synth.n_clips = 20;
  eval_synth.seed = 102;
  eval_synth.split = "eval";
  const Dataset clean = SynthGenerate(train_synth, work / "data/train");
  const Dataset eval = SynthGenerate(eval_synth, work / "data/eval");
  const ClassMapping mapping = train_synth.classes;

  Tally tally;
  double slowest = 0.0;
  auto run = [&](const Dataset& train, Method method, uint64_t seed, const NoiseSetting& noise) {
    const TrainConfig c = TrendConfig(method, seed, noise);
    const RunRecord r =
        TrainRun(train, eval, c, work / "runs" / RunName(MethodName(method), noise, seed));
    slowest = std::max(slowest, r.wall_seconds);
    tally.Expect(r.wall_seconds <= 300.0, RunName(MethodName(method), noise, seed) + " took " +
                                              Fixed(r.wall_seconds, 1) + " s");
    return *r.report;
  };

  // (a) text noise against clean training, same seed.
  const NoiseSetting text{0.6, 0};
  const Dataset text_noisy = MakeNoisyDataset(clean, mapping, text, 7, false, false,
                                              work / ("data/noise_" + text.Tag()));
  const MetricsReport a_clean = run(clean, Method::kBaseline, 1, {});
  const MetricsReport a_noisy = run(text_noisy, Method::kBaseline, 1, text);
  const double p_clean = a_clean.p_miou.value_or(0.0);
  const double p_noisy = a_noisy.p_miou.value_or(0.0);
  const double drop = p_clean > 0.0 ? (p_clean - p_noisy) / p_clean : 0.0;
  tally.Expect(drop >= 0.10, "text noise costs only " + Fixed(100.0 * drop, 1) + "% p-mIoU");
  std::string detail = "(a) p-mIoU " + Fixed(p_clean, 3) + " -> " + Fixed(p_noisy, 3) + " (-" +
                       Fixed(100.0 * drop, 1) + "%);";

  // (b) mask noise k = 21, five seeds.
  const NoiseSetting mask{0.0, 21};
  const Dataset mask_noisy = MakeNoisyDataset(clean, mapping, mask, 7, false, false,
                                              work / ("data/noise_" + mask.Tag()));
  std::map<Method, std::vector<double>> giou;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    for (Method m : {Method::kBaseline, Method::kGce, Method::kPmhm}) {
      giou[m].push_back(run(mask_noisy, m, seed, mask).giou);
    }
  }
  detail += " (b) gIoU by seed baseline";
  for (double g : giou[Method::kBaseline]) detail += " " + Fixed(g, 3);
  for (Method m : {Method::kGce, Method::kPmhm}) {
    int wins = 0;
    detail += std::string(", ") + MethodName(m);
    for (std::size_t s = 0; s < 5; ++s) {
      detail += " " + Fixed(giou[m][s], 3);
      wins += giou[m][s] > giou[Method::kBaseline][s];
    }
    detail += " (" + std::to_string(wins) + "/5 wins)";
    tally.Expect(wins >= 3, std::string(MethodName(m)) + " beats baseline in " +
                                std::to_string(wins) + " of 5 seeds");
  }
  return tally.Finish(detail + "; slowest run " + Fixed(slowest, 1) + " s");
}

// --- 10 ---------------------------------------------------------------------

std::map<std::string, std::string> Tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = ReadFileBytes(e.path());
  }
  return files;
}

Outcome Determinism(const fs::path& work) {
  const std::string config = R"({
    "synth": {"n_clips": 4, "frames_per_clip": 2, "width": 32, "height": 32,
              "min_size": 8, "max_size": 14, "seed": 10},
    "noise": [{"text_rate": 0.4, "kernel": 9}],
    "noise_seed": 3,
    "methods": ["baseline", "coteach", "elr", "npn", "pmhm"],
    "seeds": [1],
    "train": {"epochs": 2, "batch_size": 2}
  })";
  const ExperimentConfig c = ExperimentConfigFromJson(config);
  RunMatrix(c, work / "a", nullptr);
  RunMatrix(c, work / "b", nullptr);
  const auto a = Tree(work / "a");
  const auto b = Tree(work / "b");
  Tally tally;
  tally.Expect(a.size() == b.size(), "file sets differ");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      tally.Expect(false, name + " differs");
    }
  }
  tally.Expect(a.count("results.csv") == 1, "no results.csv");
  return tally.Finish(std::to_string(a.size()) + " files compared, " + std::to_string(differing) +
                      " differ");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const fs::path&)> run;
};

}  // namespace
}  // namespace noisyvos

int main(int argc, char** argv) {
  using namespace noisyvos;
  CLI::App app{"Acceptance checks"};
  std::filesystem::path work;
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory (recreated)")->required();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "flip-rate fidelity", FlipRate},
      {2, "morphology oracle", Morphology},
      {3, "severity monotonicity", Severity},
      {4, "metric oracle", MetricOracle},
      {5, "gradient suite", Gradients},
      {6, "schedule exactness", Schedules},
      {7, "state learners", StateLearners},
      {8, "PMHM identities", PmhmIdentities},
      {9, "directional robustness trend", Trend},
      {10, "determinism", Determinism},
  };
  std::filesystem::remove_all(work);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto dir = work / ("c" + std::to_string(c.id));
    std::filesystem::create_directories(dir);
    Outcome o;
    try {
      o = c.run(dir);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
