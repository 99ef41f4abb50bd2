// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_TRAIN_H_
#define NOISYVOS_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisyvos/dataset.h"
#include "noisyvos/losses.h"
#include "noisyvos/metrics.h"
#include "noisyvos/model.h"
#include "noisyvos/pmhm.h"

namespace noisyvos {

enum class Method { kBaseline, kFocal, kGce, kSce, kApl, kElr, kNpn, kCoteach, kPmhm };

const char* MethodName(Method method);
// Throws ArgumentError for names outside the supported set.
Method ParseMethod(const std::string& name);

// Where the training data came from; recorded, never acted on.
struct NoiseProvenance {
  double text_rate = 0.0;
  int kernel = 0;
  uint64_t seed = 0;
};

struct CoTeachParams {
  CoTeachSchedule schedule;
  bool rho_from_noise = true;  // rho defaults to the recorded text-noise rate
  std::optional<uint64_t> peer_seed;  // default: seed + 1
};

struct NpnViews {
  PhotometricJitter weak{0.05, 0.05, 0.01};
  PhotometricJitter strong{0.2, 0.3, 0.05};
};

struct TrainConfig {
  Method method = Method::kBaseline;
  int epochs = 6;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_size = 8;
  uint64_t seed = 0;
  NoiseProvenance noise;
  double divergence_limit = 1e6;

  FocalParams focal;
  GceParams gce;
  SceParams sce;
  AplParams apl;
  ElrParams elr;
  NpnParams npn;
  NpnViews npn_views;
  CoTeachParams coteach;
  PmhmParams pmhm;
  // Leading PMHM epochs trained with an empty uncertain set (hard loss on
  // every pixel), standing in for starting from a trained segmenter.
  int pmhm_warmup_epochs = 0;

  // Epoch default depends on the method (co-teaching trains longer).
  static int DefaultEpochs(Method method) { return method == Method::kCoteach ? 10 : 6; }
  CoTeachSchedule ResolvedSchedule() const;
  uint64_t PeerSeed() const { return coteach.peer_seed.value_or(seed + 1); }
  void Validate() const;
};

// Unknown keys are rejected so that typos do not silently fall back to defaults.
TrainConfig TrainConfigFromJson(const std::string& text);
// Fully resolved config, every field present.
std::string TrainConfigToJson(const TrainConfig& config);

struct StepLog {
  double loss = 0.0;  // batch mean
  std::map<std::string, double> terms;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;  // mean per-sample loss of the trained model
  std::map<std::string, double> terms;
  std::vector<StepLog> steps;
};

struct RunRecord {
  TrainConfig config;
  std::vector<EpochLog> epochs;
  std::optional<MetricsReport> report;
  double wall_seconds = 0.0;
};

struct TrainOutcome {
  ToyModel model;                   // evaluated model (A for co-teaching)
  std::optional<ToyModel> peer;     // B for co-teaching
  std::vector<EpochLog> epochs;
};

// Vocabularies for a dataset: sorted unique categories (class file and
// prompts) and sorted unique verbs.
ToyModel MakeModel(const Dataset& dataset);

// Trains in memory. Per-pixel learner state is round-tripped through
// `state_dir` after every epoch when it is non-empty. `on_epoch` runs after
// each epoch with the trained model(s).
using EpochCallback = std::function<void(int epoch, const TrainOutcome&)>;
TrainOutcome TrainModels(const Dataset& train, const TrainConfig& config,
                         const std::filesystem::path& state_dir = {},
                         const EpochCallback& on_epoch = {});

// Writes main-head probabilities for every (object, frame) of `dataset`.
void WritePredictions(const ToyModel& model, const Dataset& dataset,
                      const std::filesystem::path& preds_dir);

// Full run: config.json, checkpoints/, state/, preds/, report.json,
// log.jsonl (one line per step, then one per epoch) under `run_dir`. The report is computed on `clean_eval` only.
RunRecord TrainRun(const Dataset& train, const Dataset& clean_eval, const TrainConfig& config,
                   const std::filesystem::path& run_dir);

}  // namespace noisyvos

#endif  // NOISYVOS_TRAIN_H_
