// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_EXPERIMENT_H_
#define NOISYVOS_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisyvos/dataset.h"
#include "noisyvos/metrics.h"
#include "noisyvos/synth.h"
#include "noisyvos/train.h"

namespace noisyvos {

struct NoiseSetting {
  double text_rate = 0.0;
  int kernel = 0;

  // "t0.60_k21"
  std::string Tag() const;
  bool Clean() const { return text_rate == 0.0 && kernel == 0; }
};

struct ExperimentConfig {
  SynthConfig train_synth;
  SynthConfig eval_synth;
  std::vector<NoiseSetting> noise;
  uint64_t noise_seed = 0;
  bool active_only = false;
  bool keep_negatives = false;
  std::vector<Method> methods;
  std::vector<uint64_t> seeds;
  std::string train_json = "{}";             // shared TrainConfig fields
  std::map<std::string, std::string> params;  // method name -> params object (JSON)
};

// Keys: synth, eval_synth, noise [{text_rate, kernel}], noise_seed,
// active_only, keep_negatives, methods, seeds, train, params {method: {...}}.
// eval_synth defaults to synth with split "eval" and seed + 1.
ExperimentConfig ExperimentConfigFromJson(const std::string& text);

// Training config of one matrix cell.
TrainConfig CellTrainConfig(const ExperimentConfig& config, Method method,
                            const NoiseSetting& noise, uint64_t seed);

// Text corruption (rate > 0) followed by mask corruption, written under
// `destination` together with text_provenance.jsonl when text was corrupted.
Dataset MakeNoisyDataset(const Dataset& clean, const ClassMapping& mapping,
                         const NoiseSetting& noise, uint64_t seed, bool active_only,
                         bool keep_negatives, const std::filesystem::path& destination);

struct CellResult {
  std::string method;
  NoiseSetting noise;
  uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "failed"
  std::optional<MetricsReport> report;
  std::string error;
};

std::string RunName(const std::string& method, const NoiseSetting& noise, uint64_t seed);

// Generates the corpora, then corrupts, trains and evaluates every
// (noise, method, seed) cell under out/runs. A failing cell is recorded in
// failures.jsonl and the matrix continues. Writes results.csv and table.csv.
std::vector<CellResult> RunMatrix(const ExperimentConfig& config,
                                  const std::filesystem::path& out, std::ostream* progress);

// Reads config.json and report.json of every run directory below `runs_root`
// (sorted by directory name). Runs without a report are marked failed.
std::vector<CellResult> CollectRuns(const std::filesystem::path& runs_root);

// One row per cell: method,text_rate,kernel,seed,<six metrics>,status.
std::string ResultsCsv(const std::vector<CellResult>& cells);
// One row per (method, noise) averaged over successful seeds:
// method,p-mIoU,n-mIoU,p-cIoU,n-cIoU,gIoU,Acc. Values in percent.
std::string TableCsv(const std::vector<CellResult>& cells);

}  // namespace noisyvos

#endif  // NOISYVOS_EXPERIMENT_H_
