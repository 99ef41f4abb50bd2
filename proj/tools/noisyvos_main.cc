// SPDX-License-Identifier: Apache-2.0
// Command-line front end: synth, corrupt-text, corrupt-mask, train, eval,
// report, plot and matrix.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "noisyvos/dataset.h"
#include "noisyvos/errors.h"
#include "noisyvos/experiment.h"
#include "noisyvos/mask_noise.h"
#include "noisyvos/metrics.h"
#include "noisyvos/plot.h"
#include "noisyvos/pnm.h"
#include "noisyvos/synth.h"
#include "noisyvos/text_noise.h"
#include "noisyvos/train.h"

namespace fs = std::filesystem;
using namespace noisyvos;

namespace {

Dataset LoadDir(const fs::path& dir, const ClassMapping* mapping = nullptr) {
  return LoadManifest(dir / kManifestFile, mapping);
}

void Synth(const std::string& config_path, const fs::path& out, const std::optional<uint64_t>& seed,
           const std::optional<int>& clips, const std::optional<std::string>& split) {
  SynthConfig config = config_path.empty() ? SynthConfig::Default()
                                           : SynthConfigFromJson(ReadFileBytes(config_path));
  if (seed) config.seed = *seed;
  if (clips) config.n_clips = *clips;
  if (split) config.split = *split;
  const Dataset dataset = SynthGenerate(config, out);
  std::cout << "wrote " << dataset.clips.size() << " clips (" << dataset.PromptCount()
            << " prompts) to " << out.string() << "\n";
}

void CorruptText(const fs::path& in, const fs::path& out, double rate,
                 const fs::path& mapping_path, uint64_t seed, const std::string& report,
                 bool active_only) {
  const ClassMapping mapping = LoadClassMapping(mapping_path);
  const Dataset clean = LoadDir(in, &mapping);
  TextNoiseResult result = CorruptDatasetText(clean, rate, mapping, seed, active_only);
  const Dataset noisy = CopyDataset(result.dataset, out);
  SaveClassMapping(mapping, out / kClassesFile);
  WriteFileBytes(out / "text_provenance.jsonl", ProvenanceJsonLines(result.provenance));
  std::size_t flipped = 0;
  for (const auto& p : result.provenance) flipped += p.branch == TextNoiseBranch::kFlipped;
  const double fraction =
      result.provenance.empty() ? 0.0
                                : static_cast<double>(flipped) / result.provenance.size();
  if (!report.empty()) {
    nlohmann::ordered_json doc;
    doc["rate"] = rate;
    doc["seed"] = seed;
    doc["prompts"] = result.provenance.size();
    doc["flipped"] = flipped;
    doc["flip_fraction"] = fraction;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : ShiftReport(ComputeCategoryHistogram(clean),
                                       ComputeCategoryHistogram(noisy))) {
      rows.push_back({{"category", row.category},
                      {"clean", row.clean},
                      {"noisy", row.noisy},
                      {"delta", row.delta()}});
    }
    doc["shift"] = rows;
    WriteFileBytes(report, doc.dump(2) + "\n");
  }
  std::cout << "flipped " << flipped << " of " << result.provenance.size() << " prompts\n";
}

void CorruptMasks(const fs::path& in, const fs::path& out, int kernel, bool keep_negatives,
                  const std::string& severity) {
  const Dataset clean = LoadDir(in);
  const Dataset noisy = CorruptDatasetMasks(clean, kernel, out, keep_negatives);
  const SeverityStats stats = ComputeSeverityStats(clean, noisy);
  const fs::path path = severity.empty() ? out / "severity.json" : fs::path(severity);
  WriteFileBytes(path, SeverityJson(kernel, stats));
  std::printf("kernel %d: mIoU %.6f cIoU %.6f\n", kernel, stats.miou, stats.ciou);
}

void Train(const fs::path& data, const fs::path& eval, const fs::path& config_path,
           const fs::path& out) {
  const TrainConfig config = TrainConfigFromJson(ReadFileBytes(config_path));
  const Dataset train = LoadDir(data);
  const Dataset clean_eval = LoadDir(eval);
  const RunRecord record = TrainRun(train, clean_eval, config, out);
  for (const auto& e : record.epochs) std::printf("epoch %d loss %.6f\n", e.epoch, e.loss);
  const MetricsReport& r = *record.report;
  std::printf("gIoU %.6f Acc %.6f (%.1f s)\n", r.giou, r.acc, record.wall_seconds);
}

void Eval(const fs::path& data, const fs::path& preds, const fs::path& out) {
  const MetricsReport report = Evaluate(LoadDir(data), preds);
  WriteFileBytes(out, ReportJson(report));
  std::printf("gIoU %.6f Acc %.6f\n", report.giou, report.acc);
}

void Report(const fs::path& runs, const fs::path& out, const std::string& table) {
  const auto cells = CollectRuns(runs);
  WriteFileBytes(out, ResultsCsv(cells));
  if (!table.empty()) WriteFileBytes(table, TableCsv(cells));
  std::cout << "collected " << cells.size() << " runs\n";
}

void Plot(const fs::path& runs, const std::string& method, const std::string& axis,
          const fs::path& out) {
  const SweepAxis sweep = axis == "kernel" ? SweepAxis::kKernel : SweepAxis::kTextRate;
  WriteFileBytes(out, RenderSvg(SweepPlot(CollectRuns(runs), method, sweep)));
}

void Matrix(const fs::path& config_path, const fs::path& out) {
  const ExperimentConfig config = ExperimentConfigFromJson(ReadFileBytes(config_path));
  const auto cells = RunMatrix(config, out, &std::cout);
  std::size_t failed = 0;
  for (const auto& c : cells) failed += c.status != "ok";
  std::cout << cells.size() - failed << " cells ok, " << failed << " failed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-label robustness toolkit for text-conditioned video object segmentation"};
  app.require_subcommand(1);

  std::string in, out, config, mapping, report, data, eval, pred, table, method, axis = "text";
  double rate = 0.0;
  uint64_t seed = 0;
  int kernel = 0;
  bool active_only = false, keep_negatives = false;
  std::optional<uint64_t> synth_seed;
  std::optional<int> clips;
  std::optional<std::string> split;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic clip corpus");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--config", config, "SynthConfig JSON");
  synth->add_option("--seed", synth_seed, "Override the config seed");
  synth->add_option("--clips", clips, "Override the clip count")->check(CLI::PositiveNumber);
  synth->add_option("--split", split, "Override the split name");

  auto* text = app.add_subcommand("corrupt-text", "Flip and substitute prompt categories");
  text->add_option("--in", in, "Clean dataset directory")->required();
  text->add_option("--out", out, "Output directory")->required();
  text->add_option("--rate", rate, "Class-flip rate")->required()->check(CLI::Range(0.0, 1.0));
  text->add_option("--mapping", mapping, "Class mapping JSON")->required();
  text->add_option("--seed", seed, "Noise seed")->required();
  text->add_option("--report", report, "Write a flip and distribution-shift report");
  text->add_flag("--active-only", active_only, "Corrupt active objects only");

  auto* mask = app.add_subcommand("corrupt-mask", "Dilate active-object masks");
  mask->add_option("--in", in, "Clean dataset directory")->required();
  mask->add_option("--out", out, "Output directory")->required();
  mask->add_option("--kernel", kernel, "Kernel size")->required()->check(CLI::IsMember({0, 9, 15, 21}));
  mask->add_flag("--keep-negatives", keep_negatives, "Keep inactive-object ids in the masks");
  mask->add_option("--severity", report, "Severity JSON path (default OUT/severity.json)");

  auto* train = app.add_subcommand("train", "Train one run and evaluate it on clean data");
  train->add_option("--data", data, "Training dataset directory")->required();
  train->add_option("--eval", eval, "Clean evaluation dataset directory")->required();
  train->add_option("--config", config, "TrainConfig JSON")->required();
  train->add_option("--out", out, "Run directory")->required();

  auto* ev = app.add_subcommand("eval", "Score predictions against a dataset");
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--pred", pred, "Predictions directory")->required();
  ev->add_option("--out", out, "Report JSON path")->required();

  auto* rep = app.add_subcommand("report", "Collect run directories into CSV tables");
  rep->add_option("--runs", in, "Directory of run directories")->required();
  rep->add_option("--out", out, "Per-run CSV path")->required();
  rep->add_option("--table", table, "Seed-averaged table CSV path");

  auto* plot = app.add_subcommand("plot", "Render metric-vs-noise SVG charts");
  plot->add_option("--runs", in, "Directory of run directories")->required();
  plot->add_option("--method", method, "Method to plot")->required();
  plot->add_option("--axis", axis, "Sweep axis")->check(CLI::IsMember({"text", "kernel"}));
  plot->add_option("--out", out, "SVG path")->required();

  auto* matrix = app.add_subcommand("matrix", "Run an experiment matrix");
  matrix->add_option("--config", config, "Experiment JSON")->required();
  matrix->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) Synth(config, out, synth_seed, clips, split);
    if (text->parsed()) CorruptText(in, out, rate, mapping, seed, report, active_only);
    if (mask->parsed()) CorruptMasks(in, out, kernel, keep_negatives, report);
    if (train->parsed()) Train(data, eval, config, out);
    if (ev->parsed()) Eval(data, pred, out);
    if (rep->parsed()) Report(in, out, table);
    if (plot->parsed()) Plot(in, method, axis, out);
    if (matrix->parsed()) Matrix(config, out);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
