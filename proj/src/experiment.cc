// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/experiment.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "json.hpp"
#include "noisyvos/errors.h"
#include "noisyvos/mask_noise.h"
#include "noisyvos/pnm.h"
#include "noisyvos/text_noise.h"

namespace noisyvos {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string Fixed(double v, const char* format = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string OptionalCell(const std::optional<double>& v, double scale, const char* format) {
  return v ? Fixed(*v * scale, format) : "";
}

std::optional<double> Mean(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

const std::vector<std::string> kExperimentKeys = {
    "synth", "eval_synth", "noise", "noise_seed", "active_only", "keep_negatives",
    "methods", "seeds", "train", "method_train", "params"};

}  // namespace

std::string NoiseSetting::Tag() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "t%.2f_k%d", text_rate, kernel);
  return buf;
}

ExperimentConfig ExperimentConfigFromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("experiment: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("experiment: expected an object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(kExperimentKeys.begin(), kExperimentKeys.end(), key) == kExperimentKeys.end()) {
      throw FormatError("experiment: unknown field '" + key + "'");
    }
  }
  ExperimentConfig c;
  try {
    c.train_synth = SynthConfigFromJson(doc.value("synth", json::object()).dump());
    if (doc.contains("eval_synth")) {
      c.eval_synth = SynthConfigFromJson(doc.at("eval_synth").dump(), c.train_synth);
    } else {
      c.eval_synth = c.train_synth;
      c.eval_synth.split = "eval";
      c.eval_synth.seed = c.train_synth.seed + 1;
    }
    if (c.eval_synth.split == c.train_synth.split && c.eval_synth.seed == c.train_synth.seed) {
      throw ValidationError("experiment: eval corpus must differ from the training corpus");
    }
    for (const auto& n : doc.value("noise", json::array({json::object()}))) {
      NoiseSetting s;
      s.text_rate = n.value("text_rate", 0.0);
      s.kernel = n.value("kernel", 0);
      if (!(s.text_rate >= 0.0 && s.text_rate <= 1.0)) {
        throw ArgumentError("experiment: text_rate must lie in [0, 1]");
      }
      if (!IsSupportedNoiseKernel(s.kernel)) {
        throw ArgumentError("experiment: kernel must be one of 0, 9, 15, 21");
      }
      c.noise.push_back(s);
    }
    c.noise_seed = doc.value("noise_seed", uint64_t{0});
    c.active_only = doc.value("active_only", false);
    c.keep_negatives = doc.value("keep_negatives", false);
    for (const auto& m : doc.value("methods", json::array({"baseline"}))) {
      c.methods.push_back(ParseMethod(m.get<std::string>()));
    }
    c.seeds = doc.value("seeds", std::vector<uint64_t>{0});
    json train = doc.value("train", json::object());
    for (const char* reserved : {"method", "seed", "noise", "params"}) {
      if (train.contains(reserved)) {
        throw FormatError(std::string("experiment: train may not set '") + reserved + "'");
      }
    }
    c.train_json = train.dump();
    if (doc.contains("method_train")) {
      for (const auto& [name, overrides] : doc.at("method_train").items()) {
        ParseMethod(name);
        json merged = train;
        merged.update(overrides);
        c.params["train:" + name] = merged.dump();
      }
    }
    if (doc.contains("params")) {
      for (const auto& [name, params] : doc.at("params").items()) {
        ParseMethod(name);
        c.params[name] = params.dump();
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("experiment: ") + e.what());
  }
  if (c.noise.empty() || c.methods.empty() || c.seeds.empty()) {
    throw ArgumentError("experiment: noise, methods and seeds must be non-empty");
  }
  for (Method m : c.methods) CellTrainConfig(c, m, c.noise.front(), c.seeds.front());
  return c;
}

TrainConfig CellTrainConfig(const ExperimentConfig& config, Method method,
                            const NoiseSetting& noise, uint64_t seed) {
  const std::string name = MethodName(method);
  const auto train_it = config.params.find("train:" + name);
  json doc = json::parse(train_it != config.params.end() ? train_it->second : config.train_json);
  doc["method"] = name;
  doc["seed"] = seed;
  doc["noise"] = {{"text_rate", noise.text_rate},
                  {"kernel", noise.kernel},
                  {"seed", config.noise_seed}};
  const auto it = config.params.find(name);
  if (it != config.params.end()) doc["params"] = json::parse(it->second);
  return TrainConfigFromJson(doc.dump());
}

Dataset MakeNoisyDataset(const Dataset& clean, const ClassMapping& mapping,
                         const NoiseSetting& noise, uint64_t seed, bool active_only,
                         bool keep_negatives, const fs::path& destination) {
  Dataset source = clean;
  std::string provenance;
  if (noise.text_rate > 0.0) {
    TextNoiseResult text = CorruptDatasetText(clean, noise.text_rate, mapping, seed, active_only);
    source = std::move(text.dataset);
    provenance = ProvenanceJsonLines(text.provenance);
  }
  // Copies frames from the clean root and writes the (possibly corrupted)
  // manifest; k = 0 keeps masks unchanged.
  Dataset noisy = CorruptDatasetMasks(source, noise.kernel, destination, keep_negatives);
  if (noise.text_rate > 0.0) WriteFileBytes(destination / "text_provenance.jsonl", provenance);
  return noisy;
}

std::string RunName(const std::string& method, const NoiseSetting& noise, uint64_t seed) {
  return method + "__" + noise.Tag() + "__s" + std::to_string(seed);
}

std::vector<CellResult> RunMatrix(const ExperimentConfig& config, const fs::path& out,
                                  std::ostream* progress) {
  fs::create_directories(out);
  const Dataset train = SynthGenerate(config.train_synth, out / "data" / "train");
  const Dataset eval = SynthGenerate(config.eval_synth, out / "data" / "eval");
  std::vector<CellResult> cells;
  std::string failures;
  auto fail = [&](CellResult cell, const std::string& error) {
    cell.status = "failed";
    cell.error = error;
    json line = {{"run", RunName(cell.method, cell.noise, cell.seed)},
                 {"method", cell.method},
                 {"text_rate", cell.noise.text_rate},
                 {"kernel", cell.noise.kernel},
                 {"seed", cell.seed},
                 {"error", error}};
    failures += line.dump() + "\n";
    if (progress) *progress << "FAILED " << line["run"].get<std::string>() << ": " << error << "\n";
    cells.push_back(std::move(cell));
  };

  for (const auto& noise : config.noise) {
    std::optional<Dataset> noisy;
    std::string noise_error;
    try {
      noisy = noise.Clean() ? train
                            : MakeNoisyDataset(train, config.train_synth.classes, noise,
                                               config.noise_seed, config.active_only,
                                               config.keep_negatives,
                                               out / "data" / ("noise_" + noise.Tag()));
    } catch (const std::exception& e) {
      noise_error = std::string("corruption failed: ") + e.what();
    }
    for (Method method : config.methods) {
      for (uint64_t seed : config.seeds) {
        CellResult cell{MethodName(method), noise, seed, "ok", std::nullopt, ""};
        if (!noisy) {
          fail(std::move(cell), noise_error);
          continue;
        }
        const std::string name = RunName(cell.method, noise, seed);
        try {
          const auto start = std::chrono::steady_clock::now();
          const TrainConfig train_config = CellTrainConfig(config, method, noise, seed);
          RunRecord record = TrainRun(*noisy, eval, train_config, out / "runs" / name);
          cell.report = std::move(record.report);
          if (progress) {
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            *progress << name << ": gIoU " << Fixed(cell.report->giou, "%.4f") << " ("
                      << Fixed(seconds, "%.1f") << " s)\n";
          }
          cells.push_back(std::move(cell));
        } catch (const std::exception& e) {
          fail(std::move(cell), e.what());
        }
      }
    }
  }
  WriteFileBytes(out / "failures.jsonl", failures);
  WriteFileBytes(out / "results.csv", ResultsCsv(cells));
  WriteFileBytes(out / "table.csv", TableCsv(cells));
  return cells;
}

std::vector<CellResult> CollectRuns(const fs::path& runs_root) {
  if (!fs::is_directory(runs_root)) {
    throw ArgumentError("report: " + runs_root.string() + " is not a directory");
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_root)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "config.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<CellResult> cells;
  for (const auto& dir : dirs) {
    const TrainConfig c = TrainConfigFromJson(ReadFileBytes(dir / "config.json"));
    CellResult cell{MethodName(c.method), {c.noise.text_rate, c.noise.kernel}, c.seed, "ok",
                    std::nullopt, ""};
    if (fs::is_regular_file(dir / "report.json")) {
      cell.report = ParseReportJson(ReadFileBytes(dir / "report.json"));
    } else {
      cell.status = "failed";
      cell.error = "missing report.json";
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string ResultsCsv(const std::vector<CellResult>& cells) {
  std::string out = "method,text_rate,kernel,seed,p_miou,n_miou,p_ciou,n_ciou,giou,acc,status\n";
  for (const auto& c : cells) {
    out += c.method + "," + Fixed(c.noise.text_rate, "%.2f") + "," + std::to_string(c.noise.kernel) +
           "," + std::to_string(c.seed) + ",";
    if (c.report) {
      const MetricsReport& r = *c.report;
      out += OptionalCell(r.p_miou, 1.0, "%.6f") + "," + OptionalCell(r.n_miou, 1.0, "%.6f") +
             "," + OptionalCell(r.p_ciou, 1.0, "%.6f") + "," +
             OptionalCell(r.n_ciou, 1.0, "%.6f") + "," + Fixed(r.giou) + "," + Fixed(r.acc);
    } else {
      out += ",,,,,";
    }
    out += "," + c.status + "\n";
  }
  return out;
}

std::string TableCsv(const std::vector<CellResult>& cells) {
  std::vector<std::pair<std::string, std::vector<const MetricsReport*>>> rows;
  for (const auto& c : cells) {
    const std::string label = c.method + " (text " + Fixed(c.noise.text_rate, "%.2f") +
                              " kernel " + std::to_string(c.noise.kernel) + ")";
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&label](const auto& row) { return row.first == label; });
    if (it == rows.end()) {
      rows.push_back({label, {}});
      it = rows.end() - 1;
    }
    if (c.report) it->second.push_back(&*c.report);
  }
  std::string out = "method,p-mIoU,n-mIoU,p-cIoU,n-cIoU,gIoU,Acc\n";
  for (const auto& [label, reports] : rows) {
    std::vector<std::optional<double>> pm, nm, pc, nc, gi, ac;
    for (const MetricsReport* r : reports) {
      pm.push_back(r->p_miou);
      nm.push_back(r->n_miou);
      pc.push_back(r->p_ciou);
      nc.push_back(r->n_ciou);
      gi.push_back(r->giou);
      ac.push_back(r->acc);
    }
    out += label;
    for (const auto* column : {&pm, &nm, &pc, &nc, &gi, &ac}) {
      out += "," + OptionalCell(Mean(*column), 100.0, "%.2f");
    }
    out += "\n";
  }
  return out;
}

}  // namespace noisyvos
