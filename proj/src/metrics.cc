// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/metrics.h"

#include "json.hpp"
#include "noisyvos/errors.h"
#include "noisyvos/pixel_state.h"
#include "noisyvos/pnm.h"

namespace noisyvos {
namespace fs = std::filesystem;

Overlap ComputeOverlap(const BinaryMask& prediction, const BinaryMask& truth) {
  if (!prediction.SameShape(truth)) throw ArgumentError("iou: dimension mismatch");
  Overlap o;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = prediction.values[i] != 0;
    const bool g = truth.values[i] != 0;
    o.intersection += p && g;
    o.union_ += p || g;
    o.predicted += p;
  }
  return o;
}

double Iou(const BinaryMask& prediction, const BinaryMask& truth) {
  return ComputeOverlap(prediction, truth).Iou();
}

namespace {

std::optional<double> Mean(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> Cumulative(uint64_t inter, uint64_t uni, std::size_t n) {
  if (n == 0) return std::nullopt;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Overlap> Overlaps(const std::vector<EvalSample>& samples) {
  std::vector<Overlap> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(ComputeOverlap(s.prediction, s.gt_region));
  return out;
}

PartitionedValue MiouFrom(const std::vector<bool>& active, const std::vector<Overlap>& o) {
  double pos = 0.0, neg = 0.0;
  std::size_t np = 0, nn = 0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (active[i]) {
      pos += o[i].Iou();
      ++np;
    } else {
      neg += o[i].Iou();
      ++nn;
    }
  }
  return {Mean(pos, np), Mean(neg, nn)};
}

PartitionedValue CiouFrom(const std::vector<bool>& active, const std::vector<Overlap>& o) {
  uint64_t pi = 0, pu = 0, ni = 0, nu = 0;
  std::size_t np = 0, nn = 0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (active[i]) {
      pi += o[i].intersection;
      pu += o[i].union_;
      ++np;
    } else {
      ni += o[i].intersection;
      nu += o[i].union_;
      ++nn;
    }
  }
  return {Cumulative(pi, pu, np), Cumulative(ni, nu, nn)};
}

double GiouFrom(const std::vector<bool>& active, const std::vector<Overlap>& o) {
  if (o.empty()) throw ArgumentError("giou: no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    sum += active[i] ? o[i].Iou() : (o[i].predicted == 0 ? 1.0 : 0.0);
  }
  return sum / static_cast<double>(o.size());
}

std::vector<bool> ActiveFlags(const std::vector<EvalSample>& samples) {
  std::vector<bool> flags;
  flags.reserve(samples.size());
  for (const auto& s : samples) flags.push_back(s.active);
  return flags;
}

}  // namespace

PartitionedValue PartitionedMiou(const std::vector<EvalSample>& samples) {
  return MiouFrom(ActiveFlags(samples), Overlaps(samples));
}

PartitionedValue PartitionedCiou(const std::vector<EvalSample>& samples) {
  return CiouFrom(ActiveFlags(samples), Overlaps(samples));
}

double GeneralizedIou(const std::vector<EvalSample>& samples) {
  return GiouFrom(ActiveFlags(samples), Overlaps(samples));
}

double Accuracy(const std::vector<ObjectDecision>& decisions) {
  if (decisions.empty()) throw ArgumentError("accuracy: no object decisions");
  std::size_t correct = 0;
  for (const auto& d : decisions) correct += d.predicted_active == d.active;
  return static_cast<double>(correct) / static_cast<double>(decisions.size());
}

bool DecideActive(const std::vector<ProbabilityMap>& probabilities,
                  const std::vector<BinaryMask>& regions) {
  if (probabilities.size() != regions.size()) {
    throw ArgumentError("decide_active: frame count mismatch");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < regions.size(); ++f) {
    if (!probabilities[f].SameShape(regions[f])) {
      throw ArgumentError("decide_active: dimension mismatch");
    }
    for (std::size_t i = 0; i < regions[f].size(); ++i) {
      if (regions[f].values[i] != 0) {
        sum += probabilities[f].values[i];
        ++n;
      }
    }
  }
  if (n == 0) throw ArgumentError("decide_active: empty region");
  return sum / static_cast<double>(n) > 0.5;
}

bool DecideActive(const ProbabilityMap& probabilities, const BinaryMask& region) {
  return DecideActive(std::vector<ProbabilityMap>{probabilities},
                      std::vector<BinaryMask>{region});
}

BinaryMask Threshold(const ProbabilityMap& probabilities, double threshold) {
  BinaryMask out(probabilities.width, probabilities.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = probabilities.values[i] > threshold ? 1 : 0;
  }
  return out;
}

MetricsReport BuildReport(const std::vector<EvalSample>& samples,
                          const std::vector<ObjectDecision>& decisions) {
  const std::vector<bool> active = ActiveFlags(samples);
  const std::vector<Overlap> overlaps = Overlaps(samples);
  MetricsReport report;
  const PartitionedValue miou = MiouFrom(active, overlaps);
  const PartitionedValue ciou = CiouFrom(active, overlaps);
  report.p_miou = miou.positive;
  report.n_miou = miou.negative;
  report.p_ciou = ciou.positive;
  report.n_ciou = ciou.negative;
  report.giou = GiouFrom(active, overlaps);
  report.acc = Accuracy(decisions);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (active[i] ? report.positive_samples : report.negative_samples) += 1;
    report.samples.push_back({samples[i].clip_id, samples[i].object_id,
                              samples[i].frame_id, active[i], overlaps[i]});
  }
  return report;
}

fs::path PredictionPath(const fs::path& root, const std::string& clip_id, int object_id,
                        const std::string& frame_id) {
  return root / clip_id / ("obj" + std::to_string(object_id) + "_" + frame_id + ".prob");
}

MetricsReport Evaluate(const Dataset& dataset, const fs::path& predictions) {
  std::vector<EvalSample> samples;
  std::vector<ObjectDecision> decisions;
  for (const auto& clip : dataset.clips) {
    std::vector<LabelMask> masks;
    for (const auto& frame : clip.frames) masks.push_back(ReadMask(dataset.MaskPath(frame)));
    for (const auto& object : clip.objects) {
      std::vector<ProbabilityMap> maps;
      std::vector<BinaryMask> regions;
      for (std::size_t f = 0; f < clip.frames.size(); ++f) {
        const fs::path path =
            PredictionPath(predictions, clip.clip_id, object.object_id, clip.frames[f].frame_id);
        if (!fs::is_regular_file(path)) {
          throw ValidationError("eval: missing prediction for clip '" + clip.clip_id +
                                "' object " + std::to_string(object.object_id) + " frame '" +
                                clip.frames[f].frame_id + "' (" + path.string() + ")");
        }
        ProbabilityMap map = ReadProbabilityMap(path);
        BinaryMask region = Binarize(masks[f], object.object_id);
        if (!map.SameShape(region)) {
          throw ValidationError("eval: prediction " + path.string() +
                                " does not match the mask dimensions");
        }
        samples.push_back({clip.clip_id, object.object_id, clip.frames[f].frame_id,
                           Threshold(map), region, object.active});
        maps.push_back(std::move(map));
        regions.push_back(std::move(region));
      }
      try {
        decisions.push_back({DecideActive(maps, regions), object.active});
      } catch (const ArgumentError&) {
        throw ValidationError("eval: clip '" + clip.clip_id + "' object " +
                              std::to_string(object.object_id) +
                              " has an empty annotated region in every frame");
      }
    }
  }
  return BuildReport(samples, decisions);
}

namespace {

nlohmann::ordered_json OptionalNumber(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> ReadOptional(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

std::string ReportJson(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["p_miou"] = OptionalNumber(report.p_miou);
  doc["n_miou"] = OptionalNumber(report.n_miou);
  doc["p_ciou"] = OptionalNumber(report.p_ciou);
  doc["n_ciou"] = OptionalNumber(report.n_ciou);
  doc["giou"] = report.giou;
  doc["acc"] = report.acc;
  auto samples = nlohmann::ordered_json::array();
  for (const auto& s : report.samples) {
    nlohmann::ordered_json row;
    row["clip_id"] = s.clip_id;
    row["object_id"] = s.object_id;
    row["frame_id"] = s.frame_id;
    row["active"] = s.active;
    row["intersection"] = s.overlap.intersection;
    row["union"] = s.overlap.union_;
    row["predicted"] = s.overlap.predicted;
    row["iou"] = s.overlap.Iou();
    samples.push_back(std::move(row));
  }
  doc["samples"] = std::move(samples);
  return doc.dump(2) + "\n";
}

MetricsReport ParseReportJson(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    MetricsReport report;
    report.p_miou = ReadOptional(doc, "p_miou");
    report.n_miou = ReadOptional(doc, "n_miou");
    report.p_ciou = ReadOptional(doc, "p_ciou");
    report.n_ciou = ReadOptional(doc, "n_ciou");
    report.giou = doc.at("giou").get<double>();
    report.acc = doc.at("acc").get<double>();
    for (const auto& row : doc.at("samples")) {
      SampleScore s;
      s.clip_id = row.at("clip_id").get<std::string>();
      s.object_id = row.at("object_id").get<int>();
      s.frame_id = row.at("frame_id").get<std::string>();
      s.active = row.at("active").get<bool>();
      s.overlap.intersection = row.at("intersection").get<uint64_t>();
      s.overlap.union_ = row.at("union").get<uint64_t>();
      s.overlap.predicted = row.at("predicted").get<uint64_t>();
      (s.active ? report.positive_samples : report.negative_samples) += 1;
      report.samples.push_back(std::move(s));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

}  // namespace noisyvos
