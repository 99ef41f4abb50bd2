// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "noisyvos/errors.h"
#include "noisyvos/pixel_state.h"
#include "noisyvos/pnm.h"

namespace noisyvos {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::kBaseline, "baseline"}, {Method::kFocal, "focal"}, {Method::kGce, "gce"},
    {Method::kSce, "sce"},           {Method::kApl, "apl"},     {Method::kElr, "elr"},
    {Method::kNpn, "npn"},           {Method::kCoteach, "coteach"}, {Method::kPmhm, "pmhm"},
};

// Reads known keys from an object and rejects the rest.
class Reader {
 public:
  Reader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw FormatError(where_ + ": expected an object");
  }
  template <typename T>
  void Read(const char* key, T& field) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      field = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw FormatError(where_ + ": field '" + key + "' has the wrong type");
    }
  }
  const json* Child(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }
  void Finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw FormatError(where_ + ": unknown field '" + key + "'");
    }
  }

 private:
  const json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

void ReadJitter(const json& doc, const std::string& where, PhotometricJitter& j) {
  Reader r(doc, where);
  r.Read("brightness", j.brightness);
  r.Read("contrast", j.contrast);
  r.Read("noise", j.noise);
  r.Finish();
}

ordered_json JitterJson(const PhotometricJitter& j) {
  return {{"brightness", j.brightness}, {"contrast", j.contrast}, {"noise", j.noise}};
}

void ReadParams(const json& doc, TrainConfig& c) {
  Reader r(doc, "train config params");
  switch (c.method) {
    case Method::kBaseline:
      break;
    case Method::kFocal:
      r.Read("alpha", c.focal.alpha);
      r.Read("gamma", c.focal.gamma);
      break;
    case Method::kGce:
      r.Read("q", c.gce.q);
      break;
    case Method::kSce:
      r.Read("alpha", c.sce.alpha);
      r.Read("beta", c.sce.beta);
      r.Read("log_zero", c.sce.log_zero);
      break;
    case Method::kApl:
      r.Read("q", c.apl.q);
      r.Read("w_active", c.apl.w_active);
      r.Read("w_passive", c.apl.w_passive);
      break;
    case Method::kElr: {
      r.Read("beta", c.elr.beta);
      r.Read("epsilon", c.elr.epsilon);
      r.Read("lambda", c.elr.lambda);
      r.Read("focal_alpha", c.elr.focal.alpha);
      r.Read("focal_gamma", c.elr.focal.gamma);
      std::string sign = c.elr.sign == ElrSign::kPublished ? "published" : "original";
      r.Read("sign", sign);
      if (sign == "published") {
        c.elr.sign = ElrSign::kPublished;
      } else if (sign == "original") {
        c.elr.sign = ElrSign::kOriginal;
      } else {
        throw FormatError("train config params: 'sign' must be \"published\" or \"original\"");
      }
      break;
    }
    case Method::kNpn:
      r.Read("alpha", c.npn.alpha);
      r.Read("beta", c.npn.beta);
      if (const json* weak = r.Child("weak")) ReadJitter(*weak, "params.weak", c.npn_views.weak);
      if (const json* strong = r.Child("strong")) {
        ReadJitter(*strong, "params.strong", c.npn_views.strong);
      }
      break;
    case Method::kCoteach: {
      if (doc.contains("rho")) {
        r.Read("rho", c.coteach.schedule.rho);
        c.coteach.rho_from_noise = false;
      }
      r.Read("rho", c.coteach.schedule.rho);
      r.Read("t_k", c.coteach.schedule.t_k);
      r.Read("cap", c.coteach.schedule.cap);
      if (doc.contains("peer_seed")) {
        uint64_t peer = 0;
        r.Read("peer_seed", peer);
        c.coteach.peer_seed = peer;
      }
      r.Child("peer_seed");
      break;
    }
    case Method::kPmhm:
      r.Read("tau_m", c.pmhm.tau_m);
      r.Read("tau_e", c.pmhm.tau_e);
      r.Read("lambda_head", c.pmhm.lambda_head);
      r.Read("lambda_layer", c.pmhm.lambda_layer);
      r.Read("kl_epsilon", c.pmhm.kl_epsilon);
      r.Read("dropout", c.pmhm.dropout);
      r.Read("freeze0", c.pmhm.freeze0);
      r.Read("hard_dice", c.pmhm.hard_dice);
      r.Read("hard_on_aux", c.pmhm.hard_on_aux);
      r.Read("focal_alpha", c.pmhm.hard_focal.alpha);
      r.Read("focal_gamma", c.pmhm.hard_focal.gamma);
      r.Read("warmup_epochs", c.pmhm_warmup_epochs);
      break;
  }
  r.Finish();
}

ordered_json ParamsJson(const TrainConfig& c) {
  ordered_json p = ordered_json::object();
  switch (c.method) {
    case Method::kBaseline:
      break;
    case Method::kFocal:
      p["alpha"] = c.focal.alpha;
      p["gamma"] = c.focal.gamma;
      break;
    case Method::kGce:
      p["q"] = c.gce.q;
      break;
    case Method::kSce:
      p["alpha"] = c.sce.alpha;
      p["beta"] = c.sce.beta;
      p["log_zero"] = c.sce.log_zero;
      break;
    case Method::kApl:
      p["q"] = c.apl.q;
      p["w_active"] = c.apl.w_active;
      p["w_passive"] = c.apl.w_passive;
      break;
    case Method::kElr:
      p["beta"] = c.elr.beta;
      p["epsilon"] = c.elr.epsilon;
      p["lambda"] = c.elr.lambda;
      p["focal_alpha"] = c.elr.focal.alpha;
      p["focal_gamma"] = c.elr.focal.gamma;
      p["sign"] = c.elr.sign == ElrSign::kPublished ? "published" : "original";
      break;
    case Method::kNpn:
      p["alpha"] = c.npn.alpha;
      p["beta"] = c.npn.beta;
      p["weak"] = JitterJson(c.npn_views.weak);
      p["strong"] = JitterJson(c.npn_views.strong);
      break;
    case Method::kCoteach: {
      const CoTeachSchedule s = c.ResolvedSchedule();
      p["rho"] = s.rho;
      p["t_k"] = s.t_k;
      p["cap"] = s.cap;
      p["peer_seed"] = c.PeerSeed();
      break;
    }
    case Method::kPmhm:
      p["tau_m"] = c.pmhm.tau_m;
      p["tau_e"] = c.pmhm.tau_e;
      p["lambda_head"] = c.pmhm.lambda_head;
      p["lambda_layer"] = c.pmhm.lambda_layer;
      p["kl_epsilon"] = c.pmhm.kl_epsilon;
      p["dropout"] = c.pmhm.dropout;
      p["freeze0"] = c.pmhm.freeze0;
      p["hard_dice"] = c.pmhm.hard_dice;
      p["hard_on_aux"] = c.pmhm.hard_on_aux;
      p["focal_alpha"] = c.pmhm.hard_focal.alpha;
      p["focal_gamma"] = c.pmhm.hard_focal.gamma;
      p["warmup_epochs"] = c.pmhm_warmup_epochs;
      break;
  }
  return p;
}

// --- prepared data -----------------------------------------------------------

struct PreparedSample {
  std::size_t clip = 0;
  std::string clip_id;
  int object_id = 0;
  PromptIds prompt;
  std::vector<BinaryMask> targets;  // one per frame; zeros for inactive objects
};

struct PreparedData {
  std::vector<std::vector<FrameFeatures>> frames;  // [clip][frame]
  std::vector<PreparedSample> samples;
};

PreparedData Prepare(const Dataset& dataset, const ToyModel& model) {
  PreparedData data;
  for (std::size_t c = 0; c < dataset.clips.size(); ++c) {
    const Clip& clip = dataset.clips[c];
    auto& features = data.frames.emplace_back();
    std::vector<LabelMask> masks;
    for (const auto& frame : clip.frames) {
      features.push_back(MakeFeatures(ReadImage(dataset.ImagePath(frame))));
      masks.push_back(ReadMask(dataset.MaskPath(frame)));
    }
    for (const auto& object : clip.objects) {
      PreparedSample s;
      s.clip = c;
      s.clip_id = clip.clip_id;
      s.object_id = object.object_id;
      s.prompt = model.Encode(object);
      for (const auto& mask : masks) {
        s.targets.push_back(object.active ? Binarize(mask, object.object_id)
                                          : BinaryMask(mask.width, mask.height));
      }
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

// Per-pixel learner state, one array per (sample, frame).
struct LearnerState {
  std::vector<std::vector<std::vector<double>>> elr;    // [sample][frame][pixel]
  std::vector<std::vector<std::vector<NpnState>>> npn;  // [sample][frame][pixel]
};

LearnerState InitState(const PreparedData& data, Method method) {
  LearnerState state;
  for (const auto& s : data.samples) {
    if (method == Method::kElr) {
      auto& frames = state.elr.emplace_back();
      for (const auto& t : s.targets) frames.emplace_back(t.size(), ElrState{}.s);
    } else if (method == Method::kNpn) {
      auto& frames = state.npn.emplace_back();
      for (const auto& t : s.targets) frames.emplace_back(t.size());
    }
  }
  return state;
}

fs::path StatePath(const fs::path& dir, const char* kind, const PreparedSample& s,
                   const char* ext) {
  return dir / kind / s.clip_id / ("obj" + std::to_string(s.object_id) + ext);
}

// EMA targets are stored at single precision; the round trip is applied with
// or without a state directory so both paths train identically.
void PersistState(LearnerState& state, const PreparedData& data, const fs::path& dir) {
  for (std::size_t i = 0; i < state.elr.size(); ++i) {
    const auto& s = data.samples[i];
    const int frames = static_cast<int>(s.targets.size());
    FloatArray array{s.targets[0].width, s.targets[0].height, frames, {}};
    for (const auto& f : state.elr[i]) {
      for (double v : f) array.values.push_back(static_cast<float>(v));
    }
    if (!dir.empty()) {
      const fs::path path = StatePath(dir, "elr", s, ".state");
      WriteFileBytes(path, EncodeFloatArray(kElrStateMagic, array));
      array = DecodeFloatArray(kElrStateMagic, ReadFileBytes(path));
    }
    std::size_t at = 0;
    for (auto& f : state.elr[i]) {
      for (double& v : f) v = array.values[at++];
    }
  }
  if (dir.empty()) return;
  for (std::size_t i = 0; i < state.npn.size(); ++i) {
    const auto& s = data.samples[i];
    const int frames = static_cast<int>(s.targets.size());
    CountArray array{s.targets[0].width, s.targets[0].height, 2 * frames, {}};
    for (const auto& f : state.npn[i]) {
      for (const NpnState& v : f) array.values.push_back(v.m1);
    }
    for (const auto& f : state.npn[i]) {
      for (const NpnState& v : f) array.values.push_back(v.m0);
    }
    const fs::path path = StatePath(dir, "npn", s, ".counts");
    WriteFileBytes(path, EncodeCountArray(kNpnStateMagic, array));
    array = DecodeCountArray(kNpnStateMagic, ReadFileBytes(path));
    const std::size_t half = array.values.size() / 2;
    std::size_t at = 0;
    for (auto& f : state.npn[i]) {
      for (NpnState& v : f) {
        v.m1 = array.values[at];
        v.m0 = array.values[half + at];
        ++at;
      }
    }
  }
}

// --- per-sample objectives -----------------------------------------------------

struct SampleResult {
  double loss = 0.0;
  std::map<std::string, double> terms;
};

LossValue PlainPixelLoss(const TrainConfig& c, double p, double y) {
  switch (c.method) {
    case Method::kBaseline:
    case Method::kCoteach:
      return CrossEntropy(p, y);
    case Method::kFocal:
      return Focal(p, y, c.focal);
    case Method::kGce:
      return Gce(p, y, c.gce);
    case Method::kSce:
      return Sce(p, y, c.sce);
    case Method::kApl:
      return Apl(p, y, c.apl);
    default:
      throw ArgumentError("train: not a plain pixel loss");
  }
}

class Trainer {
 public:
  Trainer(const TrainConfig& config, const PreparedData& data, LearnerState& state)
      : c_(config), data_(data), state_(state) {}

  // Loss of sample `index` under `model`; d loss / d parameters is added to `grad`.
  SampleResult Run(const ToyModel& model, std::size_t index, int epoch, Pcg32& rng,
                   std::span<double> grad) {
    switch (c_.method) {
      case Method::kElr:
        return Elr(model, index, grad);
      case Method::kNpn:
        return Npn(model, index, rng, grad);
      case Method::kPmhm:
        return Pmhm(model, index, epoch, rng, grad);
      default:
        return Plain(model, index, grad);
    }
  }

 private:
  const std::vector<FrameFeatures>& Frames(std::size_t index) const {
    return data_.frames[data_.samples[index].clip];
  }

  static ToyModel::OutputGradients MainOnly(ProbabilityMap g) {
    ToyModel::OutputGradients out;
    out.stages.resize(ToyModel::kStages);
    out.stages.back() = std::move(g);
    return out;
  }

  SampleResult Plain(const ToyModel& model, std::size_t index, std::span<double> grad) {
    const auto& sample = data_.samples[index];
    const auto& frames = Frames(index);
    const double nf = static_cast<double>(frames.size());
    SampleResult out;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto pass = model.Forward(frames[t], sample.prompt);
      const auto& p = pass.outputs.main();
      const double np = static_cast<double>(p.size());
      ProbabilityMap g(p.width, p.height);
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const LossValue lv = PlainPixelLoss(c_, p.values[i], sample.targets[t].values[i]);
        sum += lv.value;
        g.values[i] = lv.grad / (np * nf);
      }
      out.loss += sum / np / nf;
      model.Backward(pass, MainOnly(std::move(g)), grad);
    }
    return out;
  }

  SampleResult Elr(const ToyModel& model, std::size_t index, std::span<double> grad) {
    const auto& sample = data_.samples[index];
    const auto& frames = Frames(index);
    const double nf = static_cast<double>(frames.size());
    SampleResult out;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto pass = model.Forward(frames[t], sample.prompt);
      const auto& p = pass.outputs.main();
      const double np = static_cast<double>(p.size());
      auto& s = state_.elr[index][t];
      ProbabilityMap g(p.width, p.height);
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const ElrStep step =
            ElrStepPixel(p.values[i], sample.targets[t].values[i], {s[i]}, c_.elr);
        s[i] = step.state.s;
        sum += step.loss.value;
        g.values[i] = step.loss.grad / (np * nf);
      }
      out.loss += sum / np / nf;
      model.Backward(pass, MainOnly(std::move(g)), grad);
    }
    return out;
  }

  SampleResult Npn(const ToyModel& model, std::size_t index, Pcg32& rng,
                   std::span<double> grad) {
    const auto& sample = data_.samples[index];
    const auto& frames = Frames(index);
    const double nf = static_cast<double>(frames.size());
    SampleResult out;
    double pll = 0.0, nl = 0.0, cr = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const FrameFeatures weak = ApplyPhotometric(frames[t], c_.npn_views.weak, rng);
      const FrameFeatures strong = ApplyPhotometric(frames[t], c_.npn_views.strong, rng);
      const auto pass_w = model.Forward(weak, sample.prompt);
      const auto pass_s = model.Forward(strong, sample.prompt);
      const auto& pw = pass_w.outputs.main();
      const auto& ps = pass_s.outputs.main();
      const double np = static_cast<double>(pw.size());
      auto& counts = state_.npn[index][t];
      ProbabilityMap gw(pw.width, pw.height), gs(pw.width, pw.height);
      double sum = 0.0, sp = 0.0, sn = 0.0, sc = 0.0;
      for (std::size_t i = 0; i < pw.size(); ++i) {
        const NpnStep step = NpnStepPixel(pw.values[i], ps.values[i],
                                          sample.targets[t].values[i], counts[i], c_.npn);
        counts[i] = step.state;
        sum += step.value;
        sp += step.pll;
        sn += step.nl;
        sc += step.cr;
        gw.values[i] = step.grad_weak / (np * nf);
        gs.values[i] = step.grad_strong / (np * nf);
      }
      out.loss += sum / np / nf;
      pll += sp / np / nf;
      nl += sn / np / nf;
      cr += sc / np / nf;
      model.Backward(pass_w, MainOnly(std::move(gw)), grad);
      model.Backward(pass_s, MainOnly(std::move(gs)), grad);
    }
    out.terms = {{"pll", pll}, {"nl", nl}, {"cr", cr}};
    return out;
  }

  SampleResult Pmhm(const ToyModel& model, std::size_t index, int epoch, Pcg32& rng,
                    std::span<double> grad) {
    const auto& sample = data_.samples[index];
    const auto& frames = Frames(index);
    const AuxPerturbation perturb = AuxPerturbationSchedule(epoch, c_.epochs, c_.pmhm);
    std::vector<ToyModel::ForwardPass> passes;
    std::vector<HeadOutputs> outputs;
    std::vector<ProbabilityMap> main, aux;
    std::vector<BinaryMask> uncertain;
    double u_count = 0.0;
    for (const auto& f : frames) {
      passes.push_back(model.Forward(f, sample.prompt, perturb.dropout_rate, &rng));
      outputs.push_back(passes.back().outputs);
      main.push_back(outputs.back().main());
      aux.push_back(outputs.back().aux);
      uncertain.push_back(epoch < c_.pmhm_warmup_epochs
                              ? BinaryMask(f.width, f.height)
                              : UncertaintyMask(main.back(), c_.pmhm));
      u_count += static_cast<double>(CountOnes(uncertain.back()));
    }
    HardLoss hard = ConfidentHardLoss(main, sample.targets, uncertain, c_.pmhm);
    HardLoss hard_aux;
    if (c_.pmhm.hard_on_aux) {
      hard_aux = ConfidentHardLoss(aux, sample.targets, uncertain, c_.pmhm);
      hard.value += hard_aux.value;
    }
    const HeadConsistency head = HeadConsistencyLoss(main, aux, uncertain, c_.pmhm);
    const LayerConsistency layer = LayerConsistencyLoss(outputs, uncertain, c_.pmhm);
    const SegLoss total = TotalSegLoss(hard.value, head.value, layer.value, c_.pmhm);
    const double lh = c_.pmhm.lambda_head, ll = c_.pmhm.lambda_layer;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      ToyModel::OutputGradients g;
      for (int s = 0; s < ToyModel::kStages; ++s) {
        ProbabilityMap m = layer.grad[t][s];
        for (double& v : m.values) v *= ll;
        g.stages.push_back(std::move(m));
      }
      auto& gm = g.stages.back().values;
      for (std::size_t i = 0; i < gm.size(); ++i) {
        gm[i] += hard.grad[t].values[i] + lh * head.grad_main[t].values[i];
      }
      g.aux = head.grad_aux[t];
      for (std::size_t i = 0; i < g.aux.values.size(); ++i) {
        g.aux.values[i] *= lh;
        if (c_.pmhm.hard_on_aux) g.aux.values[i] += hard_aux.grad[t].values[i];
      }
      model.Backward(passes[t], g, grad);
    }
    return {total.total,
            {{"l_hard", total.hard}, {"l_head", total.head}, {"l_layer", total.layer},
             {"u_count", u_count}}};
  }

  const TrainConfig& c_;
  const PreparedData& data_;
  LearnerState& state_;
};

std::vector<std::size_t> Shuffled(std::size_t n, uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Pcg32 rng = RngSubstream(seed, "shuffle/" + std::to_string(epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.NextIndex(static_cast<uint32_t>(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

// Sums in batch order whatever the selection order, so a full selection
// reproduces the plain batch gradient bit for bit.
std::vector<double> MeanGradient(const std::vector<std::vector<double>>& grads,
                                 std::vector<std::size_t> chosen) {
  std::sort(chosen.begin(), chosen.end());
  std::vector<double> out(grads.front().size(), 0.0);
  for (std::size_t i : chosen) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += grads[i][k];
  }
  const double inv = 1.0 / static_cast<double>(chosen.size());
  for (double& v : out) v *= inv;
  return out;
}

struct Optimizer {
  std::vector<double> velocity;
  double lr, momentum;

  // v <- mu v + g; theta <- theta - lr v. Parameters in `skip` keep both
  // their value and their velocity.
  void Step(std::span<double> params, const std::vector<double>& grad,
            std::pair<std::size_t, std::size_t> skip = {0, 0}) {
    if (velocity.empty()) velocity.assign(params.size(), 0.0);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (k >= skip.first && k < skip.second) continue;
      velocity[k] = momentum * velocity[k] + grad[k];
      params[k] -= lr * velocity[k];
    }
  }
};

void GuardLoss(double loss, const TrainConfig& c, int epoch, std::size_t step,
               const char* which) {
  if (!std::isfinite(loss) || loss > c.divergence_limit) {
    std::ostringstream msg;
    msg << "train: " << MethodName(c.method) << " diverged at epoch " << epoch << " step "
        << step << " (" << which << " loss " << loss << " exceeds " << c.divergence_limit
        << "); lower the learning rate";
    throw TrainingError(msg.str());
  }
}

void GuardParameters(const ToyModel& model, int epoch) {
  for (double v : model.parameters()) {
    if (!std::isfinite(v)) {
      throw TrainingError("train: non-finite parameter after epoch " + std::to_string(epoch));
    }
  }
}

}  // namespace

const char* MethodName(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

Method ParseMethod(const std::string& name) {
  for (const auto& [m, n] : kMethodNames) {
    if (name == n) return m;
  }
  throw ArgumentError("unsupported method '" + name +
                      "' (expected baseline, focal, gce, sce, apl, elr, npn, coteach or pmhm)");
}

CoTeachSchedule TrainConfig::ResolvedSchedule() const {
  CoTeachSchedule s = coteach.schedule;
  if (coteach.rho_from_noise) s.rho = noise.text_rate;
  return s;
}

void TrainConfig::Validate() const {
  if (epochs < 1) throw ArgumentError("train config: epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("train config: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ArgumentError("train config: momentum must lie in [0, 1)");
  }
  if (batch_size < 1) throw ArgumentError("train config: batch_size must be >= 1");
  if (pmhm_warmup_epochs < 0) {
    throw ArgumentError("train config: pmhm warmup_epochs must be non-negative");
  }
  if (!(divergence_limit > 0.0)) {
    throw ArgumentError("train config: divergence_limit must be positive");
  }
  if (!(gce.q > 0.0 && gce.q <= 1.0) || !(apl.q > 0.0 && apl.q <= 1.0)) {
    throw ArgumentError("train config: q must lie in (0, 1]");
  }
  if (!(elr.beta >= 0.0 && elr.beta <= 1.0)) {
    throw ArgumentError("train config: elr beta must lie in [0, 1]");
  }
  const CoTeachSchedule s = ResolvedSchedule();
  if (!(s.rho >= 0.0 && s.rho <= 1.0) || !(s.t_k > 0.0) || !(s.cap > 0.0 && s.cap <= 1.0)) {
    throw ArgumentError("train config: co-teaching needs rho in [0, 1], t_k > 0, cap in (0, 1]");
  }
  pmhm.Validate();
}

TrainConfig TrainConfigFromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  TrainConfig c;
  Reader r(doc, "train config");
  std::string method = "baseline";
  r.Read("method", method);
  c.method = ParseMethod(method);
  c.epochs = TrainConfig::DefaultEpochs(c.method);
  r.Read("epochs", c.epochs);
  r.Read("lr", c.lr);
  r.Read("momentum", c.momentum);
  r.Read("batch_size", c.batch_size);
  r.Read("seed", c.seed);
  r.Read("divergence_limit", c.divergence_limit);
  if (const json* noise = r.Child("noise")) {
    Reader n(*noise, "train config noise");
    n.Read("text_rate", c.noise.text_rate);
    n.Read("kernel", c.noise.kernel);
    n.Read("seed", c.noise.seed);
    n.Finish();
  }
  if (const json* params = r.Child("params")) ReadParams(*params, c);
  r.Finish();
  c.Validate();
  return c;
}

std::string TrainConfigToJson(const TrainConfig& c) {
  ordered_json doc;
  doc["method"] = MethodName(c.method);
  doc["epochs"] = c.epochs;
  doc["lr"] = c.lr;
  doc["momentum"] = c.momentum;
  doc["batch_size"] = c.batch_size;
  doc["seed"] = c.seed;
  doc["divergence_limit"] = c.divergence_limit;
  doc["noise"] = {{"text_rate", c.noise.text_rate},
                  {"kernel", c.noise.kernel},
                  {"seed", c.noise.seed}};
  doc["params"] = ParamsJson(c);
  return doc.dump(2) + "\n";
}

ToyModel MakeModel(const Dataset& dataset) {
  std::set<std::string> categories, verbs;
  const fs::path classes = dataset.root / kClassesFile;
  if (fs::is_regular_file(classes)) {
    for (const auto& name : LoadClassMapping(classes).AllCategories()) categories.insert(name);
  }
  for (const auto& clip : dataset.clips) {
    for (const auto& object : clip.objects) {
      categories.insert(object.category);
      verbs.insert(object.Verb());
    }
  }
  return ToyModel({categories.begin(), categories.end()}, {verbs.begin(), verbs.end()});
}

TrainOutcome TrainModels(const Dataset& train, const TrainConfig& config,
                         const fs::path& state_dir, const EpochCallback& on_epoch) {
  config.Validate();
  if (train.PromptCount() == 0) throw ArgumentError("train: dataset has no prompts");
  TrainOutcome out{MakeModel(train), std::nullopt, {}};
  out.model.Initialize(config.seed);
  const bool coteach = config.method == Method::kCoteach;
  if (coteach) {
    out.peer = out.model;
    out.peer->Initialize(config.PeerSeed());
  }
  const PreparedData data = Prepare(train, out.model);
  LearnerState state = InitState(data, config.method);
  Trainer trainer(config, data, state);
  Optimizer opt_a{{}, config.lr, config.momentum};
  Optimizer opt_b{{}, config.lr, config.momentum};
  const std::size_t n = data.samples.size();
  const std::size_t n_params = out.model.parameter_count();
  const CoTeachSchedule schedule = config.ResolvedSchedule();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = Shuffled(n, config.seed, epoch);
    Pcg32 rng = RngSubstream(config.seed, std::string(MethodName(config.method)) + "/epoch/" +
                                              std::to_string(epoch));
    Pcg32 peer_rng = RngSubstream(config.PeerSeed(), "peer/epoch/" + std::to_string(epoch));
    const double freeze_p =
        config.method == Method::kPmhm
            ? AuxPerturbationSchedule(epoch, config.epochs, config.pmhm).freeze_probability
            : 0.0;
    const double keep = coteach ? KeepRate(epoch, schedule) : 1.0;
    EpochLog log;
    log.epoch = epoch + 1;
    double peer_loss = 0.0, frozen_steps = 0.0;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size, ++step) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::size_t b = end - begin;
      // The freeze draw precedes every dropout draw of the step.
      const bool frozen = config.method == Method::kPmhm && rng.NextUniform01() < freeze_p;
      frozen_steps += frozen ? 1.0 : 0.0;
      std::vector<std::vector<double>> grads(b, std::vector<double>(n_params, 0.0));
      std::vector<double> losses(b);
      StepLog step_log;
      for (std::size_t i = 0; i < b; ++i) {
        const SampleResult r = trainer.Run(out.model, order[begin + i], epoch, rng, grads[i]);
        GuardLoss(r.loss, config, epoch + 1, step, "sample");
        losses[i] = r.loss;
        log.loss += r.loss;
        step_log.loss += r.loss;
        for (const auto& [key, value] : r.terms) {
          log.terms[key] += value;
          step_log.terms[key] += value;
        }
      }
      step_log.loss /= static_cast<double>(b);
      for (auto& [key, value] : step_log.terms) value /= static_cast<double>(b);
      if (config.method == Method::kPmhm) step_log.terms["frozen"] = frozen ? 1.0 : 0.0;
      log.steps.push_back(std::move(step_log));
      std::vector<std::size_t> all(b);
      std::iota(all.begin(), all.end(), 0);
      if (!coteach) {
        opt_a.Step(out.model.parameters(), MeanGradient(grads, all),
                   frozen ? out.model.AuxParameterRange() : std::pair<std::size_t, std::size_t>{});
        continue;
      }
      std::vector<std::vector<double>> peer_grads(b, std::vector<double>(n_params, 0.0));
      std::vector<double> peer_losses(b);
      for (std::size_t i = 0; i < b; ++i) {
        peer_losses[i] =
            trainer.Run(*out.peer, order[begin + i], epoch, peer_rng, peer_grads[i]).loss;
        GuardLoss(peer_losses[i], config, epoch + 1, step, "peer sample");
        peer_loss += peer_losses[i];
      }
      const auto chosen_by_a = SelectSmallLoss(losses, keep);
      const auto chosen_by_b = SelectSmallLoss(peer_losses, keep);
      // Each network learns from the samples its peer considers clean.
      opt_a.Step(out.model.parameters(), MeanGradient(grads, chosen_by_b));
      opt_b.Step(out.peer->parameters(), MeanGradient(peer_grads, chosen_by_a));
    }
    const double inv = 1.0 / static_cast<double>(n);
    log.loss *= inv;
    for (auto& [key, value] : log.terms) value *= inv;
    if (coteach) {
      log.terms["peer_loss"] = peer_loss * inv;
      log.terms["keep_rate"] = keep;
    }
    if (config.method == Method::kPmhm) {
      log.terms["frozen_steps"] = frozen_steps;
      log.terms["freeze_probability"] = freeze_p;
    }
    GuardLoss(log.loss, config, epoch + 1, step, "epoch");
    GuardParameters(out.model, epoch + 1);
    if (out.peer) GuardParameters(*out.peer, epoch + 1);
    PersistState(state, data, state_dir);
    out.epochs.push_back(std::move(log));
    if (on_epoch) on_epoch(epoch + 1, out);
  }
  return out;
}

void WritePredictions(const ToyModel& model, const Dataset& dataset, const fs::path& preds_dir) {
  for (const auto& clip : dataset.clips) {
    std::vector<FrameFeatures> features;
    for (const auto& frame : clip.frames) {
      features.push_back(MakeFeatures(ReadImage(dataset.ImagePath(frame))));
    }
    for (const auto& object : clip.objects) {
      const PromptIds prompt = model.Encode(object);
      for (std::size_t t = 0; t < clip.frames.size(); ++t) {
        WriteProbabilityMap(model.Predict(features[t], prompt),
                            PredictionPath(preds_dir, clip.clip_id, object.object_id,
                                           clip.frames[t].frame_id));
      }
    }
  }
}

RunRecord TrainRun(const Dataset& train, const Dataset& clean_eval, const TrainConfig& config,
                   const fs::path& run_dir) {
  const auto start = std::chrono::steady_clock::now();
  config.Validate();
  for (const char* sub : {"checkpoints", "preds", "state"}) fs::remove_all(run_dir / sub);
  fs::create_directories(run_dir / "checkpoints");
  WriteFileBytes(run_dir / "config.json", TrainConfigToJson(config));
  std::string log_text;
  const auto on_epoch = [&](int epoch, const TrainOutcome& outcome) {
    const fs::path dir = run_dir / "checkpoints";
    outcome.model.Save(dir / ("epoch_" + std::to_string(epoch) + ".json"));
    if (outcome.peer) outcome.peer->Save(dir / ("epoch_" + std::to_string(epoch) + "_peer.json"));
    const EpochLog& e = outcome.epochs.back();
    for (std::size_t s = 0; s < e.steps.size(); ++s) {
      ordered_json step;
      step["kind"] = "step";
      step["epoch"] = e.epoch;
      step["step"] = s;
      step["loss"] = e.steps[s].loss;
      for (const auto& [key, value] : e.steps[s].terms) step[key] = value;
      log_text += step.dump() + "\n";
    }
    ordered_json line;
    line["kind"] = "epoch";
    line["epoch"] = e.epoch;
    line["method"] = MethodName(config.method);
    line["loss"] = e.loss;
    for (const auto& [key, value] : e.terms) line[key] = value;
    log_text += line.dump() + "\n";
    WriteFileBytes(run_dir / "log.jsonl", log_text);
  };
  const bool stateful = config.method == Method::kElr || config.method == Method::kNpn;
  const TrainOutcome outcome =
      TrainModels(train, config, stateful ? run_dir / "state" : fs::path{}, on_epoch);
  WritePredictions(outcome.model, clean_eval, run_dir / "preds");
  RunRecord record{config, outcome.epochs, Evaluate(clean_eval, run_dir / "preds"), 0.0};
  WriteFileBytes(run_dir / "report.json", ReportJson(*record.report));
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

}  // namespace noisyvos
