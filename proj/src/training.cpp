#include "avfusion/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "avfusion/errors.hpp"

namespace avf {

void TrainingConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(field) + " must be positive");
  };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  positive(eps, "eps");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  positive(clip_norm, "clip_norm");
  positive(lr_decay_factor, "lr_decay_factor");
  if (!(lambda_audio >= 0.0) || !(lambda_video >= 0.0)) throw ConfigError("lambda weights must be >= 0");
  double total = 0.0;
  for (double p : mask_probabilities) {
    if (!(p >= 0.0)) throw ConfigError("mask_probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mask_probabilities must sum to 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  positive(arc_scale, "arc_scale");
  if (!(arc_margin >= 0.0 && arc_margin < 1.5707963267948966)) {
    throw ConfigError("arc_margin must lie in [0, pi/2)");
  }
}

Model Model::clone() const { return {head->clone(), arc}; }

std::vector<ParamView> Model::parameters() {
  auto p = head->parameters();
  for (auto& a : arc.parameters()) p.push_back(std::move(a));
  return p;
}

std::vector<ConstParamView> Model::parameters() const {
  const FusionHead& h = *head;
  auto p = h.parameters();
  for (auto& a : arc.parameters()) p.push_back(std::move(a));
  return p;
}

Model make_model(HeadKind kind, const HeadDims& dims, std::size_t n_classes, const TrainingConfig& config) {
  config.validate();
  if (n_classes < 1) throw ConfigError("make_model: need at least one class");
  Rng init = make_stream(config.seed, "init");
  Model m;
  m.head = make_head(kind, dims, init, DropoutSpec{config.dropout});
  m.arc = ArcMarginHead::init(dims.embed_dim, n_classes, init, config.arc_scale, config.arc_margin);
  return m;
}

MaskMode sample_mask_mode(Rng& rng, const std::array<double, 3>& probabilities) {
  const double u = uniform01(rng);
  if (u < probabilities[0]) return MaskMode::MaskVideo;
  if (u < probabilities[0] + probabilities[1]) return MaskMode::MaskAudio;
  // Guard the degenerate (p_video, p_audio, 0) case against rounding.
  if (probabilities[2] == 0.0) return probabilities[1] > 0.0 ? MaskMode::MaskAudio : MaskMode::MaskVideo;
  return MaskMode::None;
}

ModalityInput masked_input(const Sample& sample, MaskMode mode) {
  ModalityInput in;
  if (mode != MaskMode::MaskAudio) in.audio = sample.audio;
  if (mode != MaskMode::MaskVideo) in.video = sample.video;
  return in;
}

namespace {

GradientList zero_gradients(const FusionHead& head, const ArcMarginHead& arc) {
  GradientList g;
  for (const auto& p : head.parameters()) g.emplace_back(p.values.size(), 0.0);
  g.emplace_back(arc.prototypes.size(), 0.0);
  return g;
}

void accumulate(GradientList& into, const GradientList& from) {
  for (std::size_t t = 0; t < from.size(); ++t)
    for (std::size_t i = 0; i < from[t].size(); ++i) into[t][i] += from[t][i];
}

ModalityInput single(const ModalityInput& in, Modality m) {
  const auto& v = m == Modality::Audio ? in.audio : in.video;
  if (!v) throw DegenerateInputError("multi-view training needs both modalities in every sample");
  return m == Modality::Audio ? ModalityInput::audio_only(*v) : ModalityInput::video_only(*v);
}

}  // namespace

BatchLoss compute_batch_loss(FusionHead& head, const ArcMarginHead& arc, std::span<const ModalityInput> inputs,
                             std::span<const std::size_t> labels, std::span<const MaskMode> masks,
                             const LossWeights& weights, Rng* dropout_rng, Mode mode) {
  if (inputs.empty()) throw DegenerateInputError("compute_batch_loss: empty batch");
  if (inputs.size() != labels.size()) throw ShapeError("compute_batch_loss: one label per input");
  if (!masks.empty() && masks.size() != inputs.size()) throw ShapeError("compute_batch_loss: one mask per input");
  for (std::size_t label : labels) {
    if (label >= arc.n_classes()) {
      throw LabelError("compute_batch_loss: label " + std::to_string(label) + " out of range");
    }
  }
  if (arc.embed_dim() != head.dims().embed_dim) {
    throw ShapeError("compute_batch_loss: classifier width differs from head embedding width");
  }

  BatchLoss out{0.0, zero_gradients(head, arc)};
  Matrix grad_protos(arc.embed_dim(), arc.n_classes());

  auto run = [&](std::span<const ModalityInput> batch, double weight) {
    auto fwd = head.forward(batch, mode, dropout_rng);
    Matrix grad_emb;
    out.loss += arc_margin_batch(arc, fwd.output, labels, weight, grad_emb, grad_protos);
    accumulate(out.gradients, head.backward(*fwd.cache, grad_emb).params);
  };

  if (head.kind() == HeadKind::MultiView) {
    if (std::any_of(masks.begin(), masks.end(), [](MaskMode m) { return m != MaskMode::None; })) {
      throw ConfigError("multi-view heads train without random masking");
    }
    std::vector<ModalityInput> audio, video;
    audio.reserve(inputs.size());
    video.reserve(inputs.size());
    for (const auto& in : inputs) {
      audio.push_back(single(in, Modality::Audio));
      video.push_back(single(in, Modality::Video));
    }
    run(audio, weights.audio);
    run(video, weights.video);
  } else if (masks.empty()) {
    run(inputs, 1.0);
  } else {
    std::vector<ModalityInput> masked(inputs.begin(), inputs.end());
    for (std::size_t n = 0; n < masked.size(); ++n) {
      if (masks[n] == MaskMode::MaskAudio) masked[n].audio.reset();
      if (masks[n] == MaskMode::MaskVideo) masked[n].video.reset();
    }
    run(masked, 1.0);
  }

  auto pv = grad_protos.values();
  out.gradients.back().assign(pv.begin(), pv.end());
  return out;
}

double global_norm(const GradientList& gradients) {
  double s = 0.0;
  for (const auto& g : gradients)
    for (double x : g) s += x * x;
  return std::sqrt(s);
}

double clip_global_norm(GradientList& gradients, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_global_norm: max_norm must be positive");
  const double norm = global_norm(gradients);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : gradients)
      for (double& x : g) x *= scale;
  }
  return norm;
}

void adamw_step(AdamWState& state, std::span<const ParamView> params, const GradientList& gradients,
                const AdamWConfig& config, double learning_rate) {
  if (params.size() != gradients.size()) {
    throw ConsistencyError("adamw_step: " + std::to_string(params.size()) + " tensors but " +
                           std::to_string(gradients.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw ConsistencyError("adamw_step: state tensor count differs");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].values.size() != gradients[t].size() || state.first_moment[t].size() != gradients[t].size()) {
      throw ConsistencyError("adamw_step: shape mismatch for " + params[t].name);
    }
  }

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].values;
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    const auto& g = gradients[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= learning_rate * (m_hat / (std::sqrt(v_hat) + config.eps)) + learning_rate * config.weight_decay * p[i];
    }
  }
}

double lr_schedule_update(std::span<const EpochRecord> history, double current_lr, double factor) {
  if (history.empty()) throw ConfigError("lr_schedule_update: no completed epoch");
  const double last = history.back().val_accuracy;
  for (std::size_t i = 0; i + 1 < history.size(); ++i) {
    if (history[i].val_accuracy >= last) return current_lr * factor;
  }
  return current_lr;
}

double validate_accuracy(const FusionHead& head, const ArcMarginHead& arc, const std::vector<Sample>& samples,
                         const std::vector<std::string>& class_ids) {
  if (samples.empty()) throw DegenerateInputError("validate_accuracy: empty validation set");
  std::vector<ModalityInput> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(ModalityInput::both(s.audio, s.video));
  const Matrix emb = head.infer(inputs);

  std::size_t correct = 0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), samples[n].identity_id);
    if (it == class_ids.end() || *it != samples[n].identity_id) {
      throw LabelError("validate_accuracy: identity '" + samples[n].identity_id + "' is not a training class");
    }
    if (is_zero(emb.row(n))) continue;
    const Vector logits = cosine_logits(arc, emb.row(n));
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == static_cast<std::size_t>(it - class_ids.begin())) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train_run(HeadKind kind, const HeadDims& dims, const std::vector<Sample>& train,
                      const std::vector<Sample>& val, const TrainingConfig& config) {
  config.validate();
  if (train.empty()) throw DegenerateInputError("train_run: empty training set");
  if (val.empty()) throw DegenerateInputError("train_run: empty validation set");
  {
    std::set<std::string> train_ids;
    for (const auto& s : train) train_ids.insert(s.sample_id);
    for (const auto& s : val) {
      if (train_ids.count(s.sample_id)) {
        throw ConfigError("train_run: sample '" + s.sample_id + "' is in both train and validation sets");
      }
    }
  }
  for (const auto& s : train) {
    if (s.audio.size() != dims.audio_dim || s.video.size() != dims.video_dim) {
      throw ShapeError("train_run: sample '" + s.sample_id + "' does not match the head input dims");
    }
  }

  TrainResult result;
  result.class_ids = identity_ids(train);
  std::vector<std::size_t> labels(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    labels[i] = static_cast<std::size_t>(
        std::lower_bound(result.class_ids.begin(), result.class_ids.end(), train[i].identity_id) -
        result.class_ids.begin());
  }

  Model model = make_model(kind, dims, result.class_ids.size(), config);
  Rng shuffle_rng = make_stream(config.seed, "shuffle");
  Rng mask_rng = make_stream(config.seed, "masking");
  Rng dropout_rng = make_stream(config.seed, "dropout");
  const AdamWConfig adam{config.beta1, config.beta2, config.eps, config.weight_decay};
  const LossWeights weights{config.lambda_audio, config.lambda_video};
  const bool masking = kind != HeadKind::MultiView;

  AdamWState state;
  double lr = config.learning_rate;
  double best_acc = -1.0;
  std::vector<std::size_t> order(train.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      // A trailing single-sample batch has no batch statistics.
      if (end - start < 2) break;
      std::vector<ModalityInput> inputs;
      std::vector<std::size_t> batch_labels;
      std::vector<MaskMode> masks;
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train[order[i]];
        inputs.push_back(ModalityInput::both(s.audio, s.video));
        batch_labels.push_back(labels[order[i]]);
        if (masking) masks.push_back(sample_mask_mode(mask_rng, config.mask_probabilities));
      }
      BatchLoss bl = compute_batch_loss(*model.head, model.arc, inputs, batch_labels, masks, weights, &dropout_rng);
      clip_global_norm(bl.gradients, config.clip_norm);
      const auto params = model.parameters();
      adamw_step(state, params, bl.gradients, adam, lr);
      loss_sum += bl.loss * static_cast<double>(end - start);
      seen += end - start;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.val_accuracy = validate_accuracy(*model.head, model.arc, val, result.class_ids);
    rec.learning_rate = lr;
    result.history.push_back(rec);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      result.best = model.clone();
      result.best_epoch = epoch;
    }
    lr = lr_schedule_update(result.history, lr, config.lr_decay_factor);
  }

  if (result.best_epoch == 0) {
    result.best = std::move(model);
  } else {
    result.history[result.best_epoch - 1].is_best = true;
  }
  return result;
}

}  // namespace avf
