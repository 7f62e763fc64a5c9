#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "avfusion/arc_margin.hpp"
#include "avfusion/fusion_heads.hpp"
#include "avfusion/synthetic_data.hpp"

namespace avf {

enum class MaskMode { MaskVideo, MaskAudio, None };

struct TrainingConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 10;
  double clip_norm = 5.0;
  double lr_decay_factor = 0.95;
  double lambda_audio = 0.5;
  double lambda_video = 0.5;
  // Probabilities of {mask video, mask audio, no mask}.
  std::array<double, 3> mask_probabilities{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double dropout = 0.1;
  double arc_scale = 16.0;
  double arc_margin = 0.125;
  std::uint64_t seed = 4242;

  void validate() const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  GradientList first_moment;
  GradientList second_moment;
  std::uint64_t step_count = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
  bool is_best = false;

  bool operator==(const EpochRecord&) const = default;
};

// A fusion head with its classifier. Parameters are the head's followed by
// the prototype matrix.
struct Model {
  std::unique_ptr<FusionHead> head;
  ArcMarginHead arc;

  Model clone() const;
  std::vector<ParamView> parameters();
  std::vector<ConstParamView> parameters() const;
};

Model make_model(HeadKind kind, const HeadDims& dims, std::size_t n_classes, const TrainingConfig& config);

MaskMode sample_mask_mode(Rng& rng, const std::array<double, 3>& probabilities = {1.0 / 3.0, 1.0 / 3.0,
                                                                                    1.0 / 3.0});
// Replaces the masked modality with NULL.
ModalityInput masked_input(const Sample& sample, MaskMode mode);

struct LossWeights {
  double audio = 0.5;
  double video = 0.5;
};

struct BatchLoss {
  double loss = 0.0;
  GradientList gradients;  // Model::parameters() order
};

// Mean/MLP: arc-margin loss of the fused embedding of each (masked) input.
// Multi-view: lambda_a * L(audio path) + lambda_v * L(video path) per sample;
// masks must be empty or all None. Loss is the batch mean.
BatchLoss compute_batch_loss(FusionHead& head, const ArcMarginHead& arc,
                             std::span<const ModalityInput> inputs, std::span<const std::size_t> labels,
                             std::span<const MaskMode> masks, const LossWeights& weights, Rng* dropout_rng,
                             Mode mode = Mode::Train);

double global_norm(const GradientList& gradients);
// Returns the norm before clipping.
double clip_global_norm(GradientList& gradients, double max_norm = 5.0);

// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
void adamw_step(AdamWState& state, std::span<const ParamView> params, const GradientList& gradients,
                const AdamWConfig& config, double learning_rate);

// Decays when the last epoch's accuracy does not strictly beat every earlier one.
double lr_schedule_update(std::span<const EpochRecord> history, double current_lr, double factor = 0.95);

// Unmasked, eval mode, argmax of s*cos(theta) without margin.
double validate_accuracy(const FusionHead& head, const ArcMarginHead& arc, const std::vector<Sample>& samples,
                         const std::vector<std::string>& class_ids);

struct TrainResult {
  Model best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::vector<std::string> class_ids;
};

TrainResult train_run(HeadKind kind, const HeadDims& dims, const std::vector<Sample>& train,
                      const std::vector<Sample>& val, const TrainingConfig& config);

}  // namespace avf
