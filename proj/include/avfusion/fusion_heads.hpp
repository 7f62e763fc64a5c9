#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avfusion/core_math.hpp"
#include "avfusion/layers.hpp"
#include "avfusion/rng.hpp"

namespace avf {

enum class HeadKind { Mean, Mlp, MultiView };
enum class Modality { Audio, Video };

std::string_view to_string(HeadKind kind);
std::string_view to_string(Modality modality);
HeadKind parse_head_kind(std::string_view name);

struct HeadDims {
  std::size_t audio_dim = 356;
  std::size_t video_dim = 2048;
  std::size_t embed_dim = 256;
  std::size_t hidden_dim = 1330;  // MLP only

  static HeadDims large() { return {}; }
  static HeadDims desk() { return {16, 32, 8, 24}; }
  bool operator==(const HeadDims&) const = default;
};

// A missing modality is std::nullopt; heads see it as the all-zeros vector.
struct ModalityInput {
  std::optional<Vector> audio;
  std::optional<Vector> video;

  static ModalityInput both(Vector a, Vector v) { return {std::move(a), std::move(v)}; }
  static ModalityInput audio_only(Vector a) { return {std::move(a), std::nullopt}; }
  static ModalityInput video_only(Vector v) { return {std::nullopt, std::move(v)}; }
};

template <class T>
struct TensorView {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<T> values;
};
using ParamView = TensorView<double>;
using ConstParamView = TensorView<const double>;

// One gradient vector per tensor, in parameters() order.
using GradientList = std::vector<Vector>;

class FusionHead;

struct ForwardCache {
  virtual ~ForwardCache() = default;
  HeadKind kind{};
  const FusionHead* owner = nullptr;
  std::size_t batch_size = 0;
};

struct ForwardResult {
  Matrix output;  // batch x embed_dim
  std::unique_ptr<ForwardCache> cache;
};

struct BackwardResult {
  GradientList params;
  Matrix grad_audio;  // batch x audio_dim, zero rows where audio was absent
  Matrix grad_video;
};

class FusionHead {
 public:
  virtual ~FusionHead() = default;

  virtual HeadKind kind() const noexcept = 0;
  const HeadDims& dims() const noexcept { return dims_; }
  double dropout_probability() const noexcept { return dropout_.probability; }

  virtual std::vector<ParamView> parameters() = 0;
  virtual std::vector<ConstParamView> parameters() const = 0;
  // Non-trainable state saved with checkpoints (batch-norm running stats).
  virtual std::vector<ParamView> buffers() { return {}; }
  virtual std::vector<ConstParamView> buffers() const { return {}; }

  // Batch forward. Train mode needs `rng` for dropout and may update
  // batch-norm running statistics.
  virtual ForwardResult forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) = 0;
  // Eval-mode forward that leaves the head untouched.
  virtual Matrix infer(std::span<const ModalityInput> batch) const = 0;
  virtual BackwardResult backward(const ForwardCache& cache, const Matrix& grad_output) const = 0;
  virtual std::unique_ptr<FusionHead> clone() const = 0;

  Vector embed(const ModalityInput& input) const;
  std::size_t parameter_count() const;

 protected:
  FusionHead(HeadDims dims, DropoutSpec dropout) : dims_(dims), dropout_(dropout) {}
  FusionHead(const FusionHead&) = default;
  FusionHead& operator=(const FusionHead&) = default;

  // Throws on dimension mismatch; with allow_empty=false also on an input
  // that carries neither modality.
  void check_inputs(std::span<const ModalityInput> batch, bool allow_empty) const;
  template <class Cache>
  const Cache& cache_cast(const ForwardCache& cache) const;

  HeadDims dims_;
  DropoutSpec dropout_;
};

class MeanFusionHead final : public FusionHead {
 public:
  MeanFusionHead(HeadDims dims, Rng& init, DropoutSpec dropout = {});
  MeanFusionHead(LinearLayer proj_audio, LinearLayer proj_video, DropoutSpec dropout = {});

  HeadKind kind() const noexcept override { return HeadKind::Mean; }
  std::vector<ParamView> parameters() override;
  std::vector<ConstParamView> parameters() const override;
  ForwardResult forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) override;
  Matrix infer(std::span<const ModalityInput> batch) const override;
  BackwardResult backward(const ForwardCache& cache, const Matrix& grad_output) const override;
  std::unique_ptr<FusionHead> clone() const override;

  // The (NULL, NULL) input is accepted here; it is the head's pure bias term.
  ForwardResult forward_unchecked(std::span<const ModalityInput> batch, Mode mode, Rng* rng) const;

  LinearLayer proj_audio;
  LinearLayer proj_video;
};

class MlpFusionHead final : public FusionHead {
 public:
  MlpFusionHead(HeadDims dims, Rng& init, DropoutSpec dropout = {}, double leaky_slope = 0.01);
  MlpFusionHead(LinearLayer l1, LinearLayer l2, LinearLayer l3, std::size_t audio_dim,
                DropoutSpec dropout = {}, double leaky_slope = 0.01);

  HeadKind kind() const noexcept override { return HeadKind::Mlp; }
  std::vector<ParamView> parameters() override;
  std::vector<ConstParamView> parameters() const override;
  std::vector<ParamView> buffers() override;
  std::vector<ConstParamView> buffers() const override;
  ForwardResult forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) override;
  Matrix infer(std::span<const ModalityInput> batch) const override;
  BackwardResult backward(const ForwardCache& cache, const Matrix& grad_output) const override;
  std::unique_ptr<FusionHead> clone() const override;

  double leaky_slope() const noexcept { return leaky_slope_; }

  LinearLayer layer1, layer2, layer3;
  BatchNormLayer bn1, bn2, bn3;

 private:
  double leaky_slope_;
};

class MultiViewHead final : public FusionHead {
 public:
  MultiViewHead(HeadDims dims, Rng& init, DropoutSpec dropout = {});
  MultiViewHead(LinearLayer proj_audio, LinearLayer proj_video, LinearLayer shared,
                DropoutSpec dropout = {});

  HeadKind kind() const noexcept override { return HeadKind::MultiView; }
  std::vector<ParamView> parameters() override;
  std::vector<ConstParamView> parameters() const override;
  // Rows with one modality take that modality's path through the shared
  // layer; rows with both average the two outputs.
  ForwardResult forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) override;
  Matrix infer(std::span<const ModalityInput> batch) const override;
  BackwardResult backward(const ForwardCache& cache, const Matrix& grad_output) const override;
  std::unique_ptr<FusionHead> clone() const override;

  ForwardResult forward_const(std::span<const ModalityInput> batch, Mode mode, Rng* rng) const;

  LinearLayer proj_audio;
  LinearLayer proj_video;
  LinearLayer shared_classifier;
};

std::unique_ptr<FusionHead> make_head(HeadKind kind, const HeadDims& dims, Rng& init,
                                      DropoutSpec dropout = {});

enum class NullPolicy { Reject, Allow };

// (proj_audio(a') + proj_video(v')) / 2.
Vector mean_fuse(const MeanFusionHead& head, const ModalityInput& input, Mode mode,
                 Rng* rng = nullptr, NullPolicy nulls = NullPolicy::Reject);
// Batch-level; train mode needs two or more rows.
Matrix mlp_fuse(MlpFusionHead& head, std::span<const ModalityInput> batch, Mode mode,
                Rng* rng = nullptr);
Vector mlp_fuse(const MlpFusionHead& head, const ModalityInput& input);
// dropout(ReLU(shared(proj_modality(x)))).
Vector multiview_embed(const MultiViewHead& head, Modality modality, std::span<const double> x,
                       Mode mode, Rng* rng = nullptr);
// Mean of the audio and video shared-layer outputs.
Vector multiview_joint(const MultiViewHead& head, const ModalityInput& input, Mode mode,
                       Rng* rng = nullptr);
BackwardResult fusion_backward(const FusionHead& head, const ForwardCache& cache,
                               const Matrix& grad_output);

}  // namespace avf
