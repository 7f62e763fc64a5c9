#include "avfusion/fusion_heads.hpp"

#include <algorithm>
#include <string>

#include "avfusion/errors.hpp"

namespace avf {

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::Mean: return "mean";
    case HeadKind::Mlp: return "mlp";
    case HeadKind::MultiView: return "multiview";
  }
  return "?";
}

std::string_view to_string(Modality modality) {
  return modality == Modality::Audio ? "audio" : "video";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "mean") return HeadKind::Mean;
  if (name == "mlp") return HeadKind::Mlp;
  if (name == "multiview" || name == "multi-view") return HeadKind::MultiView;
  throw ConfigError("unknown head kind '" + std::string(name) + "' (expected mean, mlp or multiview)");
}

namespace {

template <class T, class L>
void add_linear(std::vector<TensorView<T>>& out, const std::string& prefix, L& layer) {
  out.push_back({prefix + ".weight", layer.weight.rows(), layer.weight.cols(), layer.weight.values()});
  out.push_back({prefix + ".bias", layer.bias.size(), 1, std::span<T>(layer.bias)});
}

template <class T, class B>
void add_bn(std::vector<TensorView<T>>& out, const std::string& prefix, B& bn) {
  out.push_back({prefix + ".gamma", bn.gamma.size(), 1, std::span<T>(bn.gamma)});
  out.push_back({prefix + ".beta", bn.beta.size(), 1, std::span<T>(bn.beta)});
}

template <class T, class B>
void add_bn_stats(std::vector<TensorView<T>>& out, const std::string& prefix, B& bn) {
  out.push_back({prefix + ".running_mean", bn.running_mean.size(), 1, std::span<T>(bn.running_mean)});
  out.push_back({prefix + ".running_var", bn.running_var.size(), 1, std::span<T>(bn.running_var)});
}

struct GatheredInputs {
  Matrix audio;
  Matrix video;
  std::vector<bool> has_audio;
  std::vector<bool> has_video;
};

GatheredInputs gather(std::span<const ModalityInput> batch, const HeadDims& dims) {
  GatheredInputs g{Matrix(batch.size(), dims.audio_dim), Matrix(batch.size(), dims.video_dim),
                   std::vector<bool>(batch.size()), std::vector<bool>(batch.size())};
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (batch[n].audio) {
      std::copy(batch[n].audio->begin(), batch[n].audio->end(), g.audio.row(n).begin());
      g.has_audio[n] = true;
    }
    if (batch[n].video) {
      std::copy(batch[n].video->begin(), batch[n].video->end(), g.video.row(n).begin());
      g.has_video[n] = true;
    }
  }
  return g;
}

Vector flatten(const LinearGrad& g, bool bias) {
  if (bias) return g.bias;
  auto v = g.weight.values();
  return {v.begin(), v.end()};
}

void push_linear_grad(GradientList& out, const LinearGrad& g) {
  out.push_back(flatten(g, false));
  out.push_back(flatten(g, true));
}

Matrix rows_of(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(m.row(idx[i]).begin(), m.cols(), out.row(i).begin());
  return out;
}

Matrix relu(const Matrix& x) { return leaky_relu(x, 0.0); }

}  // namespace

void FusionHead::check_inputs(std::span<const ModalityInput> batch, bool allow_empty) const {
  if (batch.empty()) throw DegenerateInputError("fusion head: empty batch");
  for (const auto& in : batch) {
    if (in.audio && in.audio->size() != dims_.audio_dim) {
      throw ShapeError("fusion head: audio dim " + std::to_string(in.audio->size()) + ", expected " +
                       std::to_string(dims_.audio_dim));
    }
    if (in.video && in.video->size() != dims_.video_dim) {
      throw ShapeError("fusion head: video dim " + std::to_string(in.video->size()) + ", expected " +
                       std::to_string(dims_.video_dim));
    }
    if (!allow_empty && !in.audio && !in.video) {
      throw DegenerateInputError("fusion head: both modalities are missing");
    }
  }
}

template <class Cache>
const Cache& FusionHead::cache_cast(const ForwardCache& cache) const {
  const auto* typed = dynamic_cast<const Cache*>(&cache);
  if (!typed || cache.kind != kind() || cache.owner != this) {
    throw ConsistencyError("fusion_backward: cache was produced by a different head");
  }
  return *typed;
}

Vector FusionHead::embed(const ModalityInput& input) const {
  const Matrix out = infer(std::span<const ModalityInput>(&input, 1));
  auto r = out.row(0);
  return {r.begin(), r.end()};
}

std::size_t FusionHead::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.values.size();
  return n;
}

// ---------------------------------------------------------------- mean fusion

namespace {

struct MeanCache : ForwardCache {
  Matrix audio;  // after masking-to-zero and dropout
  Matrix video;
  Vector audio_mask;  // empty in eval mode
  Vector video_mask;
};

}  // namespace

MeanFusionHead::MeanFusionHead(HeadDims dims, Rng& init, DropoutSpec dropout)
    : FusionHead(dims, dropout),
      proj_audio(LinearLayer::init_uniform(dims.audio_dim, dims.embed_dim, init)),
      proj_video(LinearLayer::init_uniform(dims.video_dim, dims.embed_dim, init)) {}

MeanFusionHead::MeanFusionHead(LinearLayer pa, LinearLayer pv, DropoutSpec dropout)
    : FusionHead({pa.in_dim(), pv.in_dim(), pa.out_dim(), 0}, dropout),
      proj_audio(std::move(pa)),
      proj_video(std::move(pv)) {
  if (proj_audio.out_dim() != proj_video.out_dim()) {
    throw ShapeError("mean fusion: projections must share an output dimension");
  }
}

std::vector<ParamView> MeanFusionHead::parameters() {
  std::vector<ParamView> out;
  add_linear(out, "proj_audio", proj_audio);
  add_linear(out, "proj_video", proj_video);
  return out;
}

std::vector<ConstParamView> MeanFusionHead::parameters() const {
  std::vector<ConstParamView> out;
  add_linear(out, "proj_audio", proj_audio);
  add_linear(out, "proj_video", proj_video);
  return out;
}

ForwardResult MeanFusionHead::forward_unchecked(std::span<const ModalityInput> batch, Mode mode,
                                                Rng* rng) const {
  check_inputs(batch, true);
  auto g = gather(batch, dims_);
  auto cache = std::make_unique<MeanCache>();
  cache->kind = kind();
  cache->owner = this;
  cache->batch_size = batch.size();
  cache->audio = dropout_apply(dropout_, g.audio, mode, rng, &cache->audio_mask);
  cache->video = dropout_apply(dropout_, g.video, mode, rng, &cache->video_mask);

  Matrix out = linear_forward(proj_audio, cache->audio);
  const Matrix pv = linear_forward(proj_video, cache->video);
  auto ov = out.values();
  auto vv = pv.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = (ov[i] + vv[i]) / 2.0;
  return {std::move(out), std::move(cache)};
}

ForwardResult MeanFusionHead::forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) {
  check_inputs(batch, false);
  return forward_unchecked(batch, mode, rng);
}

Matrix MeanFusionHead::infer(std::span<const ModalityInput> batch) const {
  check_inputs(batch, false);
  return forward_unchecked(batch, Mode::Eval, nullptr).output;
}

BackwardResult MeanFusionHead::backward(const ForwardCache& base, const Matrix& grad_output) const {
  const auto& cache = cache_cast<MeanCache>(base);
  if (grad_output.rows() != cache.batch_size || grad_output.cols() != dims_.embed_dim) {
    throw ShapeError("mean fusion backward: gradient shape mismatch");
  }
  Matrix half(grad_output);
  for (double& x : half.values()) x /= 2.0;

  LinearGrad ga(proj_audio), gv(proj_video);
  Matrix grad_audio = linear_backward(proj_audio, cache.audio, half, ga);
  Matrix grad_video = linear_backward(proj_video, cache.video, half, gv);
  if (!cache.audio_mask.empty()) grad_audio = apply_mask(grad_audio, cache.audio_mask);
  if (!cache.video_mask.empty()) grad_video = apply_mask(grad_video, cache.video_mask);

  BackwardResult result;
  push_linear_grad(result.params, ga);
  push_linear_grad(result.params, gv);
  result.grad_audio = std::move(grad_audio);
  result.grad_video = std::move(grad_video);
  return result;
}

std::unique_ptr<FusionHead> MeanFusionHead::clone() const {
  return std::make_unique<MeanFusionHead>(*this);
}

// ----------------------------------------------------------------- MLP fusion

namespace {

struct MlpCache : ForwardCache {
  Mode mode = Mode::Eval;
  Vector audio_mask, video_mask;
  Matrix input;  // concat(a', v')
  Matrix pre1, pre2, pre3;  // linear outputs
  Matrix act1, act2;        // inputs to layer2 / layer3 (after bn and dropout)
  BatchNormCache bn1, bn2, bn3;
  Vector drop1, drop2;
};

}  // namespace

MlpFusionHead::MlpFusionHead(HeadDims dims, Rng& init, DropoutSpec dropout, double leaky_slope)
    : FusionHead(dims, dropout),
      layer1(LinearLayer::init_uniform(dims.audio_dim + dims.video_dim, dims.hidden_dim, init)),
      layer2(LinearLayer::init_uniform(dims.hidden_dim, dims.hidden_dim, init)),
      layer3(LinearLayer::init_uniform(dims.hidden_dim, dims.embed_dim, init)),
      bn1(dims.hidden_dim),
      bn2(dims.hidden_dim),
      bn3(dims.embed_dim),
      leaky_slope_(leaky_slope) {}

MlpFusionHead::MlpFusionHead(LinearLayer l1, LinearLayer l2, LinearLayer l3, std::size_t audio_dim,
                             DropoutSpec dropout, double leaky_slope)
    : FusionHead({audio_dim, l1.in_dim() - audio_dim, l3.out_dim(), l1.out_dim()}, dropout),
      layer1(std::move(l1)),
      layer2(std::move(l2)),
      layer3(std::move(l3)),
      bn1(layer1.out_dim()),
      bn2(layer2.out_dim()),
      bn3(layer3.out_dim()),
      leaky_slope_(leaky_slope) {
  if (audio_dim >= layer1.in_dim() || layer2.in_dim() != layer1.out_dim() ||
      layer3.in_dim() != layer2.out_dim()) {
    throw ShapeError("mlp fusion: layer dimensions do not chain");
  }
}

std::vector<ParamView> MlpFusionHead::parameters() {
  std::vector<ParamView> out;
  add_linear(out, "layer1", layer1);
  add_bn(out, "bn1", bn1);
  add_linear(out, "layer2", layer2);
  add_bn(out, "bn2", bn2);
  add_linear(out, "layer3", layer3);
  add_bn(out, "bn3", bn3);
  return out;
}

std::vector<ConstParamView> MlpFusionHead::parameters() const {
  std::vector<ConstParamView> out;
  add_linear(out, "layer1", layer1);
  add_bn(out, "bn1", bn1);
  add_linear(out, "layer2", layer2);
  add_bn(out, "bn2", bn2);
  add_linear(out, "layer3", layer3);
  add_bn(out, "bn3", bn3);
  return out;
}

std::vector<ParamView> MlpFusionHead::buffers() {
  std::vector<ParamView> out;
  add_bn_stats(out, "bn1", bn1);
  add_bn_stats(out, "bn2", bn2);
  add_bn_stats(out, "bn3", bn3);
  return out;
}

std::vector<ConstParamView> MlpFusionHead::buffers() const {
  std::vector<ConstParamView> out;
  add_bn_stats(out, "bn1", bn1);
  add_bn_stats(out, "bn2", bn2);
  add_bn_stats(out, "bn3", bn3);
  return out;
}

ForwardResult MlpFusionHead::forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) {
  check_inputs(batch, false);
  if (mode == Mode::Train && batch.size() < 2) {
    throw DegenerateBatchError("mlp fusion: train mode needs a batch of at least 2");
  }
  auto g = gather(batch, dims_);
  auto cache = std::make_unique<MlpCache>();
  cache->kind = kind();
  cache->owner = this;
  cache->batch_size = batch.size();
  cache->mode = mode;

  const Matrix a = dropout_apply(dropout_, g.audio, mode, rng, &cache->audio_mask);
  const Matrix v = dropout_apply(dropout_, g.video, mode, rng, &cache->video_mask);
  cache->input = Matrix(batch.size(), dims_.audio_dim + dims_.video_dim);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    auto row = cache->input.row(n);
    std::copy_n(a.row(n).begin(), dims_.audio_dim, row.begin());
    std::copy_n(v.row(n).begin(), dims_.video_dim, row.begin() + dims_.audio_dim);
  }

  // linear -> leaky ReLU -> batch norm (-> dropout on the first two blocks)
  cache->pre1 = linear_forward(layer1, cache->input);
  Matrix h = batchnorm_forward(bn1, leaky_relu(cache->pre1, leaky_slope_), mode, &cache->bn1);
  cache->act1 = dropout_apply(dropout_, h, mode, rng, &cache->drop1);

  cache->pre2 = linear_forward(layer2, cache->act1);
  h = batchnorm_forward(bn2, leaky_relu(cache->pre2, leaky_slope_), mode, &cache->bn2);
  cache->act2 = dropout_apply(dropout_, h, mode, rng, &cache->drop2);

  cache->pre3 = linear_forward(layer3, cache->act2);
  Matrix out = batchnorm_forward(bn3, leaky_relu(cache->pre3, leaky_slope_), mode, &cache->bn3);
  return {std::move(out), std::move(cache)};
}

Matrix MlpFusionHead::infer(std::span<const ModalityInput> batch) const {
  check_inputs(batch, false);
  auto g = gather(batch, dims_);
  Matrix x(batch.size(), dims_.audio_dim + dims_.video_dim);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    auto row = x.row(n);
    std::copy_n(g.audio.row(n).begin(), dims_.audio_dim, row.begin());
    std::copy_n(g.video.row(n).begin(), dims_.video_dim, row.begin() + dims_.audio_dim);
  }
  Matrix h = batchnorm_forward(bn1, leaky_relu(linear_forward(layer1, x), leaky_slope_));
  h = batchnorm_forward(bn2, leaky_relu(linear_forward(layer2, h), leaky_slope_));
  return batchnorm_forward(bn3, leaky_relu(linear_forward(layer3, h), leaky_slope_));
}

BackwardResult MlpFusionHead::backward(const ForwardCache& base, const Matrix& grad_output) const {
  const auto& c = cache_cast<MlpCache>(base);
  if (grad_output.rows() != c.batch_size || grad_output.cols() != dims_.embed_dim) {
    throw ShapeError("mlp fusion backward: gradient shape mismatch");
  }
  LinearGrad g1(layer1), g2(layer2), g3(layer3);
  BatchNormGrad gb1(bn1.dim()), gb2(bn2.dim()), gb3(bn3.dim());

  Matrix g = batchnorm_backward(bn3, c.bn3, grad_output, gb3);
  g = leaky_relu_backward(c.pre3, g, leaky_slope_);
  g = linear_backward(layer3, c.act2, g, g3);

  if (!c.drop2.empty()) g = apply_mask(g, c.drop2);
  g = batchnorm_backward(bn2, c.bn2, g, gb2);
  g = leaky_relu_backward(c.pre2, g, leaky_slope_);
  g = linear_backward(layer2, c.act1, g, g2);

  if (!c.drop1.empty()) g = apply_mask(g, c.drop1);
  g = batchnorm_backward(bn1, c.bn1, g, gb1);
  g = leaky_relu_backward(c.pre1, g, leaky_slope_);
  g = linear_backward(layer1, c.input, g, g1);

  BackwardResult result;
  push_linear_grad(result.params, g1);
  result.params.push_back(gb1.gamma);
  result.params.push_back(gb1.beta);
  push_linear_grad(result.params, g2);
  result.params.push_back(gb2.gamma);
  result.params.push_back(gb2.beta);
  push_linear_grad(result.params, g3);
  result.params.push_back(gb3.gamma);
  result.params.push_back(gb3.beta);

  result.grad_audio = Matrix(c.batch_size, dims_.audio_dim);
  result.grad_video = Matrix(c.batch_size, dims_.video_dim);
  for (std::size_t n = 0; n < c.batch_size; ++n) {
    auto row = g.row(n);
    std::copy_n(row.begin(), dims_.audio_dim, result.grad_audio.row(n).begin());
    std::copy_n(row.begin() + dims_.audio_dim, dims_.video_dim, result.grad_video.row(n).begin());
  }
  if (!c.audio_mask.empty()) result.grad_audio = apply_mask(result.grad_audio, c.audio_mask);
  if (!c.video_mask.empty()) result.grad_video = apply_mask(result.grad_video, c.video_mask);
  return result;
}

std::unique_ptr<FusionHead> MlpFusionHead::clone() const {
  return std::make_unique<MlpFusionHead>(*this);
}

// ------------------------------------------------------------------ multi-view

namespace {

struct BranchCache {
  std::vector<std::size_t> rows;  // batch rows that carry this modality
  Matrix input;
  Matrix projected;
  Matrix pre_relu;
  Vector mask;
};

struct MultiViewCache : ForwardCache {
  BranchCache audio, video;
  Vector audio_weight, video_weight;  // per batch row: 0, 0.5 or 1
};

}  // namespace

MultiViewHead::MultiViewHead(HeadDims dims, Rng& init, DropoutSpec dropout)
    : FusionHead(dims, dropout),
      proj_audio(LinearLayer::init_uniform(dims.audio_dim, dims.embed_dim, init)),
      proj_video(LinearLayer::init_uniform(dims.video_dim, dims.embed_dim, init)),
      shared_classifier(LinearLayer::init_uniform(dims.embed_dim, dims.embed_dim, init)) {}

MultiViewHead::MultiViewHead(LinearLayer pa, LinearLayer pv, LinearLayer shared, DropoutSpec dropout)
    : FusionHead({pa.in_dim(), pv.in_dim(), pa.out_dim(), 0}, dropout),
      proj_audio(std::move(pa)),
      proj_video(std::move(pv)),
      shared_classifier(std::move(shared)) {
  if (proj_audio.out_dim() != proj_video.out_dim() ||
      shared_classifier.in_dim() != proj_audio.out_dim() ||
      shared_classifier.out_dim() != shared_classifier.in_dim()) {
    throw ShapeError("multi-view: shared classifier must be square at the projection width");
  }
}

std::vector<ParamView> MultiViewHead::parameters() {
  std::vector<ParamView> out;
  add_linear(out, "proj_audio", proj_audio);
  add_linear(out, "proj_video", proj_video);
  add_linear(out, "shared", shared_classifier);
  return out;
}

std::vector<ConstParamView> MultiViewHead::parameters() const {
  std::vector<ConstParamView> out;
  add_linear(out, "proj_audio", proj_audio);
  add_linear(out, "proj_video", proj_video);
  add_linear(out, "shared", shared_classifier);
  return out;
}

ForwardResult MultiViewHead::forward_const(std::span<const ModalityInput> batch, Mode mode,
                                           Rng* rng) const {
  check_inputs(batch, false);
  auto g = gather(batch, dims_);
  auto cache = std::make_unique<MultiViewCache>();
  cache->kind = kind();
  cache->owner = this;
  cache->batch_size = batch.size();
  cache->audio_weight.assign(batch.size(), 0.0);
  cache->video_weight.assign(batch.size(), 0.0);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const double w = (g.has_audio[n] && g.has_video[n]) ? 0.5 : 1.0;
    if (g.has_audio[n]) {
      cache->audio.rows.push_back(n);
      cache->audio_weight[n] = w;
    }
    if (g.has_video[n]) {
      cache->video.rows.push_back(n);
      cache->video_weight[n] = w;
    }
  }

  Matrix out(batch.size(), dims_.embed_dim);
  auto run_branch = [&](BranchCache& br, const Matrix& all, const LinearLayer& proj,
                        const Vector& weight) {
    if (br.rows.empty()) return;
    br.input = rows_of(all, br.rows);
    br.projected = linear_forward(proj, br.input);
    br.pre_relu = linear_forward(shared_classifier, br.projected);
    const Matrix y = dropout_apply(dropout_, relu(br.pre_relu), mode, rng, &br.mask);
    for (std::size_t i = 0; i < br.rows.size(); ++i) {
      auto dst = out.row(br.rows[i]);
      auto src = y.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += weight[br.rows[i]] * src[j];
    }
  };
  run_branch(cache->audio, g.audio, proj_audio, cache->audio_weight);
  run_branch(cache->video, g.video, proj_video, cache->video_weight);
  return {std::move(out), std::move(cache)};
}

ForwardResult MultiViewHead::forward(std::span<const ModalityInput> batch, Mode mode, Rng* rng) {
  return forward_const(batch, mode, rng);
}

Matrix MultiViewHead::infer(std::span<const ModalityInput> batch) const {
  return forward_const(batch, Mode::Eval, nullptr).output;
}

BackwardResult MultiViewHead::backward(const ForwardCache& base, const Matrix& grad_output) const {
  const auto& c = cache_cast<MultiViewCache>(base);
  if (grad_output.rows() != c.batch_size || grad_output.cols() != dims_.embed_dim) {
    throw ShapeError("multi-view backward: gradient shape mismatch");
  }
  LinearGrad ga(proj_audio), gv(proj_video), gs(shared_classifier);
  BackwardResult result;
  result.grad_audio = Matrix(c.batch_size, dims_.audio_dim);
  result.grad_video = Matrix(c.batch_size, dims_.video_dim);

  auto branch_back = [&](const BranchCache& br, const Vector& weight, const LinearLayer& proj,
                         LinearGrad& gp, Matrix& grad_in) {
    if (br.rows.empty()) return;
    Matrix g(br.rows.size(), dims_.embed_dim);
    for (std::size_t i = 0; i < br.rows.size(); ++i) {
      auto src = grad_output.row(br.rows[i]);
      auto dst = g.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = weight[br.rows[i]] * src[j];
    }
    if (!br.mask.empty()) g = apply_mask(g, br.mask);
    g = leaky_relu_backward(br.pre_relu, g, 0.0);
    g = linear_backward(shared_classifier, br.projected, g, gs);
    g = linear_backward(proj, br.input, g, gp);
    for (std::size_t i = 0; i < br.rows.size(); ++i) {
      std::copy_n(g.row(i).begin(), g.cols(), grad_in.row(br.rows[i]).begin());
    }
  };
  branch_back(c.audio, c.audio_weight, proj_audio, ga, result.grad_audio);
  branch_back(c.video, c.video_weight, proj_video, gv, result.grad_video);

  push_linear_grad(result.params, ga);
  push_linear_grad(result.params, gv);
  push_linear_grad(result.params, gs);
  return result;
}

std::unique_ptr<FusionHead> MultiViewHead::clone() const {
  return std::make_unique<MultiViewHead>(*this);
}

// ------------------------------------------------------------ free functions

std::unique_ptr<FusionHead> make_head(HeadKind kind, const HeadDims& dims, Rng& init,
                                      DropoutSpec dropout) {
  switch (kind) {
    case HeadKind::Mean: return std::make_unique<MeanFusionHead>(dims, init, dropout);
    case HeadKind::Mlp: return std::make_unique<MlpFusionHead>(dims, init, dropout);
    case HeadKind::MultiView: return std::make_unique<MultiViewHead>(dims, init, dropout);
  }
  throw ConfigError("make_head: unknown head kind");
}

Vector mean_fuse(const MeanFusionHead& head, const ModalityInput& input, Mode mode, Rng* rng,
                 NullPolicy nulls) {
  std::span<const ModalityInput> one(&input, 1);
  if (nulls == NullPolicy::Reject && !input.audio && !input.video) {
    throw DegenerateInputError("mean_fuse: both modalities are missing");
  }
  const Matrix out = head.forward_unchecked(one, mode, rng).output;
  return {out.row(0).begin(), out.row(0).end()};
}

Matrix mlp_fuse(MlpFusionHead& head, std::span<const ModalityInput> batch, Mode mode, Rng* rng) {
  return head.forward(batch, mode, rng).output;
}

Vector mlp_fuse(const MlpFusionHead& head, const ModalityInput& input) { return head.embed(input); }

Vector multiview_embed(const MultiViewHead& head, Modality modality, std::span<const double> x,
                       Mode mode, Rng* rng) {
  ModalityInput in;
  if (modality == Modality::Audio) {
    in.audio = Vector(x.begin(), x.end());
  } else {
    in.video = Vector(x.begin(), x.end());
  }
  const Matrix out = head.forward_const(std::span<const ModalityInput>(&in, 1), mode, rng).output;
  return {out.row(0).begin(), out.row(0).end()};
}

Vector multiview_joint(const MultiViewHead& head, const ModalityInput& input, Mode mode, Rng* rng) {
  if (!input.audio || !input.video) {
    throw DegenerateInputError("multiview_joint: needs both modalities; use multiview_embed");
  }
  const Matrix out = head.forward_const(std::span<const ModalityInput>(&input, 1), mode, rng).output;
  return {out.row(0).begin(), out.row(0).end()};
}

BackwardResult fusion_backward(const FusionHead& head, const ForwardCache& cache,
                               const Matrix& grad_output) {
  return head.backward(cache, grad_output);
}

}  // namespace avf
