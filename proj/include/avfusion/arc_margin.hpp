#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avfusion/core_math.hpp"
#include "avfusion/fusion_heads.hpp"
#include "avfusion/rng.hpp"

namespace avf {

// Additive angular margin classifier. Column j of `prototypes` represents
// class j; columns and embeddings are L2-normalized on use.
struct ArcMarginHead {
  Matrix prototypes;  // embed_dim x n_classes
  double scale = 16.0;
  double margin = 0.125;  // radians

  // Prototypes uniform on the unit sphere.
  static ArcMarginHead init(std::size_t embed_dim, std::size_t n_classes, Rng& rng,
                            double scale = 16.0, double margin = 0.125);

  std::size_t embed_dim() const noexcept { return prototypes.rows(); }
  std::size_t n_classes() const noexcept { return prototypes.cols(); }

  std::vector<ParamView> parameters();
  std::vector<ConstParamView> parameters() const;
};

struct LossOutput {
  double loss = 0.0;
  Vector logits;
  Vector cosines;  // cos(theta_j) before the margin
};

struct ArcMarginGrad {
  Vector embedding;
  Matrix prototypes;
  double loss = 0.0;
};

// s*cos(theta_j), with s*cos(theta_target + m) at the target. Past
// theta_target > pi - m the target term becomes s*(cos(theta) - m*sin(m)).
Vector arc_margin_logits(const ArcMarginHead& head, std::span<const double> embedding,
                         std::size_t target);
// s*cos(theta_j) for every class; used for argmax classification.
Vector cosine_logits(const ArcMarginHead& head, std::span<const double> embedding);
double softmax_cross_entropy(std::span<const double> logits, std::size_t target);
LossOutput arc_margin_loss(const ArcMarginHead& head, std::span<const double> embedding,
                           std::size_t target);
// Gradients with respect to the raw embedding and the raw prototype matrix.
ArcMarginGrad arc_margin_grad(const ArcMarginHead& head, std::span<const double> embedding,
                              std::size_t target);

// Batch form: returns weight * mean loss over rows. Writes
// d(weight * mean loss)/d(embedding row) into grad_embeddings and adds the
// prototype gradient into grad_prototypes. All-zero rows contribute zero
// loss and zero gradient but still count in the mean.
double arc_margin_batch(const ArcMarginHead& head, const Matrix& embeddings,
                        std::span<const std::size_t> labels, double weight, Matrix& grad_embeddings,
                        Matrix& grad_prototypes);

}  // namespace avf
