#include "avfusion/arc_margin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avfusion/errors.hpp"

namespace avf {

ArcMarginHead ArcMarginHead::init(std::size_t embed_dim, std::size_t n_classes, Rng& rng,
                                  double scale, double margin) {
  if (scale <= 0.0) throw ConfigError("arc-margin scale must be positive");
  if (margin < 0.0 || margin >= std::numbers::pi / 2) {
    throw ConfigError("arc-margin margin must lie in [0, pi/2)");
  }
  std::normal_distribution<double> normal;
  ArcMarginHead head{Matrix(embed_dim, n_classes), scale, margin};
  for (std::size_t j = 0; j < n_classes; ++j) {
    Vector col(embed_dim);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& x : col) x = normal(rng);
      norm = l2_norm(col);
    }
    for (std::size_t i = 0; i < embed_dim; ++i) head.prototypes(i, j) = col[i] / norm;
  }
  return head;
}

std::vector<ParamView> ArcMarginHead::parameters() {
  return {{"arc.prototypes", prototypes.rows(), prototypes.cols(), prototypes.values()}};
}

std::vector<ConstParamView> ArcMarginHead::parameters() const {
  return {{"arc.prototypes", prototypes.rows(), prototypes.cols(), prototypes.values()}};
}

namespace {

struct UnitPrototypes {
  Matrix unit;  // embed_dim x n_classes
  Vector norms;
};

UnitPrototypes normalize_columns(const Matrix& w) {
  UnitPrototypes u{Matrix(w.rows(), w.cols()), Vector(w.cols(), 0.0)};
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, j) * w(i, j);
    const double n = std::sqrt(s);
    if (n == 0.0) throw DegenerateInputError("arc-margin: prototype column " + std::to_string(j) + " is zero");
    u.norms[j] = n;
    for (std::size_t i = 0; i < w.rows(); ++i) u.unit(i, j) = w(i, j) / n;
  }
  return u;
}

struct TargetTerm {
  double value;       // cos(theta + m) or its fallback
  double derivative;  // d value / d cos(theta)
};

TargetTerm margin_term(double cos_t, double margin) {
  const double cos_m = std::cos(margin);
  const double sin_m = std::sin(margin);
  if (cos_t < std::cos(std::numbers::pi - margin)) {
    return {cos_t - margin * sin_m, 1.0};
  }
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double value = cos_t * cos_m - sin_t * sin_m;
  if (sin_m == 0.0) return {value, cos_m};
  return {value, cos_m + sin_m * cos_t / std::max(sin_t, 1e-12)};
}

Vector unit_embedding(const ArcMarginHead& head, std::span<const double> embedding, double* norm) {
  if (embedding.size() != head.embed_dim()) {
    throw ShapeError("arc-margin: embedding dim " + std::to_string(embedding.size()) + ", head expects " +
                     std::to_string(head.embed_dim()));
  }
  const double n = l2_norm(embedding);
  if (n == 0.0) throw DegenerateInputError("arc-margin: zero embedding");
  if (norm) *norm = n;
  Vector e(embedding.begin(), embedding.end());
  for (double& x : e) x /= n;
  return e;
}

Vector cosines_of(const UnitPrototypes& u, const Vector& e_hat) {
  Vector c(u.unit.cols(), 0.0);
  for (std::size_t i = 0; i < u.unit.rows(); ++i) {
    auto row = u.unit.row(i);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += e_hat[i] * row[j];
  }
  for (double& x : c) x = std::clamp(x, -1.0, 1.0);
  return c;
}

void check_target(const ArcMarginHead& head, std::size_t target) {
  if (target >= head.n_classes()) {
    throw LabelError("arc-margin: class " + std::to_string(target) + " out of range (" +
                     std::to_string(head.n_classes()) + " classes)");
  }
}

// Softmax probabilities minus one-hot, and the loss.
double softmax_grad(std::span<const double> logits, std::size_t target, Vector& grad) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  grad.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    grad[j] = std::exp(logits[j] - mx);
    sum += grad[j];
  }
  for (double& g : grad) g /= sum;
  const double loss = mx + std::log(sum) - logits[target];
  grad[target] -= 1.0;
  return loss;
}

// Per-sample core shared by the single and batch paths. Adds
// weight * dL/d(unit prototypes) into grad_unit and returns dL/d(raw embedding)
// scaled by weight.
double sample_grad(const ArcMarginHead& head, const UnitPrototypes& u,
                   std::span<const double> embedding, std::size_t target, double weight,
                   std::span<double> grad_embedding, Matrix& grad_unit) {
  double norm = 0.0;
  const Vector e_hat = unit_embedding(head, embedding, &norm);
  const Vector cos = cosines_of(u, e_hat);
  const TargetTerm t = margin_term(cos[target], head.margin);
  Vector logits(cos.size());
  for (std::size_t j = 0; j < cos.size(); ++j) logits[j] = head.scale * cos[j];
  logits[target] = head.scale * t.value;

  Vector dz;
  const double loss = softmax_grad(logits, target, dz);
  Vector dcos(cos.size());
  for (std::size_t j = 0; j < cos.size(); ++j) dcos[j] = weight * head.scale * dz[j];
  dcos[target] *= t.derivative;

  Vector g_hat(e_hat.size(), 0.0);
  for (std::size_t i = 0; i < e_hat.size(); ++i) {
    auto urow = u.unit.row(i);
    auto grow = grad_unit.row(i);
    for (std::size_t j = 0; j < cos.size(); ++j) {
      g_hat[i] += dcos[j] * urow[j];
      grow[j] += dcos[j] * e_hat[i];
    }
  }
  const double radial = dot(e_hat, g_hat);
  for (std::size_t i = 0; i < e_hat.size(); ++i) grad_embedding[i] = (g_hat[i] - e_hat[i] * radial) / norm;
  return loss;
}

// Chain dL/d(unit column) back through the column normalization.
void unit_to_raw(const UnitPrototypes& u, const Matrix& grad_unit, Matrix& grad_raw) {
  for (std::size_t j = 0; j < u.unit.cols(); ++j) {
    double radial = 0.0;
    for (std::size_t i = 0; i < u.unit.rows(); ++i) radial += u.unit(i, j) * grad_unit(i, j);
    for (std::size_t i = 0; i < u.unit.rows(); ++i) {
      grad_raw(i, j) += (grad_unit(i, j) - u.unit(i, j) * radial) / u.norms[j];
    }
  }
}

}  // namespace

Vector cosine_logits(const ArcMarginHead& head, std::span<const double> embedding) {
  const auto u = normalize_columns(head.prototypes);
  Vector logits = cosines_of(u, unit_embedding(head, embedding, nullptr));
  for (double& x : logits) x *= head.scale;
  return logits;
}

Vector arc_margin_logits(const ArcMarginHead& head, std::span<const double> embedding,
                         std::size_t target) {
  return arc_margin_loss(head, embedding, target).logits;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) throw LabelError("softmax_cross_entropy: target out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return mx + std::log(sum) - logits[target];
}

LossOutput arc_margin_loss(const ArcMarginHead& head, std::span<const double> embedding,
                           std::size_t target) {
  check_target(head, target);
  const auto u = normalize_columns(head.prototypes);
  LossOutput out;
  out.cosines = cosines_of(u, unit_embedding(head, embedding, nullptr));
  out.logits.resize(out.cosines.size());
  for (std::size_t j = 0; j < out.cosines.size(); ++j) out.logits[j] = head.scale * out.cosines[j];
  out.logits[target] = head.scale * margin_term(out.cosines[target], head.margin).value;
  out.loss = softmax_cross_entropy(out.logits, target);
  return out;
}

ArcMarginGrad arc_margin_grad(const ArcMarginHead& head, std::span<const double> embedding,
                              std::size_t target) {
  check_target(head, target);
  const auto u = normalize_columns(head.prototypes);
  ArcMarginGrad g{Vector(head.embed_dim(), 0.0), Matrix(head.embed_dim(), head.n_classes()), 0.0};
  Matrix grad_unit(head.embed_dim(), head.n_classes());
  g.loss = sample_grad(head, u, embedding, target, 1.0, g.embedding, grad_unit);
  unit_to_raw(u, grad_unit, g.prototypes);
  return g;
}

double arc_margin_batch(const ArcMarginHead& head, const Matrix& embeddings,
                        std::span<const std::size_t> labels, double weight, Matrix& grad_embeddings,
                        Matrix& grad_prototypes) {
  if (embeddings.rows() != labels.size() || embeddings.rows() == 0) {
    throw ShapeError("arc_margin_batch: need one label per embedding row");
  }
  if (grad_prototypes.rows() != head.embed_dim() || grad_prototypes.cols() != head.n_classes()) {
    throw ShapeError("arc_margin_batch: prototype gradient has the wrong shape");
  }
  for (std::size_t label : labels) check_target(head, label);
  const auto u = normalize_columns(head.prototypes);
  grad_embeddings = Matrix(embeddings.rows(), embeddings.cols());
  Matrix grad_unit(head.embed_dim(), head.n_classes());
  const double w = weight / static_cast<double>(embeddings.rows());
  double total = 0.0;
  for (std::size_t n = 0; n < embeddings.rows(); ++n) {
    if (is_zero(embeddings.row(n))) continue;  // dead ReLU output: no direction, no gradient
    total += sample_grad(head, u, embeddings.row(n), labels[n], w, grad_embeddings.row(n), grad_unit);
  }
  unit_to_raw(u, grad_unit, grad_prototypes);
  return weight * total / static_cast<double>(embeddings.rows());
}

}  // namespace avf
