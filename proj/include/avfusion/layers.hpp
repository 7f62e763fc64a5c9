#pragma once

#include <cstddef>
#include <span>

#include "avfusion/core_math.hpp"
#include "avfusion/rng.hpp"

namespace avf {

enum class Mode { Train, Eval };

// y = W x + b, W is out_dim x in_dim.
struct LinearLayer {
  Matrix weight;
  Vector bias;

  LinearLayer() = default;
  LinearLayer(Matrix w, Vector b);
  // Weights and biases uniform in +-1/sqrt(in_dim).
  static LinearLayer init_uniform(std::size_t in_dim, std::size_t out_dim, Rng& rng);

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
};

struct LinearGrad {
  Matrix weight;
  Vector bias;
  explicit LinearGrad(const LinearLayer& layer)
      : weight(layer.out_dim(), layer.in_dim()), bias(layer.out_dim(), 0.0) {}
};

Vector linear_forward(const LinearLayer& layer, std::span<const double> x);
// Rows of x are samples: returns x W^T + b.
Matrix linear_forward(const LinearLayer& layer, const Matrix& x);
// Accumulates into grad, returns dL/dx.
Matrix linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& grad_y,
                       LinearGrad& grad);

struct BatchNormLayer {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t dim);
  std::size_t dim() const noexcept { return gamma.size(); }
};

struct BatchNormCache {
  Mode mode = Mode::Eval;
  Matrix normalized;  // x_hat
  Vector inv_std;
};

struct BatchNormGrad {
  Vector gamma;
  Vector beta;
  explicit BatchNormGrad(std::size_t dim) : gamma(dim, 0.0), beta(dim, 0.0) {}
};

// Train mode normalizes with the batch mean and population variance and folds
// the batch statistics into the running estimates (unbiased variance). Eval
// mode uses the running estimates and leaves them untouched.
Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& batch, Mode mode,
                         BatchNormCache* cache = nullptr);
// Eval-only overload for immutable layers.
Matrix batchnorm_forward(const BatchNormLayer& layer, const Matrix& batch);
Matrix batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                          const Matrix& grad_y, BatchNormGrad& grad);

Vector leaky_relu(std::span<const double> x, double slope);
Matrix leaky_relu(const Matrix& x, double slope);
// Uses the pre-activation to pick the branch.
Matrix leaky_relu_backward(const Matrix& pre, const Matrix& grad_y, double slope);

struct DropoutSpec {
  double probability = 0.1;
};

// Per-element multipliers: 0 for dropped, 1/(1-p) for kept. Element i is
// dropped when the i-th uniform draw falls below p.
Vector dropout_mask(const DropoutSpec& spec, std::size_t n, Rng& rng);
Vector dropout_apply(const DropoutSpec& spec, std::span<const double> x, Mode mode, Rng* rng);
// Train mode draws a mask (rows*cols) into mask_out when given. Eval is identity.
Matrix dropout_apply(const DropoutSpec& spec, const Matrix& x, Mode mode, Rng* rng,
                     Vector* mask_out = nullptr);
Matrix apply_mask(const Matrix& x, std::span<const double> mask);

}  // namespace avf
