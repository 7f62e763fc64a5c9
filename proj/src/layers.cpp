#include "avfusion/layers.hpp"

#include <cmath>
#include <string>

#include "avfusion/errors.hpp"

namespace avf {

LinearLayer::LinearLayer(Matrix w, Vector b) : weight(std::move(w)), bias(std::move(b)) {
  if (weight.rows() != bias.size()) {
    throw ShapeError("linear layer: weight has " + std::to_string(weight.rows()) +
                     " rows but bias has " + std::to_string(bias.size()) + " entries");
  }
}

LinearLayer LinearLayer::init_uniform(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(out_dim, in_dim);
  for (double& x : w.values()) x = dist(rng);
  Vector b(out_dim);
  for (double& x : b) x = dist(rng);
  return {std::move(w), std::move(b)};
}

Vector linear_forward(const LinearLayer& layer, std::span<const double> x) {
  if (x.size() != layer.in_dim()) {
    throw ShapeError("linear_forward: input dim " + std::to_string(x.size()) + ", layer expects " +
                     std::to_string(layer.in_dim()));
  }
  Vector y(layer.bias);
  for (std::size_t o = 0; o < layer.out_dim(); ++o) y[o] += dot(layer.weight.row(o), x);
  return y;
}

Matrix linear_forward(const LinearLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw ShapeError("linear_forward: input dim " + std::to_string(x.cols()) + ", layer expects " +
                     std::to_string(layer.in_dim()));
  }
  Matrix y(x.rows(), layer.out_dim());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto xr = x.row(n);
    auto yr = y.row(n);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      yr[o] = layer.bias[o] + dot(layer.weight.row(o), xr);
    }
  }
  return y;
}

Matrix linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& grad_y,
                       LinearGrad& grad) {
  if (grad_y.cols() != layer.out_dim() || x.rows() != grad_y.rows() ||
      x.cols() != layer.in_dim()) {
    throw ShapeError("linear_backward: shape mismatch");
  }
  Matrix grad_x(x.rows(), layer.in_dim());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto xr = x.row(n);
    auto gy = grad_y.row(n);
    auto gx = grad_x.row(n);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      const double g = gy[o];
      if (g == 0.0) continue;
      grad.bias[o] += g;
      auto gw = grad.weight.row(o);
      auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < xr.size(); ++i) {
        gw[i] += g * xr[i];
        gx[i] += g * w[i];
      }
    }
  }
  return grad_x;
}

BatchNormLayer::BatchNormLayer(std::size_t dim)
    : gamma(dim, 1.0), beta(dim, 0.0), running_mean(dim, 0.0), running_var(dim, 1.0) {}

namespace {

void check_bn_width(const BatchNormLayer& layer, const Matrix& batch) {
  if (batch.cols() != layer.dim()) {
    throw ShapeError("batchnorm: input dim " + std::to_string(batch.cols()) + ", layer has " +
                     std::to_string(layer.dim()));
  }
}

Matrix batchnorm_eval(const BatchNormLayer& layer, const Matrix& batch, BatchNormCache* cache) {
  check_bn_width(layer, batch);
  const std::size_t d = layer.dim();
  Vector inv_std(d);
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(layer.running_var[j] + layer.eps);
  Matrix x_hat(batch.rows(), d);
  Matrix out(batch.rows(), d);
  for (std::size_t n = 0; n < batch.rows(); ++n) {
    for (std::size_t j = 0; j < d; ++j) {
      x_hat(n, j) = (batch(n, j) - layer.running_mean[j]) * inv_std[j];
      out(n, j) = layer.gamma[j] * x_hat(n, j) + layer.beta[j];
    }
  }
  if (cache) *cache = {Mode::Eval, std::move(x_hat), std::move(inv_std)};
  return out;
}

}  // namespace

Matrix batchnorm_forward(const BatchNormLayer& layer, const Matrix& batch) {
  return batchnorm_eval(layer, batch, nullptr);
}

Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& batch, Mode mode,
                         BatchNormCache* cache) {
  if (mode == Mode::Eval) return batchnorm_eval(layer, batch, cache);
  check_bn_width(layer, batch);
  const std::size_t n = batch.rows();
  if (n < 2) {
    throw DegenerateBatchError("batchnorm: train mode needs at least 2 samples, got " +
                               std::to_string(n));
  }
  const std::size_t d = layer.dim();
  Vector mean(d, 0.0), var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += batch(r, j);
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = batch(r, j) - mean[j];
      var[j] += c * c;
    }
  for (double& v : var) v /= static_cast<double>(n);

  Vector inv_std(d);
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + layer.eps);
  Matrix x_hat(n, d);
  Matrix out(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      x_hat(r, j) = (batch(r, j) - mean[j]) * inv_std[j];
      out(r, j) = layer.gamma[j] * x_hat(r, j) + layer.beta[j];
    }

  const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < d; ++j) {
    layer.running_mean[j] = (1.0 - layer.momentum) * layer.running_mean[j] + layer.momentum * mean[j];
    layer.running_var[j] =
        (1.0 - layer.momentum) * layer.running_var[j] + layer.momentum * var[j] * unbias;
  }
  if (cache) *cache = {Mode::Train, std::move(x_hat), std::move(inv_std)};
  return out;
}

Matrix batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                          const Matrix& grad_y, BatchNormGrad& grad) {
  const Matrix& x_hat = cache.normalized;
  if (grad_y.rows() != x_hat.rows() || grad_y.cols() != layer.dim()) {
    throw ShapeError("batchnorm_backward: shape mismatch");
  }
  const std::size_t n = grad_y.rows();
  const std::size_t d = layer.dim();
  Vector sum_dy(d, 0.0), sum_dy_xhat(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      sum_dy[j] += grad_y(r, j);
      sum_dy_xhat[j] += grad_y(r, j) * x_hat(r, j);
    }
  for (std::size_t j = 0; j < d; ++j) {
    grad.gamma[j] += sum_dy_xhat[j];
    grad.beta[j] += sum_dy[j];
  }

  Matrix grad_x(n, d);
  if (cache.mode == Mode::Eval) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) grad_x(r, j) = grad_y(r, j) * layer.gamma[j] * cache.inv_std[j];
    return grad_x;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      grad_x(r, j) = layer.gamma[j] * cache.inv_std[j] * inv_n *
                     (static_cast<double>(n) * grad_y(r, j) - sum_dy[j] - x_hat(r, j) * sum_dy_xhat[j]);
    }
  return grad_x;
}

Vector leaky_relu(std::span<const double> x, double slope) {
  Vector y(x.begin(), x.end());
  for (double& v : y)
    if (v < 0.0) v *= slope;
  return y;
}

Matrix leaky_relu(const Matrix& x, double slope) {
  Matrix y(x);
  for (double& v : y.values())
    if (v < 0.0) v *= slope;
  return y;
}

Matrix leaky_relu_backward(const Matrix& pre, const Matrix& grad_y, double slope) {
  Matrix g(grad_y);
  auto p = pre.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < gv.size(); ++i)
    if (p[i] < 0.0) gv[i] *= slope;
  return g;
}

Vector dropout_mask(const DropoutSpec& spec, std::size_t n, Rng& rng) {
  if (spec.probability < 0.0 || spec.probability >= 1.0) {
    throw ConfigError("dropout probability must lie in [0, 1)");
  }
  const double keep_scale = 1.0 / (1.0 - spec.probability);
  Vector mask(n);
  for (double& m : mask) m = uniform01(rng) < spec.probability ? 0.0 : keep_scale;
  return mask;
}

Vector dropout_apply(const DropoutSpec& spec, std::span<const double> x, Mode mode, Rng* rng) {
  Vector y(x.begin(), x.end());
  if (mode == Mode::Eval) return y;
  if (!rng) throw ConsistencyError("dropout_apply: train mode needs a random stream");
  const Vector mask = dropout_mask(spec, y.size(), *rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return y;
}

Matrix dropout_apply(const DropoutSpec& spec, const Matrix& x, Mode mode, Rng* rng,
                     Vector* mask_out) {
  if (mode == Mode::Eval) return x;
  if (!rng) throw ConsistencyError("dropout_apply: train mode needs a random stream");
  Vector mask = dropout_mask(spec, x.size(), *rng);
  Matrix y = apply_mask(x, mask);
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

Matrix apply_mask(const Matrix& x, std::span<const double> mask) {
  if (mask.size() != x.size()) throw ShapeError("apply_mask: mask size mismatch");
  Matrix y(x);
  auto v = y.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
  return y;
}

}  // namespace avf
