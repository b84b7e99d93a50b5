#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uacnn/error.hpp"
#include "uacnn/moment_tensor.hpp"

// Exact moment propagation through average pooling, 2D convolution and
// fully-connected layers. Inputs are independent Gaussians, so each output is
// Gaussian with mean w'mu + b and variance (w^2)'sigma^2.

namespace uacnn {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, what);
  }
}

inline std::vector<double> squared(std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * values[i];
  return out;
}

// Cross-correlation of an NCHW map with an F x C x k x k kernel. Padded
// positions contribute nothing (they are deterministic zeros).
inline std::vector<double> correlate2d(std::span<const double> input, std::size_t batch,
                                       std::size_t channels, const FilterGeometry& g,
                                       std::span<const double> weights,
                                       std::span<const double> bias,
                                       std::size_t filters) {
  const std::size_t n = g.n(), k = g.k(), d = g.d();
  std::vector<double> out(batch * filters * d * d);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t oy = 0; oy < d; ++oy) {
        for (std::size_t ox = 0; ox < d; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[f];
          for (std::size_t c = 0; c < channels; ++c) {
            const double* plane = input.data() + (b * channels + c) * n * n;
            const double* kernel = weights.data() + (f * channels + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.s() + ky) -
                                        static_cast<std::ptrdiff_t>(g.p());
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(n)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.s() + kx) -
                                          static_cast<std::ptrdiff_t>(g.p());
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(n)) continue;
                acc += kernel[ky * k + kx] * plane[iy * n + ix];
              }
            }
          }
          out[((b * filters + f) * d + oy) * d + ox] = acc;
        }
      }
    }
  }
  return out;
}

// Sum over each k x k window divided by k^2 (padding counts toward the divisor).
inline std::vector<double> average_pool(std::span<const double> input, std::size_t batch,
                                        std::size_t channels, const FilterGeometry& g) {
  const std::size_t n = g.n(), k = g.k(), d = g.d();
  const double inv_area = 1.0 / static_cast<double>(k * k);
  std::vector<double> out(batch * channels * d * d);
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const double* in = input.data() + plane * n * n;
    for (std::size_t oy = 0; oy < d; ++oy) {
      for (std::size_t ox = 0; ox < d; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.s() + ky) -
                                    static_cast<std::ptrdiff_t>(g.p());
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(n)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.s() + kx) -
                                      static_cast<std::ptrdiff_t>(g.p());
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(n)) continue;
            acc += in[iy * n + ix];
          }
        }
        out[(plane * d + oy) * d + ox] = acc * inv_area;
      }
    }
  }
  return out;
}

// rows x in  times  (out x in)^T  [+ bias]
inline std::vector<double> affine(std::span<const double> input, std::size_t rows,
                                  std::size_t in_features, std::size_t out_features,
                                  std::span<const double> weights,
                                  std::span<const double> bias) {
  std::vector<double> out(rows * out_features);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data() + r * in_features;
    for (std::size_t o = 0; o < out_features; ++o) {
      const double* w = weights.data() + o * in_features;
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < in_features; ++i) acc += w[i] * x[i];
      out[r * out_features + o] = acc;
    }
  }
  return out;
}

inline void check_spatial_input(const MomentTensor& input, std::size_t channels,
                                const FilterGeometry& g, const char* op) {
  const Shape& s = input.shape();
  if (s.size() != 4 || s[1] != channels || s[2] != g.n() || s[3] != g.n()) {
    fail(ErrorKind::ShapeMismatch,
         std::string(op) + " expects [N," + std::to_string(channels) + "," +
             std::to_string(g.n()) + "," + std::to_string(g.n()) + "], got " +
             to_string(s));
  }
}

}  // namespace detail

/// Convolution parameters. Only W and b are stored; the variance path's W^2
/// is derived from W on every call.
class ConvParams {
 public:
  static ConvParams make(std::size_t in_channels, std::size_t out_channels,
                         FilterGeometry geometry, std::vector<double> weights,
                         std::vector<double> bias) {
    const std::size_t k = geometry.k();
    if (in_channels == 0 || out_channels == 0) {
      fail(ErrorKind::InvalidArgument, "conv2d needs at least one input and output channel");
    }
    if (weights.size() != out_channels * in_channels * k * k) {
      fail(ErrorKind::ShapeMismatch,
           "conv2d weights: expected " + std::to_string(out_channels * in_channels * k * k) +
               " values, got " + std::to_string(weights.size()));
    }
    if (bias.size() != out_channels) {
      fail(ErrorKind::ShapeMismatch, "conv2d bias: expected " +
                                         std::to_string(out_channels) + " values, got " +
                                         std::to_string(bias.size()));
    }
    detail::require_finite(weights, "conv2d weights");
    detail::require_finite(bias, "conv2d bias");
    return ConvParams(in_channels, out_channels, geometry, std::move(weights),
                      std::move(bias));
  }

  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }
  const FilterGeometry& geometry() const noexcept { return geometry_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> bias() const noexcept { return bias_; }

  std::vector<double> squared_weights() const { return detail::squared(weights_); }

  /// Learnable values: F*C*k*k weights plus F biases.
  std::size_t parameter_count() const noexcept { return weights_.size() + bias_.size(); }

  /// Same parameters applied to a square input of size n.
  ConvParams with_input(std::size_t n) const {
    return ConvParams(in_channels_, out_channels_, geometry_.with_input(n), weights_, bias_);
  }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;

 private:
  ConvParams(std::size_t in_channels, std::size_t out_channels, FilterGeometry geometry,
             std::vector<double> weights, std::vector<double> bias)
      : in_channels_(in_channels),
        out_channels_(out_channels),
        geometry_(geometry),
        weights_(std::move(weights)),
        bias_(std::move(bias)) {}

  std::size_t in_channels_;
  std::size_t out_channels_;
  FilterGeometry geometry_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Fully-connected parameters: W is out_features x in_features, row-major.
class LinearParams {
 public:
  static LinearParams make(std::size_t in_features, std::size_t out_features,
                           std::vector<double> weights, std::vector<double> bias) {
    if (in_features == 0 || out_features == 0) {
      fail(ErrorKind::InvalidArgument, "linear needs at least one input and output feature");
    }
    if (weights.size() != in_features * out_features) {
      fail(ErrorKind::ShapeMismatch,
           "linear weights: expected " + std::to_string(in_features * out_features) +
               " values, got " + std::to_string(weights.size()));
    }
    if (bias.size() != out_features) {
      fail(ErrorKind::ShapeMismatch, "linear bias: expected " +
                                         std::to_string(out_features) + " values, got " +
                                         std::to_string(bias.size()));
    }
    detail::require_finite(weights, "linear weights");
    detail::require_finite(bias, "linear bias");
    return LinearParams(in_features, out_features, std::move(weights), std::move(bias));
  }

  std::size_t in_features() const noexcept { return in_features_; }
  std::size_t out_features() const noexcept { return out_features_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> bias() const noexcept { return bias_; }
  std::vector<double> squared_weights() const { return detail::squared(weights_); }
  std::size_t parameter_count() const noexcept { return weights_.size() + bias_.size(); }

  friend bool operator==(const LinearParams&, const LinearParams&) = default;

 private:
  LinearParams(std::size_t in_features, std::size_t out_features,
               std::vector<double> weights, std::vector<double> bias)
      : in_features_(in_features),
        out_features_(out_features),
        weights_(std::move(weights)),
        bias_(std::move(bias)) {}

  std::size_t in_features_;
  std::size_t out_features_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Average pooling over [N,C,n,n]. Means are pooled as usual; variances are
/// pooled and scaled by a further 1/k^2, giving sum(sigma^2)/k^4 per window.
inline MomentTensor ua_avg_pool2d(const MomentTensor& input, const FilterGeometry& geometry) {
  if (input.rank() != 4) {
    fail(ErrorKind::ShapeMismatch, "avg_pool2d expects a rank-4 input, got " +
                                       to_string(input.shape()));
  }
  const std::size_t batch = input.shape()[0], channels = input.shape()[1];
  detail::check_spatial_input(input, channels, geometry, "avg_pool2d");

  auto means = detail::average_pool(input.means(), batch, channels, geometry);
  auto variances = detail::average_pool(input.variances(), batch, channels, geometry);
  const double scale = 1.0 / static_cast<double>(geometry.k() * geometry.k());
  for (double& v : variances) v *= scale;

  return detail::finalize({batch, channels, geometry.d(), geometry.d()}, std::move(means),
                          std::move(variances));
}

/// Two standard convolutions: W and b over the means map, W^2 with zero bias
/// over the variances map. Contributions sum over input channels.
inline MomentTensor ua_conv2d(const MomentTensor& input, const ConvParams& params) {
  const FilterGeometry& g = params.geometry();
  detail::check_spatial_input(input, params.in_channels(), g, "conv2d");
  const std::size_t batch = input.shape()[0];

  auto means = detail::correlate2d(input.means(), batch, params.in_channels(), g,
                                   params.weights(), params.bias(), params.out_channels());
  const auto squared = params.squared_weights();
  auto variances = detail::correlate2d(input.variances(), batch, params.in_channels(), g,
                                       squared, {}, params.out_channels());

  return detail::finalize({batch, params.out_channels(), g.d(), g.d()}, std::move(means),
                          std::move(variances));
}

/// M_Y = M_X W^T + b and V_Y = V_X (W^2)^T over a [batch, in_features] input.
inline MomentTensor ua_linear(const MomentTensor& input, const LinearParams& params) {
  const Shape& s = input.shape();
  if (s.size() != 2 || s[1] != params.in_features()) {
    fail(ErrorKind::ShapeMismatch,
         "linear expects [N," + std::to_string(params.in_features()) + "], got " +
             to_string(s));
  }
  const std::size_t rows = s[0];
  auto means = detail::affine(input.means(), rows, params.in_features(),
                              params.out_features(), params.weights(), params.bias());
  const auto squared = params.squared_weights();
  auto variances = detail::affine(input.variances(), rows, params.in_features(),
                                  params.out_features(), squared, {});
  return detail::finalize({rows, params.out_features()}, std::move(means),
                          std::move(variances));
}

}  // namespace uacnn
