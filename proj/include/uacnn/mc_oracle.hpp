#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uacnn/error.hpp"
#include "uacnn/linear_layers.hpp"
#include "uacnn/moment_tensor.hpp"
#include "uacnn/network.hpp"
#include "uacnn/rng.hpp"

// Sampling and quadrature references for the analytic layers. Nothing here
// calls the moment formulas: samples go through plain deterministic layer
// maps written independently of the analytic code.

namespace uacnn {

namespace reference {

// Scatter form: every input pixel pushes its contribution to the outputs
// whose window covers it.
inline void conv2d(const ConvParams& params, const Shape& in_shape, std::span<const double> x,
                   std::vector<double>& y) {
  const FilterGeometry& g = params.geometry();
  const std::size_t batch = in_shape[0], channels = params.in_channels(),
                    filters = params.out_channels();
  const std::size_t n = g.n(), k = g.k(), d = g.d(), s = g.s(), p = g.p();
  y.assign(batch * filters * d * d, 0.0);
  const auto w = params.weights();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t iy = 0; iy < n; ++iy) {
        for (std::size_t ix = 0; ix < n; ++ix) {
          const double v = x[((b * channels + c) * n + iy) * n + ix];
          for (std::size_t ky = 0; ky < k; ++ky) {
            if (iy + p < ky || (iy + p - ky) % s != 0) continue;
            const std::size_t oy = (iy + p - ky) / s;
            if (oy >= d) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              if (ix + p < kx || (ix + p - kx) % s != 0) continue;
              const std::size_t ox = (ix + p - kx) / s;
              if (ox >= d) continue;
              for (std::size_t f = 0; f < filters; ++f) {
                y[((b * filters + f) * d + oy) * d + ox] +=
                    w[((f * channels + c) * k + ky) * k + kx] * v;
              }
            }
          }
        }
      }
    }
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t j = 0; j < d * d; ++j) y[(b * filters + f) * d * d + j] += params.bias()[f];
    }
  }
}

inline void avg_pool2d(const FilterGeometry& g, const Shape& in_shape,
                       std::span<const double> x, std::vector<double>& y) {
  const std::size_t planes = in_shape[0] * in_shape[1];
  const std::size_t n = g.n(), k = g.k(), d = g.d(), s = g.s(), p = g.p();
  y.assign(planes * d * d, 0.0);
  const double area = static_cast<double>(k * k);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    for (std::size_t iy = 0; iy < n; ++iy) {
      for (std::size_t ix = 0; ix < n; ++ix) {
        const double v = x[(pl * n + iy) * n + ix] / area;
        for (std::size_t ky = 0; ky < k; ++ky) {
          if (iy + p < ky || (iy + p - ky) % s != 0 || (iy + p - ky) / s >= d) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            if (ix + p < kx || (ix + p - kx) % s != 0 || (ix + p - kx) / s >= d) continue;
            y[(pl * d + (iy + p - ky) / s) * d + (ix + p - kx) / s] += v;
          }
        }
      }
    }
  }
}

// Accumulates column by column: y[r, :] += x[r, i] * W[:, i].
inline void linear(const LinearParams& params, const Shape& in_shape, std::span<const double> x,
                   std::vector<double>& y) {
  const std::size_t rows = in_shape[0], in = params.in_features(), out = params.out_features();
  y.resize(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) y[r * out + o] = params.bias()[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double v = x[r * in + i];
      for (std::size_t o = 0; o < out; ++o) y[r * out + o] += params.weights()[o * in + i] * v;
    }
  }
}

/// Deterministic map of one (shape-bound) layer.
inline void apply(const LayerSpec& layer, const Shape& in_shape, std::span<const double> x,
                  std::vector<double>& y) {
  switch (layer.kind) {
    case LayerKind::AvgPool2d: avg_pool2d(*layer.geometry, in_shape, x, y); return;
    case LayerKind::Conv2d: conv2d(layer.conv(), in_shape, x, y); return;
    case LayerKind::Linear: linear(layer.fc(), in_shape, x, y); return;
    case LayerKind::Relu:
      y.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      return;
    case LayerKind::Sigmoid:
      y.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
      return;
    case LayerKind::Flatten:
      y.assign(x.begin(), x.end());
      return;
  }
  fail(ErrorKind::UnknownLayer, "unhandled layer kind");
}

/// Deterministic network output for a single input realization.
inline std::vector<double> forward(const NetworkSpec& net, std::span<const double> x) {
  std::vector<double> current(x.begin(), x.end()), next;
  Shape shape = net.input_shape();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    apply(net.layers()[i], shape, current, next);
    std::swap(current, next);
    shape = net.output_shapes()[i];
  }
  return current;
}

}  // namespace reference

/// Empirical element-wise moments of a sampled layer or network output.
struct McEstimate {
  Shape shape;
  std::vector<double> means;
  std::vector<double> variances;  // unbiased
  std::vector<double> se_mean;    // sd / sqrt(N)
  std::vector<double> se_var;     // var * sqrt(2 / (N - 1)), normal theory
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const McEstimate&, const McEstimate&) = default;
};

/// Draw `n` realizations of x ~ N(means, diag(variances)), push each through
/// the deterministic network, and accumulate Welford moments per element.
/// Single-threaded; bit-reproducible for a given (seed, n).
inline McEstimate sample_forward(const NetworkSpec& net, const MomentTensor& input,
                                 std::size_t n, std::uint64_t seed) {
  if (n < 2) fail(ErrorKind::InvalidArgument, "sample count must be >= 2");
  if (input.shape() != net.input_shape()) {
    fail(ErrorKind::ShapeMismatch, "oracle input: expected " + to_string(net.input_shape()) +
                                       ", got " + to_string(input.shape()));
  }
  std::vector<double> sd(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) sd[i] = std::sqrt(input.variances()[i]);

  const Shape& out_shape = net.output_shape();
  const std::size_t out_size = element_count(out_shape);
  std::vector<double> mean(out_size, 0.0), m2(out_size, 0.0);
  std::vector<double> draw(input.size());

  NormalStream normal(seed);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < draw.size(); ++i) {
      draw[i] = input.means()[i] + sd[i] * normal.next();
    }
    const std::vector<double> y = reference::forward(net, draw);
    const double count = static_cast<double>(t + 1);
    for (std::size_t j = 0; j < out_size; ++j) {
      const double delta = y[j] - mean[j];
      mean[j] += delta / count;
      m2[j] += delta * (y[j] - mean[j]);
    }
  }

  McEstimate est;
  est.shape = out_shape;
  est.samples = n;
  est.seed = seed;
  est.means = std::move(mean);
  est.variances.resize(out_size);
  est.se_mean.resize(out_size);
  est.se_var.resize(out_size);
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < out_size; ++j) {
    const double var = std::max(0.0, m2[j] / (nd - 1.0));
    est.variances[j] = var;
    est.se_mean[j] = std::sqrt(var / nd);
    est.se_var[j] = var * std::sqrt(2.0 / (nd - 1.0));
  }
  return est;
}

inline McEstimate sample_forward(const LayerSpec& layer, const MomentTensor& input,
                                 std::size_t n, std::uint64_t seed) {
  return sample_forward(NetworkSpec::make(input.shape(), {layer}), input, n, seed);
}

/// Nodes and weights for weight exp(-t^2) on the real line.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Newton iteration on the orthonormal Hermite recurrence with the usual
  /// asymptotic starting guesses for the largest roots.
  static GaussHermiteRule make(std::size_t order) {
    if (order < 1) fail(ErrorKind::InvalidArgument, "quadrature order must be >= 1");
    const int n = static_cast<int>(order);
    const double pim4 = 0.7511255444649425;  // pi^(-1/4)
    GaussHermiteRule rule{std::vector<double>(order), std::vector<double>(order)};
    double z = 0.0, pp = 0.0;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      if (i == 0) {
        z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
      } else if (i == 1) {
        z -= 1.14 * std::pow(n, 0.426) / z;
      } else if (i == 2) {
        z = 1.86 * z - 0.86 * rule.nodes[0];
      } else if (i == 3) {
        z = 1.91 * z - 0.91 * rule.nodes[1];
      } else {
        z = 2.0 * z - rule.nodes[i - 2];
      }
      for (int it = 0; it < 100; ++it) {
        double p1 = pim4, p2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
        }
        pp = std::sqrt(2.0 * n) * p2;
        const double prev = z;
        z = prev - p1 / pp;
        if (std::abs(z - prev) <= 1e-15 * std::max(1.0, std::abs(z))) break;
      }
      rule.nodes[i] = z;
      rule.nodes[n - 1 - i] = -z;
      rule.weights[i] = 2.0 / (pp * pp);
      rule.weights[n - 1 - i] = rule.weights[i];
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
  }

  /// E[f(x)] for x ~ N(mu, var), via x = mu + sqrt(2 var) t.
  double expectation(const std::function<double(double)>& f, double mu, double var) const {
    if (!(var >= 0.0)) fail(ErrorKind::NegativeVariance, "quadrature variance");
    if (var == 0.0) return checked(f(mu));
    const double scale = std::sqrt(2.0 * var);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * checked(f(mu + scale * nodes[i]));
    return acc / std::sqrt(std::numbers::pi);
  }

 private:
  static double checked(double v) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "integrand evaluation");
    return v;
  }
};

inline double gauss_hermite_expectation(const std::function<double(double)>& f, double mu,
                                        double var, std::size_t order) {
  return GaussHermiteRule::make(order).expectation(f, mu, var);
}

/// Mean, variance and fourth central moment of max(0, x), x ~ N(mu, var),
/// from the truncated-normal moment recursion
///   I_j = E[Z^j 1{Z > a}],  I_j = a^(j-1) phi(a) + (j - 1) I_(j-2).
/// Used for standard errors of sampled ReLU outputs; it is not the
/// closed form the layer evaluates.
struct RectifiedMoments {
  double mean = 0.0;
  double variance = 0.0;
  double central4 = 0.0;
};

inline RectifiedMoments rectified_gaussian_moments(double mu, double var) {
  if (var == 0.0) return {std::max(0.0, mu), 0.0, 0.0};
  const double sigma = std::sqrt(var);
  const double a = -mu / sigma;
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  double I[5];
  I[0] = 0.5 * std::erfc(a / std::numbers::sqrt2);
  I[1] = phi;
  for (int j = 2; j <= 4; ++j) I[j] = std::pow(a, j - 1) * phi + (j - 1) * I[j - 2];
  const double below = 0.5 * std::erfc(-a / std::numbers::sqrt2);  // P(Z <= a)

  const double mean = mu * I[0] + sigma * I[1];
  const double c = mu - mean;
  // E[(c + sigma Z)^m 1{Z > a}] by binomial expansion.
  auto shifted = [&](int m) {
    double acc = 0.0, binom = 1.0;
    for (int j = 0; j <= m; ++j) {
      acc += binom * std::pow(c, m - j) * std::pow(sigma, j) * I[j];
      binom = binom * (m - j) / (j + 1);
    }
    return acc;
  };
  const double variance = shifted(2) + mean * mean * below;
  const double central4 = shifted(4) + std::pow(mean, 4) * below;
  return {mean, std::max(0.0, variance), std::max(0.0, central4)};
}

}  // namespace uacnn
