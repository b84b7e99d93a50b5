#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "uacnn/error.hpp"
#include "uacnn/moment_tensor.hpp"

namespace uacnn {

struct GaussianScalar {
  double mu = 0.0;
  double var = 0.0;

  friend bool operator==(const GaussianScalar&, const GaussianScalar&) = default;
};

inline void validate(const GaussianScalar& x) {
  if (!std::isfinite(x.mu) || !std::isfinite(x.var)) {
    fail(ErrorKind::NonFinite, "gaussian scalar (" + std::to_string(x.mu) + ", " +
                                   std::to_string(x.var) + ")");
  }
  if (x.var < 0.0) {
    fail(ErrorKind::NegativeVariance, "gaussian scalar variance " + std::to_string(x.var));
  }
}

/// Squash coefficient for the sigmoid mean, s(mu / sqrt(1 + lambda * var)).
/// The default 3/pi^2 is the same squash the variance approximation uses.
struct SigmoidApproxConfig {
  double lambda = 3.0 / (std::numbers::pi * std::numbers::pi);

  static SigmoidApproxConfig with_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      fail(ErrorKind::InvalidArgument, "sigmoid lambda must be finite and > 0");
    }
    return SigmoidApproxConfig{lambda};
  }
};

/// Gauss error function.
inline double erf(double x) { return std::erf(x); }

/// Logistic function evaluated so that logistic(-x) == 1 - logistic(x)
/// holds bit-for-bit.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  return 1.0 - 1.0 / (1.0 + std::exp(x));
}

namespace detail {

inline double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace detail

/// Exact moments of max(0, x) for x ~ N(mu, var).
///
///   mean = sigma * phi(z) + mu * Phi(z)
///   E[h^2] = (mu^2 + var) * Phi(z) + mu * sigma * phi(z)
///
/// with z = mu / sigma and Phi(z) = (1 + erf(z / sqrt 2)) / 2. Both branches
/// are regrouped around the tail mass (erfc) so neither the mean nor the
/// variance loses precision far from the kink. var == 0 returns the
/// deterministic limit (max(0, mu), 0).
inline GaussianScalar ua_relu(const GaussianScalar& x) {
  validate(x);
  if (x.var == 0.0) return {std::max(0.0, x.mu), 0.0};

  const double sigma = std::sqrt(x.var);
  const double z = x.mu / sigma;
  const double phi = detail::std_normal_pdf(z);

  double mean = 0.0;
  double ratio = 0.0;  // variance / sigma^2
  if (z >= 0.0) {
    const double upper_tail = 0.5 * std::erfc(z / std::numbers::sqrt2);  // 1 - Phi(z)
    const double excess = std::max(0.0, phi - z * upper_tail);           // (mean - mu) / sigma
    mean = x.mu + sigma * excess;
    ratio = 1.0 + (z * z - 1.0) * upper_tail - z * phi - excess * excess;
  } else {
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);  // Phi(z)
    const double scaled_mean = std::max(0.0, phi + z * cdf);
    mean = sigma * scaled_mean;
    ratio = (1.0 + z * z) * cdf + z * phi - scaled_mean * scaled_mean;
  }
  return {mean, x.var * std::clamp(ratio, 0.0, 1.0)};
}

/// Approximate moments of the logistic s(x) for x ~ N(mu, var):
///
///   mean = s(mu / sqrt(1 + lambda * var))
///   var  = s(t) (1 - s(t)) (1 - c),  t = c * mu,  c = 1 / sqrt(1 + 3 var / pi^2)
///
/// Mean stays in (0, 1) and variance in [0, 1/4) as long as |t| is below the
/// point where s(t) rounds to 1 (about 36).
inline GaussianScalar ua_sigmoid(const GaussianScalar& x, const SigmoidApproxConfig& cfg = {}) {
  validate(x);
  const double mean = logistic(x.mu / std::sqrt(1.0 + cfg.lambda * x.var));

  const double eps = 3.0 * x.var / (std::numbers::pi * std::numbers::pi);
  const double root = std::sqrt(1.0 + eps);
  const double squash = 1.0 / root;
  const double one_minus_squash = eps / (root * (root + 1.0));
  const double s = logistic(x.mu * squash);
  return {mean, s * (1.0 - s) * one_minus_squash};
}

namespace detail {

template <typename Fn>
MomentTensor map_elements(const MomentTensor& input, Fn&& fn) {
  std::vector<double> means(input.size()), variances(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const GaussianScalar out = fn(GaussianScalar{input.means()[i], input.variances()[i]});
    means[i] = out.mu;
    variances[i] = out.var;
  }
  return finalize(input.shape(), std::move(means), std::move(variances));
}

}  // namespace detail

inline MomentTensor ua_relu(const MomentTensor& input) {
  return detail::map_elements(input, [](const GaussianScalar& x) { return ua_relu(x); });
}

inline MomentTensor ua_sigmoid(const MomentTensor& input, const SigmoidApproxConfig& cfg = {}) {
  return detail::map_elements(input,
                              [&cfg](const GaussianScalar& x) { return ua_sigmoid(x, cfg); });
}

}  // namespace uacnn
