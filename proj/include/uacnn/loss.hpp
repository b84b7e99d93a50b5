#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "uacnn/error.hpp"
#include "uacnn/moment_tensor.hpp"
#include "uacnn/nonlinear_layers.hpp"

namespace uacnn {

struct BceInput {
  GaussianScalar score;  // pre-sigmoid logit
  int label = 1;         // 0 or 1
};

struct LossMoments {
  double expected_loss = 0.0;
  double loss_at_mean = 0.0;

  double jensen_gap() const noexcept { return expected_loss - loss_at_mean; }
};

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline void validate_label(int label) {
  if (label != 0 && label != 1) {
    fail(ErrorKind::InvalidArgument, "label must be 0 or 1, got " + std::to_string(label));
  }
}

/// -[y log s(x) + (1 - y) log(1 - s(x))] = -log s(x) + x (1 - y).
/// Written per label as softplus(-x) or softplus(x), which are the two cases
/// of that sum and keep bce(x, 1) == bce(-x, 0) exact.
inline double bce_loss(double score, int label) {
  validate_label(label);
  if (!std::isfinite(score)) fail(ErrorKind::NonFinite, "bce score");
  return label == 1 ? softplus(-score) : softplus(score);
}

/// Second-order expansion of -log s(x) around the mean:
///   E[l] ~ l(mu) + 1/2 s(mu) (1 - s(mu)) var.
/// The curvature term is added on top of the stable loss at the mean.
inline LossMoments ua_bce_loss(const BceInput& input) {
  validate(input.score);
  validate_label(input.label);
  const double at_mean = bce_loss(input.score.mu, input.label);
  const double s = logistic(input.score.mu);
  const double gap = 0.5 * (s * (1.0 - s)) * input.score.var;
  return {at_mean + gap, at_mean};
}

/// Batch reduction: arithmetic mean of the per-sample results.
inline LossMoments ua_bce_loss(const MomentTensor& scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorKind::ShapeMismatch, std::to_string(scores.size()) + " scores but " +
                                       std::to_string(labels.size()) + " labels");
  }
  if (scores.size() == 0) fail(ErrorKind::InvalidArgument, "empty batch");
  LossMoments total;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const LossMoments one =
        ua_bce_loss(BceInput{{scores.means()[i], scores.variances()[i]}, labels[i]});
    total.expected_loss += one.expected_loss;
    total.loss_at_mean += one.loss_at_mean;
  }
  const double n = static_cast<double>(scores.size());
  return {total.expected_loss / n, total.loss_at_mean / n};
}

}  // namespace uacnn
