#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uacnn/error.hpp"

namespace uacnn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Element-wise independent Gaussians: one mean and one variance per element,
/// both stored flat and row-major over `shape`. Immutable once built; every
/// instance satisfies equal sizes, finite entries and variances >= 0.
class MomentTensor {
 public:
  static MomentTensor create(Shape shape, std::vector<double> means,
                             std::vector<double> variances) {
    const std::size_t count = element_count(shape);
    if (means.size() != variances.size() || means.size() != count) {
      fail(ErrorKind::ShapeMismatch,
           "shape " + to_string(shape) + " holds " + std::to_string(count) +
               " elements, got " + std::to_string(means.size()) + " means and " +
               std::to_string(variances.size()) + " variances");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(means[i]) || !std::isfinite(variances[i])) {
        fail(ErrorKind::NonFinite, "element " + std::to_string(i));
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (variances[i] < 0.0) {
        fail(ErrorKind::NegativeVariance,
             "element " + std::to_string(i) + " has variance " +
                 std::to_string(variances[i]));
      }
    }
    return MomentTensor(std::move(shape), std::move(means), std::move(variances));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return means_.size(); }
  std::span<const double> means() const noexcept { return means_; }
  std::span<const double> variances() const noexcept { return variances_; }

  double mean(std::size_t i) const { return means_.at(i); }
  double variance(std::size_t i) const { return variances_.at(i); }

  /// Same data viewed under another shape with the same element count.
  MomentTensor reshaped(Shape shape) const {
    return create(std::move(shape), means_, variances_);
  }

  friend bool operator==(const MomentTensor&, const MomentTensor&) = default;

 private:
  MomentTensor(Shape shape, std::vector<double> means, std::vector<double> variances)
      : shape_(std::move(shape)),
        means_(std::move(means)),
        variances_(std::move(variances)) {}

  Shape shape_;
  std::vector<double> means_;
  std::vector<double> variances_;
};

inline MomentTensor make_moment_tensor(Shape shape, std::vector<double> means,
                                       std::vector<double> variances) {
  return MomentTensor::create(std::move(shape), std::move(means), std::move(variances));
}

/// One-dimensional tensor whose shape is taken from `means`.
inline MomentTensor make_moment_tensor(std::vector<double> means,
                                       std::vector<double> variances) {
  Shape shape{means.size()};
  return MomentTensor::create(std::move(shape), std::move(means), std::move(variances));
}

/// Raise every variance below `floor` to `floor`. Accepts raw arrays so that
/// round-off negatives can be repaired before a tensor is validated.
inline std::vector<double> clamp_variances(std::vector<double> variances, double floor) {
  if (!(floor >= 0.0)) fail(ErrorKind::InvalidArgument, "variance floor must be >= 0");
  for (double& v : variances) v = std::max(v, floor);
  return variances;
}

inline MomentTensor clamp_variances(const MomentTensor& t, double floor) {
  auto variances = clamp_variances(
      std::vector<double>(t.variances().begin(), t.variances().end()), floor);
  return MomentTensor::create(t.shape(),
                              std::vector<double>(t.means().begin(), t.means().end()),
                              std::move(variances));
}

namespace detail {

// Layer outputs go through here: negatives from round-off are clamped to 0.
inline MomentTensor finalize(Shape shape, std::vector<double> means,
                             std::vector<double> variances) {
  return MomentTensor::create(std::move(shape), std::move(means),
                              clamp_variances(std::move(variances), 0.0));
}

}  // namespace detail

/// d = floor((n - k + 2p) / s) + 1.
inline std::size_t output_dim(std::size_t n, std::size_t k, std::size_t s, std::size_t p) {
  if (n < 1 || k < 1 || s < 1) {
    fail(ErrorKind::InvalidGeometry, "n, k and s must all be >= 1");
  }
  if (n + 2 * p < k) {
    fail(ErrorKind::InvalidGeometry,
         "kernel " + std::to_string(k) + " exceeds padded input " +
             std::to_string(n + 2 * p));
  }
  return (n + 2 * p - k) / s + 1;
}

/// Square filtering geometry: input size n, kernel k, stride s, padding p and
/// the derived output size d.
class FilterGeometry {
 public:
  static FilterGeometry make(std::size_t n, std::size_t k, std::size_t s, std::size_t p) {
    const std::size_t d = output_dim(n, k, s, p);
    return FilterGeometry(n, k, s, p, d);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t s() const noexcept { return s_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t d() const noexcept { return d_; }

  /// Same kernel/stride/padding applied to a different input size.
  FilterGeometry with_input(std::size_t n) const { return make(n, k_, s_, p_); }

  friend bool operator==(const FilterGeometry&, const FilterGeometry&) = default;

 private:
  FilterGeometry(std::size_t n, std::size_t k, std::size_t s, std::size_t p, std::size_t d)
      : n_(n), k_(k), s_(s), p_(p), d_(d) {}

  std::size_t n_, k_, s_, p_, d_;
};

}  // namespace uacnn
