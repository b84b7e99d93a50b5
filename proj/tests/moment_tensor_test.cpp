#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "uacnn/json_io.hpp"
#include "uacnn/moment_tensor.hpp"

namespace uacnn {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an uacnn::Error";
  return ErrorKind::InvalidArgument;
}

TEST(OutputDim, Examples) {
  EXPECT_EQ(output_dim(28, 5, 1, 0), 24u);
  EXPECT_EQ(output_dim(4, 2, 2, 0), 2u);
  EXPECT_EQ(output_dim(5, 3, 2, 1), 3u);
}

TEST(OutputDim, RejectsKernelLargerThanPaddedInput) {
  EXPECT_EQ(kind_of([] { output_dim(4, 5, 1, 0); }), ErrorKind::InvalidGeometry);
  EXPECT_EQ(output_dim(4, 5, 1, 1), 2u);
  EXPECT_EQ(kind_of([] { output_dim(4, 0, 1, 0); }), ErrorKind::InvalidGeometry);
  EXPECT_EQ(kind_of([] { output_dim(4, 2, 0, 0); }), ErrorKind::InvalidGeometry);
  EXPECT_EQ(kind_of([] { output_dim(0, 1, 1, 0); }), ErrorKind::InvalidGeometry);
}

// Count filter positions by walking the padded map: starts 0, s, 2s, ...
// while the window still fits.
std::size_t count_sweep_positions(std::size_t n, std::size_t k, std::size_t s, std::size_t p) {
  std::size_t count = 0;
  for (std::size_t start = 0; start + k <= n + 2 * p; start += s) ++count;
  return count;
}

TEST(OutputDim, MatchesSweepCount) {
  for (std::size_t n = 1; n <= 12; ++n)
    for (std::size_t k = 1; k <= n; ++k)
      for (std::size_t s = 1; s <= 4; ++s)
        for (std::size_t p = 0; p <= 2; ++p) {
          const std::size_t d = output_dim(n, k, s, p);
          EXPECT_GE(d, 1u);
          EXPECT_EQ(d, count_sweep_positions(n, k, s, p)) << n << ' ' << k << ' ' << s << ' ' << p;
        }
}

TEST(FilterGeometry, StoresDerivedSize) {
  const auto g = FilterGeometry::make(5, 3, 2, 1);
  EXPECT_EQ(g.n(), 5u);
  EXPECT_EQ(g.d(), 3u);
  EXPECT_EQ(g.with_input(7).d(), 4u);
}

TEST(MomentTensor, DeterministicScalarIsValid) {
  const MomentTensor t = make_moment_tensor({1.0}, {0.0});
  EXPECT_EQ(t.shape(), Shape{1});
  EXPECT_EQ(t.mean(0), 1.0);
  EXPECT_EQ(t.variance(0), 0.0);
}

TEST(MomentTensor, ErrorClassesAreDistinct) {
  EXPECT_EQ(kind_of([] { make_moment_tensor({1.0}, {-0.1}); }), ErrorKind::NegativeVariance);
  EXPECT_EQ(kind_of([] { make_moment_tensor({1.0, 2.0}, {0.5}); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([] { make_moment_tensor({std::nan("")}, {0.5}); }), ErrorKind::NonFinite);
  EXPECT_EQ(kind_of([] {
              make_moment_tensor({1.0}, {std::numeric_limits<double>::infinity()});
            }),
            ErrorKind::NonFinite);
  EXPECT_EQ(kind_of([] { make_moment_tensor(Shape{2, 2}, {1, 2, 3}, {1, 1, 1}); }),
            ErrorKind::ShapeMismatch);
}

TEST(MomentTensor, NegativeVarianceMessage) {
  try {
    make_moment_tensor({1.0}, {-0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("negative variance"), std::string::npos);
  }
}

TEST(MomentTensor, AcceptsAnyValidInput) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape shape{1 + rng() % 3, 1 + rng() % 4, 1 + rng() % 5};
    EXPECT_NO_THROW(testing::random_tensor(rng, shape, 1e6, 1e6));
  }
}

TEST(ClampVariances, Examples) {
  EXPECT_EQ(clamp_variances(std::vector<double>{1e-18}, 0.0), (std::vector<double>{1e-18}));
  EXPECT_EQ(clamp_variances(std::vector<double>{-1e-17}, 0.0), (std::vector<double>{0.0}));
  EXPECT_EQ(clamp_variances(std::vector<double>{0.5, 0.0}, 1e-12),
            (std::vector<double>{0.5, 1e-12}));
}

TEST(ClampVariances, TensorLeavesMeansUntouched) {
  const MomentTensor t = make_moment_tensor({-3.0, 4.0}, {0.5, 0.0});
  const MomentTensor c = clamp_variances(t, 1e-12);
  EXPECT_EQ(c.mean(0), -3.0);
  EXPECT_EQ(c.mean(1), 4.0);
  EXPECT_EQ(c.variance(0), 0.5);
  EXPECT_EQ(c.variance(1), 1e-12);
}

TEST(MomentTensorJson, RoundTripsExactly) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MomentTensor t = testing::random_tensor(rng, {1 + rng() % 2, 1 + rng() % 3, 2, 2});
    EXPECT_EQ(load_moment_tensor(to_json(t).dump()), t);
  }
}

TEST(MomentTensorJson, Schema) {
  const MomentTensor t =
      load_moment_tensor(R"({"shape":[2,1],"means":[1.5,-2],"variances":[0.25,0]})");
  EXPECT_EQ(t.shape(), (Shape{2, 1}));
  EXPECT_EQ(t.mean(1), -2.0);
  EXPECT_EQ(kind_of([] { load_moment_tensor(R"({"shape":[2],"means":[1]})"); }),
            ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { load_moment_tensor(R"({"shape":[1],"means":[1],"variances":[-1]})"); }),
            ErrorKind::NegativeVariance);
}

TEST(MomentTensorJson, SyntaxErrorReportsByteOffset) {
  try {
    load_moment_tensor(R"({"shape":[1], "means":[1,,], "variances":[0]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("at byte 26"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace uacnn
