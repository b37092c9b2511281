#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stspec/fit.hpp"

using namespace stspec;

TEST(Fit, ExactLineKeepsEveryPoint) {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(i);
    y.push_back(2.0 * i + 1.0);
  }
  const auto f = fit_linear_tail(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_EQ(f.cutoff, 0u);
  EXPECT_EQ(f.residual, 0.0);
  EXPECT_EQ(f.dof, 8u);
}

TEST(Fit, SkipsDecayingTransient) {
  std::vector<double> x, y;
  for (double t = 0.5; t <= 15.0 + 1e-9; t += 0.5) {
    x.push_back(t);
    y.push_back(std::exp(-t) * std::cos(5 * t) + 0.7 * t + 0.1);
  }
  const auto f = fit_linear_tail(x, y);
  EXPECT_NEAR(f.slope, 0.7, 0.02);
  EXPECT_GT(f.cutoff, 0u);
  ASSERT_TRUE(f.decay_length.has_value());
  EXPECT_GT(*f.decay_length, 0.0);
}

TEST(Fit, DriftingSlopeIsRejected) {
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i);
    // Slope changes by 20% across the range.
    y.push_back(i + 0.2 * i * i / 29.0);
  }
  try {
    fit_linear_tail(x, y, {}, "stage 1 (n_s=3)");
    FAIL() << "expected NoLinearTrendError";
  } catch (const NoLinearTrendError& e) {
    EXPECT_EQ(e.stage(), "stage 1 (n_s=3)");
  }
}

TEST(Fit, Preconditions) {
  std::vector<double> x{0, 1, 2, 3, 4}, y{0, 1, 2, 3, 4};
  EXPECT_THROW(fit_linear_tail(x, y), PreconditionError);
  x.push_back(5);
  y.push_back(5);
  EXPECT_NO_THROW(fit_linear_tail(x, y));
  EXPECT_THROW(fit_linear_tail(x, y, {.min_points = 2}), PreconditionError);
  auto bad = x;
  bad[3] = bad[2];
  EXPECT_THROW(fit_linear_tail(bad, y), PreconditionError);
  auto nan = y;
  nan[1] = std::nan("");
  EXPECT_THROW(fit_linear_tail(x, nan), PreconditionError);
  EXPECT_THROW(fit_linear_tail(x, std::vector<double>{1, 2}), PreconditionError);
}

TEST(Fit, ConstantOffsetOnlyMovesIntercept) {
  std::vector<double> x, y, z;
  for (double t = 0.5; t <= 12.0 + 1e-9; t += 0.5) {
    x.push_back(t);
    y.push_back(std::exp(-2 * t) + 0.3 * t);
    z.push_back(y.back() + 5.0);
  }
  const auto a = fit_linear_tail(x, y), b = fit_linear_tail(x, z);
  EXPECT_EQ(a.cutoff, b.cutoff);
  EXPECT_NEAR(a.slope, b.slope, 1e-9);
  EXPECT_NEAR(b.intercept - a.intercept, 5.0, 1e-9);
}
