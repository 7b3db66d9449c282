#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "frnet/loss.hpp"
#include "oracles.hpp"

using namespace frnet;

namespace {

Matrix<double> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix<double> m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

// Vertical stripes: s(j) repeated down every row.
Tensor4<double> stripe_image(std::size_t h, const std::vector<double>& s) {
  Tensor4<double> t({1, 1, h, s.size()});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < s.size(); ++j) t(0, 0, i, j) = s[j];
  return t;
}

// Direct per-pixel evaluation of the objective for one image pair.
double loss_oracle(const Tensor4<double>& out, const Tensor4<double>& in, const LossConfig& cfg, bool tv) {
  const Shape4 s = out.shape();
  const double e2 = cfg.eps_smooth * cfg.eps_smooth;
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    auto X = [&](long i, long j) { return out(n, 0, static_cast<std::size_t>(i), static_cast<std::size_t>(j)); };
    auto R = [&](long i, long j) {
      return X(i, j) - in(n, 0, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    };
    const long h = static_cast<long>(s.h), w = static_cast<long>(s.w);
    double mse = 0.0, down_x = 0.0, across_x = 0.0, down_r = 0.0, across_r = 0.0;
    for (long i = 0; i < h; ++i) {
      for (long j = 0; j < w; ++j) {
        mse += 0.5 * R(i, j) * R(i, j);
        if (i + 1 < h) {
          down_x += std::sqrt(std::pow(X(i + 1, j) - X(i, j), 2) + e2);
          down_r += std::sqrt(std::pow(R(i + 1, j) - R(i, j), 2) + e2);
        }
        if (j + 1 < w) {
          across_x += std::sqrt(std::pow(X(i, j + 1) - X(i, j), 2) + e2);
          across_r += std::sqrt(std::pow(R(i, j + 1) - R(i, j), 2) + e2);
        }
      }
    }
    const bool rows = cfg.footprint_axis == FootprintAxis::rows;
    double reg = 0.0;
    if (tv) {
      reg = cfg.lambda1 > 0.0 ? cfg.lambda1 * (down_x + across_x) : 0.0;
    } else {
      if (cfg.lambda1 > 0.0) reg += cfg.lambda1 * (rows ? across_x : down_x);
      if (cfg.lambda2 > 0.0) reg += cfg.lambda2 * (rows ? down_r : across_r);
    }
    total += mse + reg;
  }
  return total / static_cast<double>(s.n);
}

std::vector<double> numeric_grad(const Tensor4<double>& out, const Tensor4<double>& in, const LossConfig& cfg,
                                 bool tv) {
  return finite_diff_grad(
      [&](std::span<const double> p) {
        return loss_oracle(Tensor4<double>(out.shape(), std::vector<double>(p.begin(), p.end())), in, cfg, tv);
      },
      out.storage(), 1e-6);
}

}  // namespace

TEST(Differences, Examples) {
  EXPECT_EQ(diff_rows(Matrix<double>(2, 2, {1, 2, 4, 6})), Matrix<double>(1, 2, {3, 4}));
  EXPECT_EQ(diff_cols(Matrix<double>(2, 2, {1, 4, 2, 6})), Matrix<double>(2, 1, {3, 4}));
  EXPECT_EQ(diff_rows(Matrix<double>(3, 4, 2.5)), Matrix<double>(2, 4, 0.0));
  EXPECT_EQ(diff_cols(Matrix<double>(3, 4, 2.5)), Matrix<double>(3, 3, 0.0));
}

TEST(Differences, MatchLoopOracle) {
  const auto m = random_matrix(5, 5, 1);
  const auto r = diff_rows(m);
  const auto c = diff_cols(m);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (i + 1 < 5) {
        EXPECT_EQ(r(i, j), m(i + 1, j) - m(i, j));
      }
      if (j + 1 < 5) {
        EXPECT_EQ(c(i, j), m(i, j + 1) - m(i, j));
      }
    }
  }
  EXPECT_THROW(diff_rows(Matrix<double>(1, 3)), ShapeError);
  EXPECT_THROW(diff_cols(Matrix<double>(3, 1)), ShapeError);
}

TEST(TvNorm, Examples) {
  EXPECT_EQ(tv_norm(Matrix<double>(4, 4, 3.0)), 0.0);
  EXPECT_EQ(tv_norm(Matrix<double>(2, 2, {0, 1, 1, 0})), 4.0);
  EXPECT_THROW(tv_norm(Matrix<double>(1, 4)), ShapeError);
}

TEST(TvNorm, MatchesBruteForceAndIsTranslationInvariant) {
  const auto m = random_matrix(6, 6, 2);
  double ref = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (i + 1 < 6) ref += std::abs(m(i + 1, j) - m(i, j));
      if (j + 1 < 6) ref += std::abs(m(i, j + 1) - m(i, j));
    }
  }
  EXPECT_NEAR(tv_norm(m), ref, 1e-12);
  // Integer-valued image so that adding c is exact.
  Matrix<double> k(6, 6);
  for (std::size_t i = 0; i < k.size(); ++i) k.data()[i] = std::round(8.0 * m.data()[i]);
  Matrix<double> shifted = k;
  for (double& v : shifted.data()) v += 17.0;
  EXPECT_EQ(tv_norm(shifted), tv_norm(k));
}

TEST(SmoothL1, Examples) {
  const auto z = smooth_l1(Matrix<double>(1, 1, 0.0), 1e-3);
  EXPECT_DOUBLE_EQ(z.value, 1e-3);
  EXPECT_EQ(z.grad(0, 0), 0.0);
  const auto one = smooth_l1(Matrix<double>(1, 1, 1.0), 1e-9);
  EXPECT_NEAR(one.value, 1.0, 1e-12);
  EXPECT_NEAR(one.grad(0, 0), 1.0, 1e-12);
  EXPECT_THROW(smooth_l1(Matrix<double>(1, 1), 0.0), ConfigError);
}

TEST(SmoothL1, GradientMatchesFiniteDifferencesAndIsBounded) {
  const auto m = random_matrix(4, 5, 3);
  const double eps = 0.05;
  const auto s = smooth_l1(m, eps);
  EXPECT_GE(s.value, eps * static_cast<double>(m.size()));
  for (double g : s.grad.data()) EXPECT_LT(std::abs(g), 1.0);
  std::vector<double> p(m.data().begin(), m.data().end());
  const auto num = finite_diff_grad(
      [&](std::span<const double> q) {
        return smooth_l1(Matrix<double>(4, 5, std::vector<double>(q.begin(), q.end())), eps).value;
      },
      p, 1e-6);
  EXPECT_LT(oracle::rel_error(num, s.grad.data()), 1e-5);
}

TEST(FrnetLoss, PerfectReconstructionWithoutRegularizers) {
  const auto x = oracle::random_tensor<double>({2, 1, 6, 6}, 1);
  LossConfig cfg;
  cfg.lambda1 = cfg.lambda2 = 0.0;
  const auto r = frnet_loss(x, x, cfg);
  EXPECT_EQ(r.value.total, 0.0);
  for (double g : r.grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(FrnetLoss, StripeDirectionality) {
  const std::vector<double> s{0.3, -0.1, 0.25, 0.0, 0.3, -0.2, 0.1, 0.05};
  const auto img = stripe_image(6, s);
  LossConfig cfg;
  const auto r = frnet_loss(img, img, cfg);
  // Residual is zero so each along-stripe difference sits at sqrt(0 + eps^2).
  const double floor_count = 5.0 * 8.0;
  EXPECT_NEAR(r.value.utv_residual_term, cfg.lambda2 * cfg.eps_smooth * floor_count,
              1e-6 * cfg.lambda2 * cfg.eps_smooth * floor_count);
  double edges = 0.0;
  for (std::size_t j = 0; j + 1 < s.size(); ++j) {
    edges += 6.0 * std::sqrt((s[j + 1] - s[j]) * (s[j + 1] - s[j]) + cfg.eps_smooth * cfg.eps_smooth);
  }
  EXPECT_NEAR(r.value.utv_clean_term, cfg.lambda1 * edges, 1e-6 * cfg.lambda1 * edges);
  EXPECT_EQ(r.value.mse_term, 0.0);
}

TEST(FrnetLoss, ColumnsAxisSwapsTheOperators) {
  // Horizontal stripes are the transpose case.
  Tensor4<double> img({1, 1, 5, 4});
  const std::vector<double> s{0.2, -0.3, 0.1, 0.4, 0.0};
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) img(0, 0, i, j) = s[i];
  LossConfig cfg;
  cfg.footprint_axis = FootprintAxis::columns;
  const auto r = frnet_loss(img, img, cfg);
  EXPECT_NEAR(r.value.utv_residual_term, cfg.lambda2 * cfg.eps_smooth * 15.0, 1e-6 * cfg.lambda2 * cfg.eps_smooth * 15);
  EXPECT_GT(r.value.utv_clean_term, cfg.lambda1 * 15.0 * cfg.eps_smooth);
}

TEST(FrnetLoss, AcrossTermPositiveUnlessConstant) {
  LossConfig cfg;
  const auto flat = stripe_image(4, std::vector<double>(4, 0.7));
  const double floor = cfg.lambda1 * 12.0 * cfg.eps_smooth;
  EXPECT_NEAR(frnet_loss(flat, flat, cfg).value.utv_clean_term, floor, 1e-9 * floor);
  const auto striped = stripe_image(4, {0.7, 0.7, 0.8, 0.7});
  EXPECT_GT(frnet_loss(striped, striped, cfg).value.utv_clean_term, floor);
}

TEST(FrnetLoss, MatchesOracleAndFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto out = oracle::random_tensor<double>({1, 1, 8, 8}, seed);
    const auto in = oracle::random_tensor<double>({1, 1, 8, 8}, seed + 10);
    LossConfig cfg;
    cfg.lambda1 = cfg.lambda2 = 1.0;
    cfg.footprint_axis = seed % 2 == 0 ? FootprintAxis::rows : FootprintAxis::columns;
    const auto r = frnet_loss(out, in, cfg);
    EXPECT_NEAR(r.value.total, loss_oracle(out, in, cfg, false), 1e-10 * r.value.total);
    EXPECT_LT(oracle::rel_error(numeric_grad(out, in, cfg, false), r.grad.data()), 1e-4);
  }
}

TEST(FrnetLoss, BatchMeanAndTermDecomposition) {
  const auto out = oracle::random_tensor<double>({3, 1, 6, 6}, 5);
  const auto in = oracle::random_tensor<double>({3, 1, 6, 6}, 6);
  LossConfig cfg;
  const auto r = frnet_loss(out, in, cfg);
  EXPECT_NEAR(r.value.total, loss_oracle(out, in, cfg, false), 1e-9 * r.value.total);
  const double sum = r.value.mse_term + r.value.utv_clean_term + r.value.utv_residual_term;
  EXPECT_NEAR(r.value.total, sum, 1e-6 * std::abs(sum));
}

TEST(FrnetLoss, ScalingBehaviour) {
  const auto out = oracle::random_tensor<double>({1, 1, 8, 8}, 7);
  const auto in = oracle::random_tensor<double>({1, 1, 8, 8}, 8);
  Tensor4<double> out2 = out, in2 = in;
  for (double& v : out2.data()) v *= 2.0;
  for (double& v : in2.data()) v *= 2.0;
  LossConfig cfg;
  const auto a = frnet_loss(out, in, cfg).value;
  const auto b = frnet_loss(out2, in2, cfg).value;
  EXPECT_NEAR(b.mse_term, 4.0 * a.mse_term, 1e-12 * b.mse_term);
  // Smoothed L1 grows at most linearly and, for |u| >> eps, almost exactly so.
  EXPECT_LT(b.utv_clean_term, 2.0 * a.utv_clean_term);
  EXPECT_GT(b.utv_clean_term, 1.99 * a.utv_clean_term);
  EXPECT_LT(b.utv_residual_term, 2.0 * a.utv_residual_term);
  EXPECT_GT(b.utv_residual_term, 1.99 * a.utv_residual_term);
  EXPECT_NEAR(b.total, loss_oracle(out2, in2, cfg, false), 1e-9 * b.total);
}

TEST(FrnetLoss, ShapeErrors) {
  LossConfig cfg;
  EXPECT_THROW(frnet_loss(Tensor4<double>({1, 1, 4, 4}), Tensor4<double>({1, 1, 4, 5}), cfg), ShapeError);
  EXPECT_THROW(frnet_loss(Tensor4<double>({1, 2, 4, 4}), Tensor4<double>({1, 2, 4, 4}), cfg), ShapeError);
  cfg.eps_smooth = 0.0;
  EXPECT_THROW(frnet_loss(Tensor4<double>({1, 1, 4, 4}), Tensor4<double>({1, 1, 4, 4}), cfg), ConfigError);
}

TEST(TvBaseline, ConstantOutputLeavesOnlyTheFloor) {
  const Tensor4<double> out({1, 1, 5, 5}, 0.4);
  const auto in = oracle::random_tensor<double>({1, 1, 5, 5}, 1);
  LossConfig cfg;
  const auto r = tv_baseline_loss(out, in, cfg);
  const double floor = cfg.lambda1 * 40.0 * cfg.eps_smooth;
  EXPECT_NEAR(r.value.utv_clean_term, floor, 1e-9 * floor);
  EXPECT_EQ(r.value.utv_residual_term, 0.0);
  LossConfig plain = cfg;
  plain.lambda1 = plain.lambda2 = 0.0;
  EXPECT_NEAR(r.value.mse_term, frnet_loss(out, in, plain).value.total, 1e-12);
}

TEST(TvBaseline, ZeroWeightEqualsPlainObjective) {
  const auto out = oracle::random_tensor<double>({2, 1, 6, 6}, 2);
  const auto in = oracle::random_tensor<double>({2, 1, 6, 6}, 3);
  LossConfig tv;
  tv.lambda1 = 0.0;
  LossConfig plain = tv;
  plain.lambda2 = 0.0;
  const auto a = tv_baseline_loss(out, in, tv);
  const auto b = frnet_loss(out, in, plain);
  EXPECT_EQ(a.value.total, b.value.total);
  EXPECT_EQ(a.grad.storage(), b.grad.storage());
  EXPECT_EQ(evaluate_loss(LossVariant::mse_only, out, in, LossConfig{}).value.total, b.value.total);
}

TEST(TvBaseline, GradientMatchesFiniteDifferences) {
  const auto out = oracle::random_tensor<double>({1, 1, 7, 7}, 4);
  const auto in = oracle::random_tensor<double>({1, 1, 7, 7}, 5);
  LossConfig cfg;
  cfg.lambda1 = 1.0;
  const auto r = tv_baseline_loss(out, in, cfg);
  EXPECT_NEAR(r.value.total, loss_oracle(out, in, cfg, true), 1e-10 * r.value.total);
  EXPECT_LT(oracle::rel_error(numeric_grad(out, in, cfg, true), r.grad.data()), 1e-4);
}

TEST(LossNames, ParseAndPrint) {
  EXPECT_EQ(parse_loss_variant("tv_baseline"), LossVariant::tv_baseline);
  EXPECT_EQ(to_string(LossVariant::frnet), "frnet");
  EXPECT_EQ(parse_footprint_axis("columns"), FootprintAxis::columns);
  EXPECT_THROW(parse_footprint_axis("diagonal"), ConfigError);
  EXPECT_THROW(parse_loss_variant("l2"), ConfigError);
}
