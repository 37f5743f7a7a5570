#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "volsynth/features.hpp"

namespace {

using namespace volsynth;
using namespace volsynth::features;

// Independent two-pass evaluation of the annualized volatility formula.
double oracle_vol(const std::vector<double>& r, double annualization) {
  long double mu = 0;
  for (double x : r) mu += x;
  mu /= r.size();
  long double ss = 0;
  for (double x : r) ss += (x - mu) * (x - mu);
  return static_cast<double>(std::sqrt(ss * annualization / r.size()));
}

TEST(Features, LogReturns) {
  EXPECT_EQ(log_returns(std::vector<double>{100, 100, 100}), (std::vector<double>{0, 0}));
  EXPECT_NEAR(log_returns(std::vector<double>{100, 110})[0], 0.0953102, 1e-7);
  EXPECT_NEAR(log_returns(std::vector<double>{50, 100})[0], 0.693147, 1e-6);
  EXPECT_ERROR_CODE(log_returns(std::vector<double>{100, 0}), ErrorCode::kDomain);
  EXPECT_ERROR_CODE(log_returns(std::vector<double>{100}), ErrorCode::kFrameTooShort);
}

TEST(Features, RealizedVolatility) {
  auto flat = realized_volatility(std::vector<double>{0.02, 0.02, 0.02}, {3, 365});
  ASSERT_EQ(flat.size(), 1u);
  EXPECT_NEAR(flat[0], 0.0, 1e-15);
  auto two = realized_volatility(std::vector<double>{0.01, -0.01}, {2, 365});
  EXPECT_NEAR(two[0], 0.191050, 1e-6);
  EXPECT_NEAR(two[0], std::sqrt(0.0002 * 365 / 2), 1e-15);
  auto zeros = realized_volatility(std::vector<double>(10, 0.0), {7, 365});
  EXPECT_EQ(zeros, std::vector<double>(4, 0.0));
  EXPECT_ERROR_CODE(realized_volatility(std::vector<double>{0.1, 0.2}, {1, 365}), ErrorCode::kDomain);
}

TEST(Features, RealizedVolatilityMatchesOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 0.04);
  std::vector<double> r(60);
  for (auto& x : r) x = n(rng);
  auto v = realized_volatility(r, {7, 365});
  ASSERT_EQ(v.size(), 54u);
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::vector<double> w(r.begin() + k, r.begin() + k + 7);
    EXPECT_NEAR(v[k], oracle_vol(w, 365), 1e-12);
  }
}

TEST(FeaturesProperty, VolatilityIsScaleInvariant) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.9, 1.1);
  std::vector<double> closes{100};
  for (int i = 0; i < 40; ++i) closes.push_back(closes.back() * u(rng));
  const auto base = realized_volatility(log_returns(closes), {7, 365});
  for (double k : {0.001, 3.7, 1e5}) {
    std::vector<double> scaled = closes;
    for (auto& c : scaled) c *= k;
    const auto v = realized_volatility(log_returns(scaled), {7, 365});
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], base[i], 1e-9);
  }
}

TEST(Features, Ema) {
  for (double v : ema(std::vector<double>(5, 3.5), {10, 2})) EXPECT_NEAR(v, 3.5, 1e-15);
  auto e = ema(std::vector<double>{1, 4}, {2, 2});
  EXPECT_DOUBLE_EQ(e[0], 1.0);
  EXPECT_NEAR(e[1], 3.0, 1e-15);
  EXPECT_EQ(ema(std::vector<double>{2, 9, -4}, {10, 0}), (std::vector<double>{2, 2, 2}));
}

TEST(FeaturesProperty, EmaStaysWithinRange) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(25);
    for (auto& x : s) x = u(rng);
    const double lo = *std::min_element(s.begin(), s.end());
    const double hi = *std::max_element(s.begin(), s.end());
    for (int n : {1, 3, 10}) {
      for (double x : ema(s, {n, 2})) {
        EXPECT_GE(x, lo - 1e-12);
        EXPECT_LE(x, hi + 1e-12);
      }
    }
  }
}

TEST(Features, CandleSpreads) {
  auto s = candle_spreads(95, 110, 90, 100);
  EXPECT_NEAR(s.hl, 0.2, 1e-15);
  EXPECT_NEAR(s.co, 0.0526316, 1e-7);
  auto flat = candle_spreads(5, 5, 5, 5);
  EXPECT_EQ(flat.hl, 0.0);
  EXPECT_EQ(flat.co, 0.0);
  EXPECT_EQ(candle_spreads(7, 9, 6, 7).co, 0.0);
  EXPECT_ERROR_CODE(candle_spreads(5, 4, 6, 5), ErrorCode::kDomain);
  EXPECT_ERROR_CODE(candle_spreads(0, 4, 1, 5), ErrorCode::kDomain);
}

TEST(Features, Transforms) {
  EXPECT_NEAR(apply_transform(8.67, TransformMethod::kPow14), 1.7159, 1e-4);
  EXPECT_NEAR(apply_transform(0.000234, TransformMethod::kPow14), 0.12368, 1e-5);
  EXPECT_EQ(apply_transform(4.0, TransformMethod::kSqrt), 2.0);
  EXPECT_EQ(apply_transform(0.0, TransformMethod::kLog1p), 0.0);
  EXPECT_NEAR(apply_transform(27.0, TransformMethod::kCbrt), 3.0, 1e-15);
  EXPECT_EQ(apply_transform(-3.0, TransformMethod::kNone), -3.0);
  EXPECT_EQ(apply_transform(1.0, TransformMethod::kLog), 0.0);
  for (int code = 0; code <= 5; ++code) EXPECT_TRUE(transform_from_code(code)) << code;
  EXPECT_FALSE(transform_from_code(6));
  EXPECT_FALSE(transform_from_code(-1));
}

TEST(Features, TransformDomainErrorNamesIndex) {
  try {
    apply_transform(std::vector<double>{1.0, 2.0, 0.0}, TransformMethod::kLog);
    FAIL() << "expected a domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomain);
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
  }
  EXPECT_ERROR_CODE(apply_transform(std::vector<double>{-1e-9}, TransformMethod::kSqrt), ErrorCode::kDomain);
  EXPECT_ERROR_CODE(apply_transform(std::vector<double>{-1e-9}, TransformMethod::kPow14), ErrorCode::kDomain);
  EXPECT_ERROR_CODE(apply_transform(std::vector<double>{-1.0}, TransformMethod::kLog1p), ErrorCode::kDomain);
}

TEST(FeaturesProperty, Pow14RoundTrip) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> e(-12, 12);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::pow(10.0, e(rng));
    const double y = apply_transform(x, TransformMethod::kPow14);
    EXPECT_NEAR(y * y * y * y, x, 1e-12 * x);
  }
  EXPECT_EQ(apply_transform(0.0, TransformMethod::kPow14), 0.0);
}

TEST(FeaturesProperty, TransformsPreserveOrder) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(1e-3, 1e3);
  std::vector<double> xs(300);
  for (auto& x : xs) x = u(rng);
  std::sort(xs.begin(), xs.end());
  for (int code = 0; code <= 5; ++code) {
    const auto m = *transform_from_code(code);
    const auto ys = apply_transform(xs, m);
    EXPECT_TRUE(std::is_sorted(ys.begin(), ys.end())) << to_string(m);
  }
}

TEST(Features, LabelSpikes) {
  auto flags = label_spikes(std::vector<double>{1.05, 1.40, 0.90, 1.0},
                            std::vector<double>{0.02, -0.01, 0.03, 1e-9}, SpikeRule{1.0});
  EXPECT_EQ(flags, (std::vector<bool>{true, false, false, true}));
  EXPECT_ERROR_CODE(label_spikes(std::vector<double>{1}, std::vector<double>{}, SpikeRule{}),
                    ErrorCode::kLengthMismatch);
}

TEST(FeaturesProperty, SpikeCountFallsWithThreshold) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> v(0.3, 1.8), r(-0.05, 0.05);
  std::vector<double> vol(500), ret(500);
  for (std::size_t i = 0; i < 500; ++i) {
    vol[i] = v(rng);
    ret[i] = r(rng);
  }
  long prev = 501;
  for (double t = 0.5; t <= 1.8; t += 0.05) {
    const auto f = label_spikes(vol, ret, SpikeRule{t});
    const long count = std::count(f.begin(), f.end(), true);
    EXPECT_LE(count, prev);
    prev = count;
  }
}

}  // namespace
