#include "volsynth/features.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "volsynth/error.hpp"

namespace volsynth::features {

std::optional<TransformMethod> transform_from_code(int code) {
  if (code < 0 || code > 5) return std::nullopt;
  return static_cast<TransformMethod>(code);
}

std::string_view to_string(TransformMethod m) {
  switch (m) {
    case TransformMethod::kNone: return "none";
    case TransformMethod::kLog: return "log";
    case TransformMethod::kSqrt: return "sqrt";
    case TransformMethod::kCbrt: return "cbrt";
    case TransformMethod::kPow14: return "pow14";
    case TransformMethod::kLog1p: return "log1p";
  }
  return "?";
}

std::vector<double> log_returns(std::span<const double> closes) {
  if (closes.size() < 2) {
    throw Error(ErrorCode::kFrameTooShort, "log_returns needs at least two closes");
  }
  std::vector<double> out;
  out.reserve(closes.size() - 1);
  for (std::size_t i = 0; i < closes.size(); ++i) {
    if (!(closes[i] > 0.0)) {
      throw Error(ErrorCode::kDomain, "non-positive price at index " + std::to_string(i));
    }
    if (i > 0) out.push_back(std::log(closes[i] / closes[i - 1]));
  }
  return out;
}

std::vector<double> realized_volatility(std::span<const double> returns, const VolatilityParams& p) {
  if (p.window < 2) throw Error(ErrorCode::kDomain, "volatility window must be at least 2");
  const auto n = static_cast<std::size_t>(p.window);
  if (returns.size() < n) {
    throw Error(ErrorCode::kFrameTooShort, "fewer returns than the volatility window");
  }
  std::vector<double> out;
  out.reserve(returns.size() - n + 1);
  for (std::size_t end = n; end <= returns.size(); ++end) {
    auto window = returns.subspan(end - n, n);
    const double mu = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : window) ss += (x - mu) * (x - mu);
    out.push_back(std::sqrt(ss * p.annualization / static_cast<double>(n)));
  }
  return out;
}

std::vector<double> ema(std::span<const double> series, const EmaParams& p) {
  if (series.empty()) throw Error(ErrorCode::kFrameTooShort, "ema of an empty series");
  if (p.n < 1) throw Error(ErrorCode::kDomain, "ema window must be at least 1");
  const double k = p.S / (1.0 + p.n);
  std::vector<double> out(series.size());
  out[0] = series[0];
  for (std::size_t t = 1; t < series.size(); ++t) out[t] = series[t] * k + out[t - 1] * (1.0 - k);
  return out;
}

CandleSpreads candle_spreads(double open, double high, double low, double close) {
  if (!(open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0)) {
    throw Error(ErrorCode::kDomain, "candle prices must be positive");
  }
  if (high < low) throw Error(ErrorCode::kDomain, "candle high below low");
  return {(high - low) / close, (close - open) / open};
}

double apply_transform(double x, TransformMethod m) {
  switch (m) {
    case TransformMethod::kNone: return x;
    case TransformMethod::kLog: return std::log(x);
    case TransformMethod::kSqrt: return std::sqrt(x);
    case TransformMethod::kCbrt: return std::cbrt(x);
    case TransformMethod::kPow14: return std::sqrt(std::sqrt(x));
    case TransformMethod::kLog1p: return std::log1p(x);
  }
  return x;
}

std::vector<double> apply_transform(std::span<const double> values, TransformMethod m) {
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = values[i];
    bool ok = true;
    switch (m) {
      case TransformMethod::kLog: ok = x > 0.0; break;
      case TransformMethod::kSqrt:
      case TransformMethod::kPow14: ok = x >= 0.0; break;
      case TransformMethod::kLog1p: ok = x > -1.0; break;
      default: break;
    }
    if (!ok) {
      throw Error(ErrorCode::kDomain, std::string(to_string(m)) + " undefined for value " +
                                          std::to_string(x) + " at index " + std::to_string(i));
    }
    out.push_back(apply_transform(x, m));
  }
  return out;
}

std::vector<bool> label_spikes(std::span<const double> transformed_vol,
                               std::span<const double> log_ret, const SpikeRule& rule) {
  if (transformed_vol.size() != log_ret.size()) {
    throw Error(ErrorCode::kLengthMismatch, "label_spikes: volatility and return lengths differ");
  }
  std::vector<bool> out(transformed_vol.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = transformed_vol[i] >= rule.threshold && log_ret[i] > 0.0;
  }
  return out;
}

}  // namespace volsynth::features
