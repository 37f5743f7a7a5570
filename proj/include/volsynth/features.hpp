#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace volsynth::features {

struct EmaParams {
  int n = 10;         // window in days
  double S = 2.0;     // smoothing factor
};

struct VolatilityParams {
  int window = 7;              // trailing daily returns per estimate
  double annualization = 365.0;
};

// Codes 0..5 match the standardization table: none, log, sqrt, cbrt,
// fourth root, log(1 + x).
enum class TransformMethod { kNone = 0, kLog = 1, kSqrt = 2, kCbrt = 3, kPow14 = 4, kLog1p = 5 };

std::optional<TransformMethod> transform_from_code(int code);
std::string_view to_string(TransformMethod m);

struct SpikeRule {
  double threshold = 1.0;
};

struct CandleSpreads {
  double hl = 0.0;
  double co = 0.0;
};

// ln(C[i+1] / C[i]); one element shorter than the input.
std::vector<double> log_returns(std::span<const double> closes);

// Element k is the annualized volatility of returns[k .. k + window - 1], i.e.
// the estimate for the day of the last return in the window. Output length is
// returns.size() - window + 1.
std::vector<double> realized_volatility(std::span<const double> returns, const VolatilityParams& p);

// Seeded with the first observation.
std::vector<double> ema(std::span<const double> series, const EmaParams& p);

CandleSpreads candle_spreads(double open, double high, double low, double close);

std::vector<double> apply_transform(std::span<const double> values, TransformMethod m);
double apply_transform(double value, TransformMethod m);

// flag = vol >= T and log_ret > 0
std::vector<bool> label_spikes(std::span<const double> transformed_vol,
                               std::span<const double> log_ret, const SpikeRule& rule);

}  // namespace volsynth::features
