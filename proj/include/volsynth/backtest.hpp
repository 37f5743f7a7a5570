#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "volsynth/date.hpp"

namespace volsynth::backtest {

enum class StrategyKind { kBuyAndHold, kBuyLowSellHigh, kMomentum, kMeanReversion };

std::string_view to_string(StrategyKind k);
std::optional<StrategyKind> strategy_from_string(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kBuyAndHold;
  double initial_capital = 10000.0;
  double position_fraction = 0.05;
  double fee_rate = 0.001;
  bool volatility_scaled = false;
  double spike_threshold = 1.0;

  void validate() const;
};

enum class Order { kNone, kBuy, kSellAll, kCloseNext };

std::string_view to_string(Order o);

// One order per day, decided at that day's close.
std::vector<Order> generate_signals(const StrategyConfig& cfg, std::span<const double> pred_vol,
                                    std::span<const double> log_ret);

// Notional to buy out of `capital`.
double position_size(double capital, const StrategyConfig& cfg, double pred_vol);

enum class Side { kBuy, kSell };

struct Trade {
  std::size_t day = 0;
  std::optional<Date> date;
  Side side = Side::kBuy;
  double units = 0.0;
  double price = 0.0;
  double fee = 0.0;
  double cash_after = 0.0;
  double units_after = 0.0;
};

struct SkippedBuy {
  std::size_t day = 0;
  double notional = 0.0;
  double cash = 0.0;
};

struct TradeLog {
  std::vector<Trade> trades;
  std::vector<SkippedBuy> skipped;
};

struct EquityCurve {
  std::vector<double> equity;     // cash + units * close at each day's close
  std::vector<bool> in_market;    // units held at the open or after the day's trades
};

struct BacktestResult {
  TradeLog log;
  EquityCurve curve;
};

// Any open position is liquidated at the final close.
BacktestResult run_backtest(std::span<const double> closes, std::span<const double> log_ret,
                            std::span<const double> pred_vol, const StrategyConfig& cfg,
                            std::span<const Date> dates = {});

struct PortfolioMetrics {
  double time_in_market = 0.0;
  double sharpe = 0.0;
  bool sharpe_undefined = false;  // zero variance of daily returns
  double max_drawdown = 0.0;
  double kelly = 0.0;
  double daily_var_95 = 0.0;
  double pnl = 0.0;
  std::size_t round_trips = 0;
};

struct RoundTrip {
  double cost = 0.0;      // cash spent on the buys, fees included
  double proceeds = 0.0;  // cash received on liquidation, net of fees
  double pnl() const { return proceeds - cost; }
};

std::vector<RoundTrip> round_trips(const TradeLog& log);

double max_drawdown(std::span<const double> equity);
double sharpe_ratio(std::span<const double> equity, bool* undefined = nullptr);
double daily_var_95(std::span<const double> equity);
double kelly_percent(std::span<const RoundTrip> trips);

PortfolioMetrics portfolio_metrics(const EquityCurve& curve, const TradeLog& log);

void write_trades_csv(std::ostream& out, const TradeLog& log);
void write_equity_csv(std::ostream& out, const EquityCurve& curve, std::span<const Date> dates = {});
// Columns follow the strategy results table: time in market, Sharpe, max drawdown,
// Kelly, daily VaR, PnL.
void write_metrics_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, PortfolioMetrics>>& rows);

}  // namespace volsynth::backtest
