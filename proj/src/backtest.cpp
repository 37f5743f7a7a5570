#include "volsynth/backtest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>

#include "volsynth/error.hpp"
#include "volsynth/text.hpp"

namespace volsynth::backtest {

namespace {

constexpr std::array<std::pair<StrategyKind, std::string_view>, 4> kStrategyNames{{
    {StrategyKind::kBuyAndHold, "buy_and_hold"},
    {StrategyKind::kBuyLowSellHigh, "buy_low_sell_high"},
    {StrategyKind::kMomentum, "momentum"},
    {StrategyKind::kMeanReversion, "mean_reversion"},
}};

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch, std::string(what) + ": lengths " + std::to_string(a) +
                                                " and " + std::to_string(b) + " differ");
  }
}

std::vector<double> daily_returns(std::span<const double> equity) {
  std::vector<double> r;
  for (std::size_t t = 1; t < equity.size(); ++t) r.push_back(equity[t] / equity[t - 1] - 1.0);
  return r;
}

std::string fmt(double v) { return text::format_double(v); }

}  // namespace

std::string_view to_string(StrategyKind k) {
  for (const auto& [kind, name] : kStrategyNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

std::optional<StrategyKind> strategy_from_string(std::string_view name) {
  for (const auto& [kind, n] : kStrategyNames) {
    if (n == name) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(Order o) {
  switch (o) {
    case Order::kNone: return "none";
    case Order::kBuy: return "buy";
    case Order::kSellAll: return "sell_all";
    case Order::kCloseNext: return "close_next";
  }
  return "unknown";
}

void StrategyConfig::validate() const {
  std::vector<std::string> problems;
  if (!(initial_capital > 0.0) || !std::isfinite(initial_capital)) {
    problems.push_back("initial_capital must be positive");
  }
  if (!(position_fraction > 0.0 && position_fraction <= 1.0)) {
    problems.push_back("position_fraction must be in (0, 1]");
  }
  if (!(fee_rate >= 0.0 && fee_rate < 1.0)) problems.push_back("fee_rate must be in [0, 1)");
  if (!std::isfinite(spike_threshold)) problems.push_back("spike_threshold must be finite");
  if (!problems.empty()) {
    std::string msg = "invalid strategy config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(ErrorCode::kConfig, msg);
  }
}

std::vector<Order> generate_signals(const StrategyConfig& cfg, std::span<const double> pred_vol,
                                    std::span<const double> log_ret) {
  require_same(pred_vol.size(), log_ret.size(), "generate_signals");
  const std::size_t n = pred_vol.size();
  std::vector<Order> orders(n, Order::kNone);
  const double th = cfg.spike_threshold;

  switch (cfg.kind) {
    case StrategyKind::kBuyAndHold:
      if (n > 0) orders[0] = Order::kBuy;
      break;
    case StrategyKind::kBuyLowSellHigh:
      for (std::size_t t = 0; t < n; ++t) {
        if (pred_vol[t] >= th) {
          orders[t] = Order::kSellAll;
        } else if (t >= 1 && log_ret[t] < log_ret[t - 1]) {
          orders[t] = Order::kBuy;
        }
      }
      break;
    case StrategyKind::kMomentum:
    case StrategyKind::kMeanReversion: {
      const bool rising = cfg.kind == StrategyKind::kMomentum;
      for (std::size_t t = 0; t < n; ++t) {
        if (t >= 1 && orders[t - 1] == Order::kBuy) {
          orders[t] = Order::kCloseNext;
          continue;
        }
        if (t < 2 || pred_vol[t] < th) continue;
        const bool up = log_ret[t] > log_ret[t - 1] && log_ret[t - 1] > log_ret[t - 2];
        const bool down = log_ret[t] < log_ret[t - 1] && log_ret[t - 1] < log_ret[t - 2];
        if (rising ? up : down) orders[t] = Order::kBuy;
      }
      break;
    }
  }
  return orders;
}

double position_size(double capital, const StrategyConfig& cfg, double pred_vol) {
  const double base = capital * cfg.position_fraction;
  return cfg.volatility_scaled ? base * pred_vol : base;
}

BacktestResult run_backtest(std::span<const double> closes, std::span<const double> log_ret,
                            std::span<const double> pred_vol, const StrategyConfig& cfg,
                            std::span<const Date> dates) {
  cfg.validate();
  require_same(closes.size(), log_ret.size(), "run_backtest");
  require_same(closes.size(), pred_vol.size(), "run_backtest");
  if (!dates.empty()) require_same(closes.size(), dates.size(), "run_backtest dates");
  if (closes.empty()) throw Error(ErrorCode::kFrameTooShort, "backtest needs at least one day");
  for (std::size_t t = 0; t < closes.size(); ++t) {
    if (!(closes[t] > 0.0) || !std::isfinite(closes[t])) {
      throw Error(ErrorCode::kDomain, "close at index " + std::to_string(t) + " is not positive");
    }
    if (!std::isfinite(pred_vol[t]) || !std::isfinite(log_ret[t])) {
      throw Error(ErrorCode::kNonFinite, "non-finite signal input at index " + std::to_string(t));
    }
  }

  const auto orders = generate_signals(cfg, pred_vol, log_ret);
  BacktestResult res;
  double cash = cfg.initial_capital;
  double units = 0.0;
  const double f = cfg.fee_rate;

  auto date_at = [&](std::size_t t) -> std::optional<Date> {
    if (dates.empty()) return std::nullopt;
    return dates[t];
  };
  auto sell_all = [&](std::size_t t) {
    if (units <= 0.0) return;
    const double gross = units * closes[t];
    const double fee = gross * f;
    cash += gross - fee;
    res.log.trades.push_back(Trade{t, date_at(t), Side::kSell, units, closes[t], fee, cash, 0.0});
    units = 0.0;
  };

  const std::size_t n = closes.size();
  for (std::size_t t = 0; t < n; ++t) {
    const bool held_at_open = units > 0.0;
    switch (orders[t]) {
      case Order::kBuy: {
        const double notional = cfg.kind == StrategyKind::kBuyAndHold
                                    ? cash
                                    : position_size(cash, cfg, pred_vol[t]);
        if (!(notional > 0.0) || notional > cash) {
          res.log.skipped.push_back(SkippedBuy{t, notional, cash});
          break;
        }
        const double fee = notional * f;
        const double bought = (notional - fee) / closes[t];
        cash -= notional;
        units += bought;
        res.log.trades.push_back(Trade{t, date_at(t), Side::kBuy, bought, closes[t], fee, cash, units});
        break;
      }
      case Order::kSellAll:
      case Order::kCloseNext:
        sell_all(t);
        break;
      case Order::kNone:
        break;
    }
    if (t + 1 == n) sell_all(t);
    const bool in_market = held_at_open || units > 0.0 ||
                           (!res.log.trades.empty() && res.log.trades.back().day == t);
    res.curve.equity.push_back(cash + units * closes[t]);
    res.curve.in_market.push_back(in_market);
  }
  return res;
}

std::vector<RoundTrip> round_trips(const TradeLog& log) {
  std::vector<RoundTrip> trips;
  RoundTrip open;
  bool has_open = false;
  for (const auto& tr : log.trades) {
    if (tr.side == Side::kBuy) {
      open.cost += tr.units * tr.price + tr.fee;
      has_open = true;
    } else {
      open.proceeds += tr.units * tr.price - tr.fee;
      if (has_open) trips.push_back(open);
      open = RoundTrip{};
      has_open = false;
    }
  }
  return trips;
}

double max_drawdown(std::span<const double> equity) {
  double runmax = 0.0;
  double worst = 0.0;
  for (std::size_t t = 0; t < equity.size(); ++t) {
    runmax = t == 0 ? equity[0] : std::max(runmax, equity[t]);
    worst = std::min(worst, (equity[t] / runmax - 1.0) * 100.0);
  }
  return worst;
}

double sharpe_ratio(std::span<const double> equity, bool* undefined) {
  const auto r = daily_returns(equity);
  if (undefined) *undefined = false;
  if (r.size() < 2) {
    if (undefined) *undefined = true;
    return 0.0;
  }
  const double n = static_cast<double>(r.size());
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : r) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    if (undefined) *undefined = true;
    return 0.0;
  }
  return mean / sd * std::sqrt(365.0);
}

double daily_var_95(std::span<const double> equity) {
  auto r = daily_returns(equity);
  if (r.empty()) return 0.0;
  std::sort(r.begin(), r.end());
  const double pos = 0.05 * static_cast<double>(r.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, r.size() - 1);
  const double q = r[lo] + (pos - static_cast<double>(lo)) * (r[hi] - r[lo]);
  return std::min(0.0, q * 100.0);
}

double kelly_percent(std::span<const RoundTrip> trips) {
  if (trips.empty()) return 0.0;
  double win_sum = 0.0, loss_sum = 0.0;
  std::size_t wins = 0, losses = 0;
  for (const auto& rt : trips) {
    const double p = rt.pnl();
    if (p > 0.0) {
      win_sum += p;
      ++wins;
    } else {
      loss_sum += -p;
      ++losses;
    }
  }
  const double n = static_cast<double>(trips.size());
  if (wins == 0) return -100.0;
  if (losses == 0 || loss_sum == 0.0) return static_cast<double>(wins) / n * 100.0;
  const double r = (win_sum / static_cast<double>(wins)) / (loss_sum / static_cast<double>(losses));
  return (static_cast<double>(wins) * r - static_cast<double>(losses)) * 100.0 / (n * r);
}

PortfolioMetrics portfolio_metrics(const EquityCurve& curve, const TradeLog& log) {
  const auto& e = curve.equity;
  if (e.size() < 2) throw Error(ErrorCode::kFrameTooShort, "portfolio metrics need at least 2 days");
  for (double v : e) {
    if (!(v > 0.0)) throw Error(ErrorCode::kDomain, "equity must stay positive");
  }
  PortfolioMetrics m;
  const auto days_in = std::count(curve.in_market.begin(), curve.in_market.end(), true);
  m.time_in_market =
      curve.in_market.empty() ? 0.0 : static_cast<double>(days_in) * 100.0 / static_cast<double>(e.size());
  m.sharpe = sharpe_ratio(e, &m.sharpe_undefined);
  m.max_drawdown = max_drawdown(e);
  const auto trips = round_trips(log);
  m.round_trips = trips.size();
  m.kelly = kelly_percent(trips);
  m.daily_var_95 = daily_var_95(e);
  m.pnl = (e.back() / e.front() - 1.0) * 100.0;
  return m;
}

void write_trades_csv(std::ostream& out, const TradeLog& log) {
  out << "day,date,side,units,price,fee,cash_after,units_after\n";
  for (const auto& t : log.trades) {
    out << t.day << ',' << (t.date ? t.date->iso() : "") << ','
        << (t.side == Side::kBuy ? "buy" : "sell") << ',' << fmt(t.units) << ',' << fmt(t.price)
        << ',' << fmt(t.fee) << ',' << fmt(t.cash_after) << ',' << fmt(t.units_after) << '\n';
  }
}

void write_equity_csv(std::ostream& out, const EquityCurve& curve, std::span<const Date> dates) {
  out << "day,date,equity,in_market\n";
  for (std::size_t t = 0; t < curve.equity.size(); ++t) {
    out << t << ',' << (dates.empty() ? "" : dates[t].iso()) << ',' << fmt(curve.equity[t]) << ','
        << (curve.in_market[t] ? 1 : 0) << '\n';
  }
}

void write_metrics_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, PortfolioMetrics>>& rows) {
  out << "strategy,time_in_market_pct,sharpe,max_drawdown_pct,kelly_pct,daily_var_95_pct,pnl_pct,"
         "sharpe_undefined,round_trips\n";
  for (const auto& [name, m] : rows) {
    out << name << ',' << fmt(m.time_in_market) << ',' << fmt(m.sharpe) << ',' << fmt(m.max_drawdown)
        << ',' << fmt(m.kelly) << ',' << fmt(m.daily_var_95) << ',' << fmt(m.pnl) << ','
        << (m.sharpe_undefined ? 1 : 0) << ',' << m.round_trips << '\n';
  }
}

}  // namespace volsynth::backtest
