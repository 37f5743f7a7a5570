// Writes the bundled synthetic dataset and tweet corpus.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "volsynth/date.hpp"

namespace {

using volsynth::Date;

std::string grouped(long v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data/fixture";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int days = 300;
  const Date start = Date::from_ymd(2019, 1, 1);

  // Regime-switching returns so that the transformed volatility crosses 1.
  std::vector<double> close(days), open(days), high(days), low(days), inflow(days), funding(days),
      active(days);
  double price = 4000.0;
  double sigma = 0.02;
  for (int t = 0; t < days; ++t) {
    if (unit(rng) < 0.04) sigma = sigma > 0.05 ? 0.02 : 0.09;
    const double r = sigma * normal(rng) + 0.001;
    const double prev = price;
    price *= std::exp(r);
    open[t] = prev * (1.0 + 0.002 * normal(rng));
    close[t] = price;
    const double body_hi = std::max(open[t], close[t]);
    const double body_lo = std::min(open[t], close[t]);
    high[t] = body_hi * (1.0 + sigma * unit(rng));
    low[t] = body_lo * (1.0 - sigma * unit(rng));
    inflow[t] = 20000.0 * (1.0 + 8.0 * sigma) + 1500.0 * normal(rng);
    funding[t] = 0.0001 + 0.002 * sigma * normal(rng);
    active[t] = std::round(700000.0 + 50000.0 * normal(rng));
  }

  {
    std::ofstream out(dir / "dataset.csv");
    out << "date,open,high,low,close,exchange_inflow,funding_rate,active_addresses\n";
    for (int t = 0; t < days; ++t) {
      out << start.plus_days(t).iso() << ',' << fixed(open[t], 2) << ',' << fixed(high[t], 2) << ','
          << fixed(low[t], 2) << ',' << fixed(close[t], 2) << ','
          << (t < 20 ? "" : fixed(inflow[t], 1)) << ',' << (t < 40 ? "" : fixed(funding[t], 6)) << ','
          << fixed(active[t], 0) << '\n';
    }
  }

  {
    std::ofstream out(dir / "dataset_3row.csv");
    out << "date,open,high,low,close\n"
        << "2020-01-01,7200,7300,7100,7250\n"
        << "2020-01-02,7250,7400,7000,7050\n"
        << "2020-01-03,7050,7500,7000,7400\n";
  }

  const std::vector<std::string> exchanges{"#Binance", "#Coinbase", "#Bitfinex", "#Kraken", "#Huobi"};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(exchanges.size()) - 1);
  std::uniform_int_distribution<int> per_day(0, 3);
  {
    std::ofstream out(dir / "tweets.tsv");
    for (int t = 60; t < 250; ++t) {
      const std::string date = start.plus_days(t).iso();
      const int n = per_day(rng);
      for (int k = 0; k < n; ++k) {
        const long btc = 500 + static_cast<long>(9500.0 * unit(rng));
        const long usd = static_cast<long>(std::round(static_cast<double>(btc) * close[t]));
        const double kind = unit(rng);
        std::string text;
        if (kind < 0.4) {
          text = grouped(btc) + " #BTC (" + grouped(usd) + " USD) transferred from unknown wallet to " +
                 exchanges[pick(rng)];
        } else if (kind < 0.8) {
          text = grouped(btc) + " #BTC (" + grouped(usd) + " USD) transferred from " + exchanges[pick(rng)] +
                 " to unknown wallet";
        } else if (kind < 0.9) {
          text = grouped(btc) + " #BTC (" + grouped(usd) +
                 " USD) transferred from unknown wallet to unknown wallet";
        } else {
          text = grouped(btc * 10) + " #ETH (" + grouped(usd / 20) +
                 " USD) transferred from unknown wallet to #Gemini";
        }
        out << date << '\t' << "\xF0\x9F\x9A\xA8 " << text << " https://whale-alert.io/tx/" << t << k
            << '\n';
      }
    }
  }
  std::cout << "fixture written to " << dir.string() << '\n';
  return 0;
}
