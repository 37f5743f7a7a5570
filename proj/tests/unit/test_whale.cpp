#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "volsynth/whale.hpp"

namespace {

using namespace volsynth;
using namespace volsynth::whale;

const Date kDay = Date::from_ymd(2021, 5, 19);

TEST(Whale, PaperExampleParses) {
  auto t = parse_tweet("997 #BTC (6,269,280 USD) transferred from #Bitfinex to Unknown wallet", kDay);
  ASSERT_TRUE(t.has_value());
  EXPECT_DOUBLE_EQ(t->btc_amount, 997.0);
  EXPECT_DOUBLE_EQ(t->usd_amount, 6269280.0);
  EXPECT_EQ(t->source, "#Bitfinex");
  EXPECT_EQ(t->destination, "Unknown wallet");
  EXPECT_EQ(t->timestamp, kDay);
}

TEST(Whale, OtherAssetIsRejected) {
  EXPECT_FALSE(parse_tweet("11,000 #ETH (2,473,411 USD) transferred from Unknown wallet to #Gemini", kDay));
}

TEST(Whale, NonTransferIsRejected) {
  EXPECT_FALSE(parse_tweet("6,000,000 #USDC (6,000,000 USD) burned at USDC Treasury", kDay));
}

TEST(Whale, EmptyIsRejected) { EXPECT_FALSE(parse_tweet("", kDay)); }

TEST(Whale, DecimalsAndEmojiAndLink) {
  auto t = parse_tweet(
      "\xF0\x9F\x9A\xA8 1,234.5 #BTC (40,000,000.25 USD) transferred from unknown wallet to #Coinbase "
      "https://whale-alert.io/tx/abc",
      kDay);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(t->btc_amount, 1234.5);
  EXPECT_DOUBLE_EQ(t->usd_amount, 40000000.25);
  EXPECT_EQ(t->source, "unknown wallet");
  EXPECT_EQ(t->destination, "#Coinbase");
}

TEST(Whale, MalformedAmountIsCounted) {
  ParseStats stats;
  EXPECT_FALSE(parse_tweet("1,23,4 #BTC (5 USD) transferred from #Binance to unknown wallet", kDay, &stats));
  EXPECT_EQ(stats.malformed, 1u);
}

TEST(WhaleProperty, NeverAcceptsWithoutKeywords) {
  const std::vector<std::string> texts{
      "997 BTC (6,269,280 USD) transferred from #Bitfinex to Unknown wallet",
      "997 #BTC (6,269,280 USD) moved from #Bitfinex to Unknown wallet",
      "997 #btcx (1 USD) transferred from a to b",
      "transferred",
      "#BTC"};
  for (const auto& s : texts) EXPECT_FALSE(parse_tweet(s, kDay)) << s;
}

TEST(Whale, ClassifyDirection) {
  const auto reg = ExchangeRegistry::defaults();
  WhaleTransfer t{kDay, 1, 1, "#Bitfinex", "Unknown wallet"};
  EXPECT_EQ(classify_direction(t, reg), FlowDirection::kExchangeToWallet);
  t.source = "Unknown wallet";
  t.destination = "#Binance";
  EXPECT_EQ(classify_direction(t, reg), FlowDirection::kWalletToExchange);
  t.source = "#Binance";
  t.destination = "#Bitfinex";
  EXPECT_EQ(classify_direction(t, reg), FlowDirection::kIgnored);
  t.source = "unknown wallet";
  t.destination = "Unknown Wallet";
  EXPECT_EQ(classify_direction(t, reg), FlowDirection::kIgnored);
}

TEST(Whale, UnknownHashtagIsWalletWithCounter) {
  const auto reg = ExchangeRegistry::defaults();
  ParseStats stats;
  WhaleTransfer t{kDay, 1, 1, "#NotAnExchange", "#Kraken"};
  EXPECT_EQ(classify_direction(t, reg, &stats), FlowDirection::kWalletToExchange);
  EXPECT_EQ(stats.unknown_hashtags, 1u);
}

TEST(Whale, RegistryIsCaseInsensitive) {
  ExchangeRegistry reg{"Bitfinex", "#Gemini"};
  EXPECT_TRUE(reg.contains("#BITFINEX"));
  EXPECT_TRUE(reg.contains("gemini"));
  EXPECT_FALSE(reg.contains("Binance"));
  EXPECT_ERROR_CODE(ExchangeRegistry(std::vector<std::string>{}), ErrorCode::kConfig);
}

TEST(Whale, EmptyRangeIsAllZero) {
  auto flows = aggregate_daily({}, kDay, kDay.plus_days(2));
  ASSERT_EQ(flows.size(), 3u);
  for (const auto& f : flows) {
    EXPECT_EQ(f.btc_minus + f.btc_plus + f.usd_minus + f.usd_plus, 0.0);
  }
}

TEST(Whale, SameDayAggregation) {
  std::vector<std::pair<WhaleTransfer, FlowDirection>> ts{
      {{kDay, 997, 6269280, "#Bitfinex", "Unknown wallet"}, FlowDirection::kExchangeToWallet},
      {{kDay, 500, 3000000, "Unknown wallet", "#Binance"}, FlowDirection::kWalletToExchange},
      {{kDay, 50, 1, "#Binance", "#Kraken"}, FlowDirection::kIgnored}};
  auto flows = aggregate_daily(ts, kDay, kDay);
  ASSERT_EQ(flows.size(), 1u);
  EXPECT_DOUBLE_EQ(flows[0].btc_plus, 997);
  EXPECT_DOUBLE_EQ(flows[0].btc_minus, 500);
  EXPECT_DOUBLE_EQ(net_exchange_flow(flows[0]), 497);
}

TEST(Whale, PaperTweetAloneAggregates) {
  const auto reg = ExchangeRegistry::defaults();
  auto t = parse_tweet("997 #BTC (6,269,280 USD) transferred from #Bitfinex to Unknown wallet", kDay);
  ASSERT_TRUE(t);
  auto flows = aggregate_daily({{*t, classify_direction(*t, reg)}}, kDay, kDay);
  EXPECT_EQ(flows[0], (DailyWhaleFlows{kDay, 0, 997, 0, 6269280}));
}

TEST(Whale, NetFlowIsAbsolute) {
  EXPECT_EQ(net_exchange_flow(DailyWhaleFlows{kDay, 0, 0, 0, 0}), 0.0);
  EXPECT_EQ(net_exchange_flow(DailyWhaleFlows{kDay, 350, 100, 0, 0}), 250.0);
}

TEST(WhaleProperty, AggregationIsOrderIndependentAndConserving) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> amount(0.1, 5000);
  std::uniform_int_distribution<int> day(0, 9);
  std::uniform_int_distribution<int> dir(0, 2);
  std::vector<std::pair<WhaleTransfer, FlowDirection>> ts;
  double non_ignored = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto d = static_cast<FlowDirection>(dir(rng));
    WhaleTransfer t{kDay.plus_days(day(rng)), amount(rng), amount(rng) * 30000, "a", "b"};
    if (d != FlowDirection::kIgnored) non_ignored += t.btc_amount;
    ts.emplace_back(t, d);
  }
  const auto reference = aggregate_daily(ts, kDay, kDay.plus_days(9));
  double total = 0.0;
  for (const auto& f : reference) total += f.btc_minus + f.btc_plus;
  EXPECT_NEAR(total, non_ignored, 1e-9 * non_ignored);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(ts.begin(), ts.end(), rng);
    EXPECT_EQ(aggregate_daily(ts, kDay, kDay.plus_days(9)), reference);
  }
}

TEST(Whale, CorpusParsesToFrame) {
  std::istringstream in(
      "2021-05-19\t997 #BTC (6,269,280 USD) transferred from #Bitfinex to Unknown wallet\n"
      "2021-05-19\t11,000 #ETH (2,473,411 USD) transferred from Unknown wallet to #Gemini\n"
      "2021-05-20\t500 #BTC (3,000,000 USD) transferred from unknown wallet to #Binance\n");
  auto result = parse_corpus(in, ExchangeRegistry::defaults());
  EXPECT_EQ(result.stats.lines, 3u);
  EXPECT_EQ(result.stats.accepted, 2u);
  EXPECT_EQ(result.stats.rejected, 1u);
  auto frame = to_frame(aggregate_daily(result.transfers, kDay, kDay.plus_days(1)));
  EXPECT_EQ(frame.values("BTCplus"), (std::vector<double>{997, 0}));
  EXPECT_EQ(frame.values("BTCminus"), (std::vector<double>{0, 500}));
}

}  // namespace
