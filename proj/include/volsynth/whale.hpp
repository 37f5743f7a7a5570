#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "volsynth/date.hpp"
#include "volsynth/ingest.hpp"

namespace volsynth::whale {

struct WhaleTransfer {
  Date timestamp;
  double btc_amount = 0.0;
  double usd_amount = 0.0;
  std::string source;
  std::string destination;

  friend bool operator==(const WhaleTransfer&, const WhaleTransfer&) = default;
};

enum class FlowDirection { kWalletToExchange, kExchangeToWallet, kIgnored };

struct DailyWhaleFlows {
  Date date;
  double btc_minus = 0.0;  // wallets -> exchanges
  double btc_plus = 0.0;   // exchanges -> wallets
  double usd_minus = 0.0;
  double usd_plus = 0.0;

  friend bool operator==(const DailyWhaleFlows&, const DailyWhaleFlows&) = default;
};

// Case-insensitive set of exchange names. A leading '#' on either the stored
// name or the looked-up label is ignored.
class ExchangeRegistry {
 public:
  ExchangeRegistry(std::initializer_list<std::string_view> names);
  explicit ExchangeRegistry(const std::vector<std::string>& names);

  static ExchangeRegistry defaults();

  bool contains(std::string_view label) const;
  const std::set<std::string>& names() const { return names_; }

 private:
  void add(std::string_view name);
  std::set<std::string> names_;
};

// Counters for corpus-level diagnostics. Nothing here is fatal.
struct ParseStats {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;           // not a #BTC transfer
  std::size_t malformed = 0;          // looked like a transfer but fields did not parse
  std::size_t unknown_hashtags = 0;   // '#'-tagged entity absent from the registry
  std::size_t ignored = 0;            // wallet->wallet or exchange->exchange
};

std::optional<WhaleTransfer> parse_tweet(std::string_view text, Date date,
                                         ParseStats* stats = nullptr);

FlowDirection classify_direction(const WhaleTransfer& t, const ExchangeRegistry& reg,
                                 ParseStats* stats = nullptr);

std::vector<DailyWhaleFlows> aggregate_daily(
    const std::vector<std::pair<WhaleTransfer, FlowDirection>>& transfers, Date first, Date last);

double net_exchange_flow(const DailyWhaleFlows& f);

struct CorpusResult {
  std::vector<std::pair<WhaleTransfer, FlowDirection>> transfers;
  ParseStats stats;
};

// One record per line: `<YYYY-MM-DD>\t<tweet text>`.
CorpusResult parse_corpus(std::istream& in, const ExchangeRegistry& reg);
CorpusResult parse_corpus(const std::filesystem::path& path, const ExchangeRegistry& reg);

// Columns BTCminus, BTCplus, USDminus, USDplus over the given flows.
ingest::FeatureFrame to_frame(const std::vector<DailyWhaleFlows>& flows);

}  // namespace volsynth::whale
