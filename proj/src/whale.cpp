#include "volsynth/whale.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <regex>

#include "volsynth/error.hpp"
#include "volsynth/text.hpp"

namespace volsynth::whale {

namespace {

std::string normalize_entity(std::string_view label) {
  label = text::trim(label);
  if (!label.empty() && label.front() == '#') label.remove_prefix(1);
  return text::to_lower(label);
}

std::vector<std::string_view> tokenize(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && text::to_lower(a) == text::to_lower(b);
}

// Thousands-grouped or plain amount with optional decimals: 997, 6,269,280, 1,234.5
std::optional<double> parse_amount(std::string_view token) {
  static const std::regex kAmount(R"(^(\d{1,3}(,\d{3})+|\d+)(\.\d+)?$)");
  std::string s(token);
  if (!std::regex_match(s, kAmount)) return std::nullopt;
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  return text::parse_double(s);
}

std::string join(const std::vector<std::string_view>& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool is_url(std::string_view token) {
  return token.rfind("http://", 0) == 0 || token.rfind("https://", 0) == 0;
}

}  // namespace

ExchangeRegistry::ExchangeRegistry(std::initializer_list<std::string_view> names) {
  for (auto n : names) add(n);
  if (names_.empty()) throw Error(ErrorCode::kConfig, "exchange registry must not be empty");
}

ExchangeRegistry::ExchangeRegistry(const std::vector<std::string>& names) {
  for (const auto& n : names) add(n);
  if (names_.empty()) throw Error(ErrorCode::kConfig, "exchange registry must not be empty");
}

ExchangeRegistry ExchangeRegistry::defaults() {
  return ExchangeRegistry{"Binance",  "Bitfinex", "Bitstamp", "Bittrex", "Coinbase", "Gemini",
                          "Huobi",    "Kraken",   "OKEx",     "Poloniex", "Bitmex",  "Bybit",
                          "FTX",      "KuCoin",   "Gate.io",  "Deribit",  "Upbit",   "Bithumb"};
}

void ExchangeRegistry::add(std::string_view name) {
  auto n = normalize_entity(name);
  if (!n.empty()) names_.insert(std::move(n));
}

bool ExchangeRegistry::contains(std::string_view label) const {
  return names_.count(normalize_entity(label)) != 0;
}

std::optional<WhaleTransfer> parse_tweet(std::string_view text, Date date, ParseStats* stats) {
  auto reject = [&]() -> std::optional<WhaleTransfer> {
    if (stats) ++stats->rejected;
    return std::nullopt;
  };
  auto malformed = [&]() -> std::optional<WhaleTransfer> {
    if (stats) ++stats->malformed;
    return std::nullopt;
  };

  const auto tokens = tokenize(text);
  auto btc_it = std::find_if(tokens.begin(), tokens.end(),
                             [](std::string_view t) { return iequals(t, "#BTC"); });
  auto verb_it = std::find_if(tokens.begin(), tokens.end(),
                              [](std::string_view t) { return iequals(t, "transferred"); });
  if (btc_it == tokens.end() || verb_it == tokens.end()) return reject();

  if (btc_it == tokens.begin()) return malformed();
  auto btc = parse_amount(*(btc_it - 1));
  if (!btc || *btc <= 0.0) return malformed();

  static const std::regex kUsd(R"(\(\s*([0-9][0-9,]*(?:\.[0-9]+)?)\s+USD\s*\))");
  std::string body(text);
  std::smatch m;
  if (!std::regex_search(body, m, kUsd)) return malformed();
  auto usd = parse_amount(m[1].str());
  if (!usd) return malformed();

  const auto verb_pos = static_cast<std::size_t>(verb_it - tokens.begin());
  std::size_t from_pos = tokens.size();
  for (std::size_t i = verb_pos + 1; i < tokens.size(); ++i) {
    if (iequals(tokens[i], "from")) {
      from_pos = i;
      break;
    }
  }
  if (from_pos == tokens.size()) return malformed();
  std::size_t to_pos = tokens.size();
  for (std::size_t i = from_pos + 1; i < tokens.size(); ++i) {
    if (iequals(tokens[i], "to")) {
      to_pos = i;
      break;
    }
  }
  if (to_pos == tokens.size()) return malformed();
  std::size_t dest_end = to_pos + 1;
  while (dest_end < tokens.size() && !is_url(tokens[dest_end]) &&
         !iequals(tokens[dest_end], "from") && !iequals(tokens[dest_end], "to")) {
    ++dest_end;
  }

  WhaleTransfer t;
  t.timestamp = date;
  t.btc_amount = *btc;
  t.usd_amount = *usd;
  t.source = join(tokens, from_pos + 1, to_pos);
  t.destination = join(tokens, to_pos + 1, dest_end);
  if (t.source.empty() || t.destination.empty()) return malformed();
  if (stats) ++stats->accepted;
  return t;
}

FlowDirection classify_direction(const WhaleTransfer& t, const ExchangeRegistry& reg,
                                 ParseStats* stats) {
  auto is_exchange = [&](const std::string& label) {
    if (normalize_entity(label) == "unknown wallet") return false;
    const bool hit = reg.contains(label);
    if (!hit && stats && !label.empty() && label.front() == '#') ++stats->unknown_hashtags;
    return hit;
  };
  const bool src = is_exchange(t.source);
  const bool dst = is_exchange(t.destination);
  if (!src && dst) return FlowDirection::kWalletToExchange;
  if (src && !dst) return FlowDirection::kExchangeToWallet;
  if (stats) ++stats->ignored;
  return FlowDirection::kIgnored;
}

std::vector<DailyWhaleFlows> aggregate_daily(
    const std::vector<std::pair<WhaleTransfer, FlowDirection>>& transfers, Date first, Date last) {
  std::vector<DailyWhaleFlows> out;
  if (last < first) return out;
  out.reserve(static_cast<std::size_t>(last - first + 1));
  for (Date d = first; d <= last; d = d.next()) out.push_back(DailyWhaleFlows{d});

  // Sum per day in a canonical order so the result does not depend on input order.
  std::vector<const std::pair<WhaleTransfer, FlowDirection>*> sorted;
  for (const auto& item : transfers) {
    if (item.second == FlowDirection::kIgnored) continue;
    if (item.first.timestamp < first || item.first.timestamp > last) continue;
    sorted.push_back(&item);
  }
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    const auto& ta = a->first;
    const auto& tb = b->first;
    return std::tie(ta.timestamp, a->second, ta.btc_amount, ta.usd_amount, ta.source,
                    ta.destination) < std::tie(tb.timestamp, b->second, tb.btc_amount,
                                               tb.usd_amount, tb.source, tb.destination);
  });

  for (const auto* item : sorted) {
    auto& day = out[static_cast<std::size_t>(item->first.timestamp - first)];
    if (item->second == FlowDirection::kWalletToExchange) {
      day.btc_minus += item->first.btc_amount;
      day.usd_minus += item->first.usd_amount;
    } else {
      day.btc_plus += item->first.btc_amount;
      day.usd_plus += item->first.usd_amount;
    }
  }
  return out;
}

double net_exchange_flow(const DailyWhaleFlows& f) { return std::abs(f.btc_plus - f.btc_minus); }

CorpusResult parse_corpus(std::istream& in, const ExchangeRegistry& reg) {
  CorpusResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    ++result.stats.lines;
    auto tab = line.find('\t');
    auto date = tab == std::string::npos ? std::nullopt
                                         : Date::parse(text::trim(std::string_view(line).substr(0, tab)));
    if (!date) {
      ++result.stats.malformed;
      continue;
    }
    auto t = parse_tweet(std::string_view(line).substr(tab + 1), *date, &result.stats);
    if (!t) continue;
    auto dir = classify_direction(*t, reg, &result.stats);
    result.transfers.emplace_back(std::move(*t), dir);
  }
  return result;
}

CorpusResult parse_corpus(const std::filesystem::path& path, const ExchangeRegistry& reg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open tweet corpus " + path.string());
  return parse_corpus(in, reg);
}

ingest::FeatureFrame to_frame(const std::vector<DailyWhaleFlows>& flows) {
  std::vector<Date> dates;
  std::vector<double> bm, bp, um, up;
  for (const auto& f : flows) {
    dates.push_back(f.date);
    bm.push_back(f.btc_minus);
    bp.push_back(f.btc_plus);
    um.push_back(f.usd_minus);
    up.push_back(f.usd_plus);
  }
  ingest::FeatureFrame frame(std::move(dates));
  frame.set_column("BTCminus", bm);
  frame.set_column("BTCplus", bp);
  frame.set_column("USDminus", um);
  frame.set_column("USDplus", up);
  return frame;
}

}  // namespace volsynth::whale
