#include "volsynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "volsynth/error.hpp"
#include "volsynth/eval.hpp"
#include "volsynth/text.hpp"
#include "volsynth/whale.hpp"

namespace volsynth::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) { return text::format_double(v); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

fs::path output_dir(const PipelineConfig& c) {
  fs::path dir = c.resolve(c.paths.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
  return dir;
}

fs::path features_path(const PipelineConfig& c) {
  return c.paths.features.empty() ? output_dir(c) / "features.csv" : c.resolve(c.paths.features);
}

void require_column(const ingest::FeatureFrame& frame, const std::string& name, const std::string& what) {
  if (!frame.has_column(name)) {
    throw Error(ErrorCode::kConfig, what + " column '" + name + "' is not in the dataset");
  }
}

ingest::FeatureFrame load_features(const PipelineConfig& c) {
  auto frame = ingest::load_dataset(features_path(c), kTargetColumn);
  for (const char* name : {kTargetColumn, kLogRetFutureColumn, kClosePriceColumn, kLogRetColumn}) {
    require_column(frame, name, "prepared");
  }
  return frame;
}

const ingest::SplitBoundaries& require_splits(const PipelineConfig& c) {
  if (!c.splits) throw Error(ErrorCode::kConfig, "splits: required by this command");
  return *c.splits;
}

std::size_t row_or_throw(const ingest::FeatureFrame& frame, Date d) {
  auto r = frame.row_of(d);
  if (!r) throw Error(ErrorCode::kBoundary, "date " + d.iso() + " is not in the prepared frame");
  return *r;
}

model::Checkpoint load_model(const PipelineConfig& c, const CommandOptions& o, std::size_t input_dim) {
  const fs::path path = o.checkpoint ? *o.checkpoint : output_dir(c) / "checkpoint.json";
  auto ck = model::load_checkpoint(path);
  if (static_cast<std::size_t>(ck.config.input_dim) != input_dim) {
    throw Error(ErrorCode::kConfig, "checkpoint expects " + std::to_string(ck.config.input_dim) +
                                        " features but the config selects " + std::to_string(input_dim));
  }
  return ck;
}

// Forecast over the test split from the trained checkpoint.
Forecast test_forecast(const PipelineConfig& c, const CommandOptions& o,
                       const ingest::FeatureFrame& frame, const std::vector<std::string>& cols) {
  const auto& b = require_splits(c);
  auto splits = ingest::split_by_date(frame, b);
  const auto ck = load_model(c, o, cols.size());
  const std::size_t first = row_or_throw(frame, splits.test.dates().front());
  const std::size_t last = row_or_throw(frame, splits.test.dates().back());
  return forecast(ck.config, ck.weights, frame, cols, first, last + 1);
}

json metrics_json(const eval::ConfusionCounts& cc, const eval::SpikeMetrics& m) {
  return json{{"tp", cc.tp},
              {"fp", cc.fp},
              {"tn", cc.tn},
              {"fn", cc.fn},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1}};
}

}  // namespace

bool is_reserved_column(const std::string& name) {
  return name == kTargetColumn || name == kLogRetFutureColumn || name == kSpikeFutureColumn ||
         name == kClosePriceColumn || name == kLogRetColumn;
}

ingest::FeatureFrame whale_frame_from_corpus(const fs::path& corpus) {
  auto result = whale::parse_corpus(corpus, whale::ExchangeRegistry::defaults());
  if (result.transfers.empty()) {
    throw Error(ErrorCode::kMalformedInput, "tweet corpus " + corpus.string() + " has no whale transfers");
  }
  Date first = result.transfers.front().first.timestamp;
  Date last = first;
  for (const auto& [t, _] : result.transfers) {
    first = std::min(first, t.timestamp);
    last = std::max(last, t.timestamp);
  }
  return whale::to_frame(whale::aggregate_daily(result.transfers, first, last));
}

ingest::FeatureFrame prepare_frame(const PrepareConfig& cfg, const ingest::FeatureFrame& raw,
                                   const std::optional<ingest::FeatureFrame>& whale,
                                   double spike_threshold) {
  for (const auto& [name, what] : {std::pair{cfg.open, "open"}, std::pair{cfg.high, "high"},
                                   std::pair{cfg.low, "low"}, std::pair{cfg.close, "close"}}) {
    require_column(raw, name, what);
  }
  const std::size_t w = static_cast<std::size_t>(cfg.volatility.window);
  if (raw.rows() < w + 1) {
    throw Error(ErrorCode::kFrameTooShort, "dataset has " + std::to_string(raw.rows()) +
                                               " rows; the volatility window needs at least " +
                                               std::to_string(w + 1));
  }

  ingest::FeatureFrame frame = whale ? ingest::merge_columns(raw, *whale) : raw;
  frame = ingest::fill_missing(frame, cfg.fill);

  const auto open = frame.values(cfg.open);
  const auto high = frame.values(cfg.high);
  const auto low = frame.values(cfg.low);
  const auto close = frame.values(cfg.close);
  const std::size_t n = frame.rows();

  std::vector<double> hl(n), co(n);
  for (std::size_t t = 0; t < n; ++t) {
    try {
      const auto s = features::candle_spreads(open[t], high[t], low[t], close[t]);
      hl[t] = s.hl;
      co[t] = s.co;
    } catch (const Error& e) {
      throw Error(e.code(), "row " + frame.dates()[t].iso() + ": " + e.what());
    }
  }
  frame.set_column("ema" + std::to_string(cfg.ema.n), features::ema(close, cfg.ema));
  frame.set_column("HL_sprd", hl);
  frame.set_column("CO_sprd", co);

  const auto ret = features::log_returns(close);
  const auto vol = features::realized_volatility(ret, cfg.volatility);
  ingest::Column ret_col(n), vol_col(n);
  for (std::size_t i = 0; i < ret.size(); ++i) ret_col[i + 1] = ret[i];
  for (std::size_t i = 0; i < vol.size(); ++i) vol_col[i + w] = vol[i];
  frame.set_column("log_returns", std::move(ret_col));
  frame.set_column("vol", std::move(vol_col));
  frame = ingest::fill_missing(frame, cfg.fill);

  // Untransformed copies used for labels and trading.
  const auto raw_ret = frame.values("log_returns");
  frame.set_column(kClosePriceColumn, close);
  frame.set_column(kLogRetColumn, raw_ret);

  for (const auto& [name, method] : cfg.transforms) {
    require_column(frame, name, "transform");
    try {
      frame.set_column(name, features::apply_transform(frame.values(name), method));
    } catch (const Error& e) {
      throw Error(e.code(), "column '" + name + "': " + e.what());
    }
  }

  const auto tvol = frame.values("vol");
  std::vector<double> vol_future(n - 1), ret_future(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    vol_future[t] = tvol[t + 1];
    ret_future[t] = raw_ret[t + 1];
  }
  const auto spikes = features::label_spikes(vol_future, ret_future, features::SpikeRule{spike_threshold});
  std::vector<double> spike_col(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) spike_col[t] = spikes[t] ? 1.0 : 0.0;

  ingest::FeatureFrame out = frame.slice(0, n - 1);
  out.set_column(kTargetColumn, vol_future);
  out.set_column(kLogRetFutureColumn, ret_future);
  out.set_column(kSpikeFutureColumn, spike_col);
  out.set_target_column(kTargetColumn);
  return out;
}

std::vector<std::string> feature_columns(const PipelineConfig& cfg, const ingest::FeatureFrame& frame) {
  std::vector<std::string> cols;
  if (cfg.features.empty()) {
    for (const auto& name : frame.column_names()) {
      if (!is_reserved_column(name)) cols.push_back(name);
    }
  } else {
    std::vector<std::string> missing;
    for (const auto& name : cfg.features) {
      if (!frame.has_column(name)) missing.push_back(name);
    }
    if (!missing.empty()) {
      std::string msg = "features not in the dataset:";
      for (const auto& m : missing) msg += " " + m;
      throw Error(ErrorCode::kConfig, msg);
    }
    cols = cfg.features;
  }
  if (cols.empty()) throw Error(ErrorCode::kConfig, "no feature columns selected");
  return cols;
}

std::vector<model::Matrix> windows_for(const ingest::FeatureFrame& frame,
                                       const std::vector<std::string>& columns, int seq_len,
                                       const std::vector<Date>& dates) {
  std::vector<std::vector<double>> data;
  for (const auto& c : columns) data.push_back(frame.values(c));
  const auto n = static_cast<std::size_t>(seq_len);
  std::vector<model::Matrix> out;
  for (Date d : dates) {
    const std::size_t r = row_or_throw(frame, d);
    if (r + 1 < n) {
      throw Error(ErrorCode::kFrameTooShort, "date " + d.iso() + " has fewer than " +
                                                 std::to_string(n) + " rows of history");
    }
    model::Matrix m(seq_len, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < columns.size(); ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[j][r + 1 - n + i];
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

Forecast forecast(const model::ModelConfig& mc, const model::ModelWeights& weights,
                  const ingest::FeatureFrame& frame, const std::vector<std::string>& columns,
                  std::size_t first_row, std::size_t end_row) {
  const auto n = static_cast<std::size_t>(mc.seq_len);
  Forecast f;
  for (std::size_t r = std::max(first_row, n - 1); r < end_row && r < frame.rows(); ++r) {
    f.dates.push_back(frame.dates()[r]);
  }
  for (const auto& w : windows_for(frame, columns, mc.seq_len, f.dates)) {
    f.pred_vol.push_back(model::predict(mc, weights, w).back());
  }
  return f;
}

void write_forecast_csv(const fs::path& path, const Forecast& f, const ingest::FeatureFrame& frame) {
  auto out = open_out(path);
  out << "date,pred_vol,true_vol\n";
  const auto truth = frame.values(kTargetColumn);
  for (std::size_t i = 0; i < f.dates.size(); ++i) {
    out << f.dates[i].iso() << ',' << fmt(f.pred_vol[i]) << ','
        << fmt(truth[row_or_throw(frame, f.dates[i])]) << '\n';
  }
}

Forecast read_forecast_csv(const fs::path& path) {
  auto frame = ingest::load_dataset(path, "");
  require_column(frame, "pred_vol", "predictions");
  Forecast f;
  f.dates = frame.dates();
  f.pred_vol = frame.values("pred_vol");
  return f;
}

std::vector<fs::path> run_parse_tweets(const PipelineConfig& c) {
  if (c.paths.tweets.empty()) throw Error(ErrorCode::kConfig, "paths.tweets: required by parse-tweets");
  const fs::path corpus = c.resolve(c.paths.tweets);
  auto result = whale::parse_corpus(corpus, whale::ExchangeRegistry::defaults());
  const fs::path dir = output_dir(c);
  const fs::path csv = dir / "whale_daily.csv";
  const fs::path stats = dir / "parse_stats.json";
  ingest::save_dataset(whale_frame_from_corpus(corpus), csv);
  const auto& s = result.stats;
  auto out = open_out(stats);
  out << json{{"lines", s.lines},
              {"accepted", s.accepted},
              {"rejected", s.rejected},
              {"malformed", s.malformed},
              {"unknown_hashtags", s.unknown_hashtags},
              {"ignored", s.ignored}}
             .dump(2)
      << '\n';
  return {csv, stats};
}

std::vector<fs::path> run_prepare(const PipelineConfig& c) {
  if (c.paths.dataset.empty()) throw Error(ErrorCode::kConfig, "paths.dataset: required by prepare");
  const auto raw = ingest::load_dataset(c.resolve(c.paths.dataset), "");
  std::optional<ingest::FeatureFrame> whale;
  if (!c.paths.whale_csv.empty()) {
    whale = ingest::load_dataset(c.resolve(c.paths.whale_csv), "");
  } else if (!c.paths.tweets.empty()) {
    whale = whale_frame_from_corpus(c.resolve(c.paths.tweets));
  }
  const auto frame = prepare_frame(c.prepare, raw, whale, c.evaluate.spike_threshold);
  feature_columns(c, frame);
  const fs::path path = c.paths.features.empty() ? output_dir(c) / "features.csv" : c.resolve(c.paths.features);
  ingest::save_dataset(frame, path);
  return {path};
}

std::vector<fs::path> run_train(const PipelineConfig& c) {
  const auto frame = load_features(c);
  const auto cols = feature_columns(c, frame);
  const auto splits = ingest::split_by_date(frame, require_splits(c));
  auto mc = c.model;
  mc.input_dim = static_cast<int>(cols.size());
  auto tc = c.train;
  tc.seed = c.seed;
  const auto result = train::train(mc, tc, splits.train, splits.validation, cols);

  const fs::path dir = output_dir(c);
  const fs::path ck = dir / "checkpoint.json";
  const fs::path hist = dir / "history.csv";
  model::save_checkpoint(ck, mc, result.weights);
  auto out = open_out(hist);
  out << "epoch,train_loss,val_loss,best\n";
  const auto& h = result.history;
  for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
    out << e + 1 << ',' << fmt(h.train_loss[e]) << ',' << fmt(h.val_loss[e]) << ','
        << (static_cast<int>(e + 1) == h.best_epoch ? 1 : 0) << '\n';
  }
  return {ck, hist};
}

std::vector<fs::path> run_grid(const PipelineConfig& c) {
  const auto frame = load_features(c);
  const auto cols = feature_columns(c, frame);
  const auto splits = ingest::split_by_date(frame, require_splits(c));
  auto mc = c.model;
  mc.input_dim = static_cast<int>(cols.size());
  auto tc = c.train;
  tc.seed = c.seed;
  const auto result =
      train::grid_search(c.grid, mc, tc, splits.train, splits.validation, cols, c.grid_jobs);

  const fs::path dir = output_dir(c);
  const fs::path board = dir / "leaderboard.csv";
  auto out = open_out(board);
  out << "rank,grid_index,layers,heads,batch_size,dropout,seed,best_val_rmse,best_epoch,stopped_epoch\n";
  for (std::size_t i = 0; i < result.leaderboard.size(); ++i) {
    const auto& e = result.leaderboard[i];
    out << i + 1 << ',' << e.grid_index << ',' << e.point.layers << ',' << e.point.heads << ','
        << e.point.batch_size << ',' << fmt(e.point.dropout) << ',' << e.seed << ','
        << fmt(e.best_val_loss) << ',' << e.best_epoch << ',' << e.stopped_epoch << '\n';
  }
  const auto& p = result.leaderboard.front().point;
  const fs::path ck = dir / ("checkpoint_grid_L" + std::to_string(p.layers) + "_H" +
                             std::to_string(p.heads) + "_B" + std::to_string(p.batch_size) + "_D" +
                             fmt(p.dropout) + ".json");
  model::save_checkpoint(ck, result.best_model, result.best_result.weights);
  return {board, ck};
}

std::vector<fs::path> run_evaluate(const PipelineConfig& c, const CommandOptions& o) {
  const auto frame = load_features(c);
  Forecast f;
  if (o.predictions) {
    f = read_forecast_csv(*o.predictions);
  } else {
    f = test_forecast(c, o, frame, feature_columns(c, frame));
  }
  if (f.dates.empty()) throw Error(ErrorCode::kFrameTooShort, "no days to evaluate");

  const auto truth_all = frame.values(kTargetColumn);
  const auto ret_all = frame.values(kLogRetFutureColumn);
  std::vector<double> truth, ret;
  for (Date d : f.dates) {
    const auto r = row_or_throw(frame, d);
    truth.push_back(truth_all[r]);
    ret.push_back(ret_all[r]);
  }
  const double th = c.evaluate.spike_threshold;
  const auto flags = features::label_spikes(truth, ret, features::SpikeRule{th});
  const auto cc = eval::confusion_at_threshold(f.pred_vol, ret, flags, th);
  const auto sm = eval::spike_metrics(cc);

  json corr = nullptr;
  try {
    const auto cs = eval::correlation_stats(f.pred_vol, truth);
    corr = json{{"r2", cs.r2}, {"pearson", cs.pearson}, {"spearman", cs.spearman}};
  } catch (const Error&) {
    // Constant predictions or truth leave correlation undefined.
  }

  const fs::path dir = output_dir(c);
  const fs::path preds = dir / "predictions.csv";
  const fs::path mjson = dir / "metrics.json";
  const fs::path mcsv = dir / "metrics.csv";
  const fs::path sweep = dir / "threshold_sweep.csv";
  write_forecast_csv(preds, f, frame);

  const double rmse = eval::rmse(f.pred_vol, truth);
  json m = metrics_json(cc, sm);
  m["days"] = f.dates.size();
  m["first_date"] = f.dates.front().iso();
  m["last_date"] = f.dates.back().iso();
  m["rmse"] = rmse;
  m["spike_threshold"] = th;
  m["correlation"] = corr;
  open_out(mjson) << m.dump(2) << '\n';

  {
    auto out = open_out(mcsv);
    out << "days,rmse,threshold,tp,fp,tn,fn,precision,recall,f1\n";
    out << f.dates.size() << ',' << fmt(rmse) << ',' << fmt(th) << ',' << cc.tp << ',' << cc.fp << ','
        << cc.tn << ',' << cc.fn << ',' << fmt(sm.precision) << ',' << fmt(sm.recall) << ','
        << fmt(sm.f1) << '\n';
  }
  {
    auto out = open_out(sweep);
    out << "threshold,tp,fp,tn,fn,precision,recall,f1\n";
    for (const auto& row : eval::threshold_sweep(f.pred_vol, truth, ret, c.evaluate.sweep_thresholds)) {
      out << fmt(row.threshold) << ',' << row.counts.tp << ',' << row.counts.fp << ',' << row.counts.tn
          << ',' << row.counts.fn << ',' << fmt(row.metrics.precision) << ','
          << fmt(row.metrics.recall) << ',' << fmt(row.metrics.f1) << '\n';
    }
  }
  return {preds, mjson, mcsv, sweep};
}

std::vector<fs::path> run_ablate(const PipelineConfig& c, const CommandOptions& o) {
  const auto frame = load_features(c);
  const auto cols = feature_columns(c, frame);
  const auto splits = ingest::split_by_date(frame, require_splits(c));
  const auto ck = load_model(c, o, cols.size());

  std::vector<double> baseline;
  for (const auto& name : cols) {
    if (auto it = c.evaluate.ablation_baseline.find(name); it != c.evaluate.ablation_baseline.end()) {
      baseline.push_back(it->second);
    } else {
      const auto v = splits.train.values(name);
      baseline.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    }
  }
  const std::size_t first = row_or_throw(frame, splits.test.dates().front());
  const std::size_t last = row_or_throw(frame, splits.test.dates().back());
  std::vector<Date> dates;
  for (std::size_t r = std::max(first, static_cast<std::size_t>(ck.config.seq_len) - 1); r <= last; ++r) {
    dates.push_back(frame.dates()[r]);
  }
  const auto windows = windows_for(frame, cols, ck.config.seq_len, dates);
  const auto report = eval::feature_ablation(ck.config, ck.weights, windows, cols, baseline);

  const fs::path dir = output_dir(c);
  const fs::path full = dir / "attribution.csv";
  const fs::path top = dir / "attribution_top3.csv";
  {
    auto out = open_out(full);
    out << "rank,feature,score,baseline\n";
    for (std::size_t i = 0; i < report.size(); ++i) {
      const auto j = std::find(cols.begin(), cols.end(), report[i].feature) - cols.begin();
      out << i + 1 << ',' << report[i].feature << ',' << fmt(report[i].score) << ','
          << fmt(baseline[static_cast<std::size_t>(j)]) << '\n';
    }
  }
  {
    auto out = open_out(top);
    out << "rank,feature,score\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, report.size()); ++i) {
      out << i + 1 << ',' << report[i].feature << ',' << fmt(report[i].score) << '\n';
    }
  }
  return {full, top};
}

std::vector<fs::path> run_backtest(const PipelineConfig& c, const CommandOptions& o) {
  const auto frame = load_features(c);
  const fs::path dir = output_dir(c);
  Forecast f;
  if (o.predictions) {
    f = read_forecast_csv(*o.predictions);
  } else if (fs::exists(dir / "predictions.csv")) {
    f = read_forecast_csv(dir / "predictions.csv");
  } else {
    f = test_forecast(c, o, frame, feature_columns(c, frame));
  }
  const auto close_all = frame.values(kClosePriceColumn);
  const auto ret_all = frame.values(kLogRetColumn);
  std::vector<double> closes, rets;
  for (Date d : f.dates) {
    const auto r = row_or_throw(frame, d);
    closes.push_back(close_all[r]);
    rets.push_back(ret_all[r]);
  }

  std::vector<fs::path> written;
  std::vector<std::pair<std::string, backtest::PortfolioMetrics>> rows;
  for (const auto& spec : c.backtest.strategies) {
    const auto res = backtest::run_backtest(closes, rets, f.pred_vol, c.backtest.strategy(spec), f.dates);
    const fs::path trades = dir / ("trades_" + spec.name() + ".csv");
    const fs::path equity = dir / ("equity_" + spec.name() + ".csv");
    {
      auto out = open_out(trades);
      backtest::write_trades_csv(out, res.log);
    }
    {
      auto out = open_out(equity);
      backtest::write_equity_csv(out, res.curve, f.dates);
    }
    rows.emplace_back(spec.name(), backtest::portfolio_metrics(res.curve, res.log));
    written.push_back(trades);
    written.push_back(equity);
  }
  const fs::path metrics = dir / "backtest_metrics.csv";
  {
    auto out = open_out(metrics);
    backtest::write_metrics_csv(out, rows);
  }
  written.push_back(metrics);
  return written;
}

std::vector<fs::path> run_command(const std::string& command, const PipelineConfig& c,
                                  const CommandOptions& o) {
  if (command == "parse-tweets") return run_parse_tweets(c);
  if (command == "prepare") return run_prepare(c);
  if (command == "train") return run_train(c);
  if (command == "grid") return run_grid(c);
  if (command == "evaluate") return run_evaluate(c, o);
  if (command == "ablate") return run_ablate(c, o);
  if (command == "backtest") return run_backtest(c, o);
  throw Error(ErrorCode::kConfig, "unknown command '" + command + "'");
}

}  // namespace volsynth::pipeline
