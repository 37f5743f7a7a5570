#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "volsynth/backtest.hpp"
#include "volsynth/features.hpp"
#include "volsynth/ingest.hpp"
#include "volsynth/model.hpp"
#include "volsynth/train.hpp"

namespace volsynth::pipeline {

// Columns written by `prepare` that are never model inputs.
inline constexpr const char* kTargetColumn = "vol_future";
inline constexpr const char* kLogRetFutureColumn = "log_ret_future";
inline constexpr const char* kSpikeFutureColumn = "spike_future";
inline constexpr const char* kClosePriceColumn = "close_price";
inline constexpr const char* kLogRetColumn = "log_ret";

bool is_reserved_column(const std::string& name);

struct Paths {
  std::filesystem::path dataset;
  std::filesystem::path tweets;
  std::filesystem::path whale_csv;
  std::filesystem::path features;
  std::filesystem::path output_dir = "out";
};

struct PrepareConfig {
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  features::EmaParams ema;
  features::VolatilityParams volatility;
  ingest::FillPolicy fill;
  std::map<std::string, features::TransformMethod> transforms;
};

struct EvaluateConfig {
  double spike_threshold = 1.0;
  std::vector<double> sweep_thresholds{0.9, 1.0, 1.1, 1.2, 1.3};
  std::map<std::string, double> ablation_baseline;  // overrides of the training mean
};

struct StrategySpec {
  backtest::StrategyKind kind = backtest::StrategyKind::kBuyAndHold;
  bool volatility_scaled = false;

  std::string name() const;
};

struct BacktestConfig {
  double initial_capital = 10000.0;
  double position_fraction = 0.05;
  double fee_rate = 0.001;
  double spike_threshold = 1.0;
  std::vector<StrategySpec> strategies;

  backtest::StrategyConfig strategy(const StrategySpec& s) const;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  Paths paths;
  PrepareConfig prepare;
  std::vector<std::string> features;  // empty: every non-reserved column
  std::optional<ingest::SplitBoundaries> splits;
  model::ModelConfig model;
  train::TrainConfig train;
  train::HyperGrid grid;
  int grid_jobs = 1;
  EvaluateConfig evaluate;
  BacktestConfig backtest;

  // Directory of the config file; relative paths are resolved against it.
  // Not part of the serialized form.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;

  static PipelineConfig defaults();
  // Throws ErrorCode::kConfig listing every violated field.
  void validate() const;
};

PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& c);
std::string serialize(const PipelineConfig& c);

// Whale daily flows from the tweet corpus, one row per day from the first to
// the last corpus date.
ingest::FeatureFrame whale_frame_from_corpus(const std::filesystem::path& corpus);

// Indicators, fill, transforms and next-day labels. The last row has no
// next day and is dropped.
ingest::FeatureFrame prepare_frame(const PrepareConfig& cfg, const ingest::FeatureFrame& raw,
                                   const std::optional<ingest::FeatureFrame>& whale,
                                   double spike_threshold = 1.0);

std::vector<std::string> feature_columns(const PipelineConfig& cfg, const ingest::FeatureFrame& frame);

struct Forecast {
  std::vector<Date> dates;
  std::vector<double> pred_vol;
};

// One prediction per row in [first_row, end_row) whose window of seq_len rows
// ending at that row lies inside `frame`.
Forecast forecast(const model::ModelConfig& mc, const model::ModelWeights& weights,
                  const ingest::FeatureFrame& frame, const std::vector<std::string>& columns,
                  std::size_t first_row, std::size_t end_row);

void write_forecast_csv(const std::filesystem::path& path, const Forecast& f,
                        const ingest::FeatureFrame& frame);
Forecast read_forecast_csv(const std::filesystem::path& path);

// Inputs of the windows ending at each forecast date.
std::vector<model::Matrix> windows_for(const ingest::FeatureFrame& frame,
                                       const std::vector<std::string>& columns, int seq_len,
                                       const std::vector<Date>& dates);

// Subcommands. Each returns the artifact paths it wrote.
struct CommandOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> predictions;
};

std::vector<std::filesystem::path> run_parse_tweets(const PipelineConfig& c);
std::vector<std::filesystem::path> run_prepare(const PipelineConfig& c);
std::vector<std::filesystem::path> run_train(const PipelineConfig& c);
std::vector<std::filesystem::path> run_grid(const PipelineConfig& c);
std::vector<std::filesystem::path> run_evaluate(const PipelineConfig& c, const CommandOptions& o = {});
std::vector<std::filesystem::path> run_ablate(const PipelineConfig& c, const CommandOptions& o = {});
std::vector<std::filesystem::path> run_backtest(const PipelineConfig& c, const CommandOptions& o = {});

std::vector<std::filesystem::path> run_command(const std::string& command, const PipelineConfig& c,
                                               const CommandOptions& o = {});

}  // namespace volsynth::pipeline
