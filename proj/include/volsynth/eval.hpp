#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "volsynth/model.hpp"

namespace volsynth::eval {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct SpikeMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct CorrelationStats {
  double r2 = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
};

double rmse(std::span<const double> pred, std::span<const double> truth);

// Predicted spike: pred_vol >= T and the realized log-return of the same day > 0.
ConfusionCounts confusion_at_threshold(std::span<const double> pred_vol,
                                       std::span<const double> realized_logret,
                                       const std::vector<bool>& truth_flags, double threshold);

SpikeMetrics spike_metrics(const ConfusionCounts& c);

struct SweepRow {
  double threshold = 0.0;
  ConfusionCounts counts;
  SpikeMetrics metrics;
};

// One row per threshold. Ground truth is relabelled at each threshold with the
// same rule applied to the realized volatility.
std::vector<SweepRow> threshold_sweep(std::span<const double> pred_vol,
                                      std::span<const double> true_vol,
                                      std::span<const double> realized_logret,
                                      std::span<const double> thresholds);

// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
CorrelationStats correlation_stats(std::span<const double> x, std::span<const double> y);

struct Attribution {
  std::string feature;
  double score = 0.0;
};

// Sorted by |score| descending; ties keep feature order.
using AblationReport = std::vector<Attribution>;

// Maps a window (seq_len x input_dim) to its next-day prediction.
using Predictor = std::function<double(const model::Matrix& window)>;

AblationReport feature_ablation(const Predictor& predict, const std::vector<model::Matrix>& windows,
                                const std::vector<std::string>& feature_names,
                                std::span<const double> baseline);

AblationReport feature_ablation(const model::ModelConfig& config, const model::ModelWeights& weights,
                                const std::vector<model::Matrix>& windows,
                                const std::vector<std::string>& feature_names,
                                std::span<const double> baseline);

}  // namespace volsynth::eval
