#include "volsynth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "volsynth/error.hpp"
#include "volsynth/features.hpp"

namespace volsynth::eval {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch, std::string(what) + ": lengths " + std::to_string(a) +
                                                " and " + std::to_string(b) + " differ");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  require_same(pred.size(), truth.size(), "rmse");
  if (pred.empty()) throw Error(ErrorCode::kLengthMismatch, "rmse of empty sequences");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

ConfusionCounts confusion_at_threshold(std::span<const double> pred_vol,
                                       std::span<const double> realized_logret,
                                       const std::vector<bool>& truth_flags, double threshold) {
  require_same(pred_vol.size(), realized_logret.size(), "confusion_at_threshold");
  require_same(pred_vol.size(), truth_flags.size(), "confusion_at_threshold");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred_vol.size(); ++i) {
    const bool predicted = pred_vol[i] >= threshold && realized_logret[i] > 0.0;
    const bool actual = truth_flags[i];
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

SpikeMetrics spike_metrics(const ConfusionCounts& c) {
  SpikeMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

std::vector<SweepRow> threshold_sweep(std::span<const double> pred_vol,
                                      std::span<const double> true_vol,
                                      std::span<const double> realized_logret,
                                      std::span<const double> thresholds) {
  require_same(pred_vol.size(), true_vol.size(), "threshold_sweep");
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    const auto truth = features::label_spikes(true_vol, realized_logret, features::SpikeRule{t});
    SweepRow row{t, confusion_at_threshold(pred_vol, realized_logret, truth, t), {}};
    row.metrics = spike_metrics(row.counts);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same(x.size(), y.size(), "pearson");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::kDomain, "correlation of a zero-variance series");
  return sxy / std::sqrt(sxx * syy);
}

CorrelationStats correlation_stats(std::span<const double> x, std::span<const double> y) {
  require_same(x.size(), y.size(), "correlation_stats");
  if (x.size() < 3) throw Error(ErrorCode::kLengthMismatch, "correlation needs at least 3 points");
  CorrelationStats s;
  s.pearson = pearson(x, y);
  s.r2 = s.pearson * s.pearson;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  s.spearman = pearson(rx, ry);
  return s;
}

AblationReport feature_ablation(const Predictor& predict, const std::vector<model::Matrix>& windows,
                                const std::vector<std::string>& feature_names,
                                std::span<const double> baseline) {
  require_same(feature_names.size(), baseline.size(), "feature_ablation baseline");
  std::vector<double> original;
  original.reserve(windows.size());
  for (const auto& w : windows) {
    require_same(static_cast<std::size_t>(w.cols()), feature_names.size(), "feature_ablation window");
    original.push_back(predict(w));
  }

  AblationReport report;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    double total = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      model::Matrix ablated = windows[k];
      ablated.col(static_cast<Eigen::Index>(j)).setConstant(baseline[j]);
      total += predict(ablated) - original[k];
    }
    const double score = windows.empty() ? 0.0 : total / static_cast<double>(windows.size());
    report.push_back(Attribution{feature_names[j], score});
  }
  std::stable_sort(report.begin(), report.end(), [](const Attribution& a, const Attribution& b) {
    return std::abs(a.score) > std::abs(b.score);
  });
  return report;
}

AblationReport feature_ablation(const model::ModelConfig& config, const model::ModelWeights& weights,
                                const std::vector<model::Matrix>& windows,
                                const std::vector<std::string>& feature_names,
                                std::span<const double> baseline) {
  Predictor p = [&](const model::Matrix& w) { return model::predict(config, weights, w).back(); };
  return feature_ablation(p, windows, feature_names, baseline);
}

}  // namespace volsynth::eval
