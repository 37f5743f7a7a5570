#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "volsynth/ingest.hpp"
#include "volsynth/model.hpp"

namespace volsynth::train {

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 1e-6;
  int batch_size = 4;
  int max_epochs = 10000;
  int patience = 200;
  std::uint64_t seed = 42;
  bool shuffle = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean MSE over the epoch's batches
  std::vector<double> val_loss;    // RMSE of final-position predictions
  int best_epoch = 0;              // 1-based
  int stopped_epoch = 0;
  double best_val_loss = 0.0;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// Stops once `patience` epochs have passed without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool observe(int epoch, double loss);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool improved_ = false;
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(const TrainConfig& config) : config_(config) {}
  void step(model::ModelWeights& weights);
  long steps() const { return t_; }

 private:
  TrainConfig config_;
  long t_ = 0;
  std::vector<model::Matrix> m_, v_;
};

// Stride-1 windows of seq_len rows. Inputs are `feature_columns`, the target
// is the frame's target column at every position.
std::vector<model::Sample> make_windows(const ingest::FeatureFrame& frame,
                                        const std::vector<std::string>& feature_columns,
                                        int seq_len);

// Final-position predictions of every window, in window order.
std::vector<double> final_predictions(const model::ModelConfig& config,
                                      const model::ModelWeights& weights,
                                      const std::vector<model::Sample>& windows);
// RMSE of final-position predictions against final-position targets.
double final_position_rmse(const model::ModelConfig& config, const model::ModelWeights& weights,
                           const std::vector<model::Sample>& windows);

struct TrainResult {
  model::ModelWeights weights;   // restored from the best validation epoch
  TrainHistory history;
};

// Optional replacement for the validation metric; receives the current weights
// and the 1-based epoch.
using ValidationFn = std::function<double(const model::ModelWeights&, int epoch)>;

TrainResult train(const model::ModelConfig& mc, const TrainConfig& tc,
                  const ingest::FeatureFrame& train_frame, const ingest::FeatureFrame& val_frame,
                  const std::vector<std::string>& feature_columns,
                  const ValidationFn& validation = {});

struct HyperGrid {
  std::vector<int> layers{1, 2, 4, 8};
  std::vector<int> heads{2, 4, 8};
  std::vector<int> batch_sizes{4, 8, 16, 32, 64};
  std::vector<double> dropouts{0.1, 0.2};

  void validate() const;
};

struct GridPoint {
  int layers = 0;
  int heads = 0;
  int batch_size = 0;
  double dropout = 0.0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct LeaderboardEntry {
  std::size_t grid_index = 0;
  GridPoint point;
  std::uint64_t seed = 0;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  int stopped_epoch = 0;
};

struct GridResult {
  model::ModelConfig best_model;
  TrainConfig best_train;
  std::vector<LeaderboardEntry> leaderboard;  // ranked, best first
  TrainResult best_result;
};

std::vector<GridPoint> enumerate(const HyperGrid& grid);
bool contains(const HyperGrid& grid, const GridPoint& p);

// Seed of the job at `grid_index` derived from the base seed.
std::uint64_t derive_seed(std::uint64_t base, std::size_t grid_index);

using TrainFn = std::function<TrainResult(const model::ModelConfig&, const TrainConfig&)>;

// Trains one model per grid point with `trainer`. Ranked by best validation
// loss, ties broken by fewer layers, fewer heads, smaller batch, lower dropout.
// `jobs` > 1 runs grid points concurrently; results do not depend on it.
GridResult grid_search(const HyperGrid& grid, const model::ModelConfig& mc_base,
                       const TrainConfig& tc_base, const TrainFn& trainer, int jobs = 1);

GridResult grid_search(const HyperGrid& grid, const model::ModelConfig& mc_base,
                       const TrainConfig& tc_base, const ingest::FeatureFrame& train_frame,
                       const ingest::FeatureFrame& val_frame,
                       const std::vector<std::string>& feature_columns, int jobs = 1);

}  // namespace volsynth::train
