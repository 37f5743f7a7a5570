#include "volsynth/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "volsynth/error.hpp"

namespace volsynth::train {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string describe(const GridPoint& p) {
  std::ostringstream s;
  s << "layers=" << p.layers << " heads=" << p.heads << " batch=" << p.batch_size
    << " dropout=" << p.dropout;
  return s.str();
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) problems.push_back("weight_decay must be >= 0");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (max_epochs < 1) problems.push_back("max_epochs must be >= 1");
  if (patience < 1 || patience >= max_epochs) problems.push_back("patience must be in [1, max_epochs)");
  if (problems.empty()) return;
  std::string msg = "invalid train config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw Error(ErrorCode::kConfig, msg);
}

bool EarlyStopping::observe(int epoch, double loss) {
  improved_ = best_epoch_ == 0 || loss < best_loss_;
  if (improved_) {
    best_loss_ = loss;
    best_epoch_ = epoch;
  }
  return epoch - best_epoch_ >= patience_;
}

void AdamW::step(model::ModelWeights& weights) {
  ++t_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  std::size_t i = 0;
  weights.visit([&](const std::string&, model::Var& p) {
    if (m_.size() <= i) {
      m_.push_back(model::Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(model::Matrix::Zero(p.rows(), p.cols()));
    }
    const model::Matrix g = p.grad();
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    model::Matrix& w = p.mutable_value();
    if (lr != 0.0) {
      const auto update = (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + config_.adam_eps);
      w.array() -= lr * (update + config_.weight_decay * w.array());
    }
    ++i;
  });
}

std::vector<model::Sample> make_windows(const ingest::FeatureFrame& frame,
                                        const std::vector<std::string>& feature_columns,
                                        int seq_len) {
  if (frame.target_column().empty()) throw Error(ErrorCode::kConfig, "frame has no target column");
  const auto n = static_cast<std::size_t>(seq_len);
  if (frame.rows() < n) return {};
  std::vector<std::vector<double>> cols;
  for (const auto& c : feature_columns) cols.push_back(frame.values(c));
  const std::vector<double> target = frame.values(frame.target_column());

  std::vector<model::Sample> out;
  out.reserve(frame.rows() - n + 1);
  for (std::size_t s = 0; s + n <= frame.rows(); ++s) {
    model::Sample sample{model::Matrix(seq_len, static_cast<Eigen::Index>(cols.size())),
                         model::Matrix(seq_len, 1)};
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) sample.window(r, c) = cols[c][s + r];
      sample.target(r, 0) = target[s + r];
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<double> final_predictions(const model::ModelConfig& config,
                                      const model::ModelWeights& weights,
                                      const std::vector<model::Sample>& windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(model::predict(config, weights, w.window).back());
  return out;
}

double final_position_rmse(const model::ModelConfig& config, const model::ModelWeights& weights,
                           const std::vector<model::Sample>& windows) {
  if (windows.empty()) throw Error(ErrorCode::kFrameTooShort, "no windows to evaluate");
  const auto pred = final_predictions(config, weights, windows);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - windows[i].target(windows[i].target.rows() - 1, 0);
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

TrainResult train(const model::ModelConfig& mc, const TrainConfig& tc,
                  const ingest::FeatureFrame& train_frame, const ingest::FeatureFrame& val_frame,
                  const std::vector<std::string>& feature_columns, const ValidationFn& validation) {
  mc.validate();
  tc.validate();
  if (static_cast<int>(feature_columns.size()) != mc.input_dim) {
    throw Error(ErrorCode::kConfig, "input_dim " + std::to_string(mc.input_dim) + " but " +
                                        std::to_string(feature_columns.size()) + " feature columns");
  }
  const auto min_rows = static_cast<std::size_t>(mc.seq_len) + 1;
  if (train_frame.rows() < min_rows) {
    throw Error(ErrorCode::kFrameTooShort, "training frame has " + std::to_string(train_frame.rows()) +
                                               " rows, needs at least " + std::to_string(min_rows));
  }
  std::vector<model::Sample> val_windows;
  if (!validation) {
    if (val_frame.rows() < min_rows) {
      throw Error(ErrorCode::kFrameTooShort, "validation frame has " +
                                                 std::to_string(val_frame.rows()) +
                                                 " rows, needs at least " + std::to_string(min_rows));
    }
    val_windows = make_windows(val_frame, feature_columns, mc.seq_len);
  }
  const auto train_windows = make_windows(train_frame, feature_columns, mc.seq_len);

  std::mt19937_64 order_rng(splitmix64(tc.seed ^ 0x5851F42D4C957F2DULL));
  std::mt19937_64 dropout_rng(splitmix64(tc.seed ^ 0x14057B7EF767814FULL));
  model::ModelWeights weights = model::ModelWeights::initialize(mc, tc.seed);
  AdamW optimizer(tc);
  EarlyStopping stopper(tc.patience);

  TrainResult result;
  result.weights = weights;
  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(tc.batch_size);
  model::ForwardOptions opts{true, &dropout_rng, nullptr};

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    if (tc.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<model::Sample> b;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        b.push_back(train_windows[order[k]]);
      }
      weights.zero_grad();
      const double loss = model::batch_loss(mc, weights, b, true, opts);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNonFinite, "training loss became non-finite at epoch " +
                                               std::to_string(epoch) + ", batch " +
                                               std::to_string(batches));
      }
      optimizer.step(weights);
      loss_sum += loss;
      ++batches;
    }
    const double val = validation ? validation(weights, epoch)
                                  : final_position_rmse(mc, weights, val_windows);
    if (!std::isfinite(val)) {
      throw Error(ErrorCode::kNonFinite, "validation loss became non-finite at epoch " +
                                             std::to_string(epoch));
    }
    result.history.train_loss.push_back(loss_sum / static_cast<double>(batches));
    result.history.val_loss.push_back(val);
    const bool stop = stopper.observe(epoch, val);
    if (stopper.improved()) result.weights = weights;
    result.history.stopped_epoch = epoch;
    if (stop) break;
  }
  result.history.best_epoch = stopper.best_epoch();
  result.history.best_val_loss = stopper.best_loss();
  return result;
}

void HyperGrid::validate() const {
  if (layers.empty() || heads.empty() || batch_sizes.empty() || dropouts.empty()) {
    throw Error(ErrorCode::kConfig, "hyperparameter grid has an empty axis");
  }
}

std::vector<GridPoint> enumerate(const HyperGrid& grid) {
  std::vector<GridPoint> out;
  for (int l : grid.layers)
    for (int h : grid.heads)
      for (int b : grid.batch_sizes)
        for (double d : grid.dropouts) out.push_back(GridPoint{l, h, b, d});
  return out;
}

bool contains(const HyperGrid& grid, const GridPoint& p) {
  auto has = [](const auto& axis, auto v) { return std::find(axis.begin(), axis.end(), v) != axis.end(); };
  return has(grid.layers, p.layers) && has(grid.heads, p.heads) &&
         has(grid.batch_sizes, p.batch_size) && has(grid.dropouts, p.dropout);
}

std::uint64_t derive_seed(std::uint64_t base, std::size_t grid_index) {
  return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(grid_index) + 1));
}

GridResult grid_search(const HyperGrid& grid, const model::ModelConfig& mc_base,
                       const TrainConfig& tc_base, const TrainFn& trainer, int jobs) {
  grid.validate();
  const auto points = enumerate(grid);
  std::vector<model::ModelConfig> mcs(points.size(), mc_base);
  std::vector<TrainConfig> tcs(points.size(), tc_base);
  for (std::size_t i = 0; i < points.size(); ++i) {
    mcs[i].layers = points[i].layers;
    mcs[i].heads = points[i].heads;
    mcs[i].dropout = points[i].dropout;
    tcs[i].batch_size = points[i].batch_size;
    tcs[i].seed = derive_seed(tc_base.seed, i);
  }

  std::vector<TrainResult> results(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        results[i] = trainer(mcs[i], tcs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, points.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i]) continue;
    const std::string where = "grid point " + std::to_string(i) + " (" + describe(points[i]) + "): ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kConfig, where + e.what());
    }
  }

  GridResult out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& h = results[i].history;
    out.leaderboard.push_back(
        LeaderboardEntry{i, points[i], tcs[i].seed, h.best_val_loss, h.best_epoch, h.stopped_epoch});
  }
  std::stable_sort(out.leaderboard.begin(), out.leaderboard.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                     return std::tie(a.best_val_loss, a.point.layers, a.point.heads,
                                     a.point.batch_size, a.point.dropout) <
                            std::tie(b.best_val_loss, b.point.layers, b.point.heads,
                                     b.point.batch_size, b.point.dropout);
                   });
  const std::size_t best = out.leaderboard.front().grid_index;
  out.best_model = mcs[best];
  out.best_train = tcs[best];
  out.best_result = std::move(results[best]);
  return out;
}

GridResult grid_search(const HyperGrid& grid, const model::ModelConfig& mc_base,
                       const TrainConfig& tc_base, const ingest::FeatureFrame& train_frame,
                       const ingest::FeatureFrame& val_frame,
                       const std::vector<std::string>& feature_columns, int jobs) {
  TrainFn trainer = [&](const model::ModelConfig& mc, const TrainConfig& tc) {
    return train(mc, tc, train_frame, val_frame, feature_columns);
  };
  return grid_search(grid, mc_base, tc_base, trainer, jobs);
}

}  // namespace volsynth::train
