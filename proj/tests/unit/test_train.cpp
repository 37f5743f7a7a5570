#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "volsynth/train.hpp"

namespace {

using namespace volsynth;
using namespace volsynth::train;
using ingest::FeatureFrame;

FeatureFrame sine_frame(int days, int offset = 0) {
  std::vector<Date> dates;
  std::vector<double> x, y;
  for (int t = 0; t < days; ++t) {
    dates.push_back(Date::from_ymd(2020, 1, 1).plus_days(offset + t));
    x.push_back(std::sin(0.3 * (offset + t)));
    y.push_back(0.5 * std::sin(0.3 * (offset + t + 1)));
  }
  FeatureFrame f(dates, "y");
  f.set_column("x", x);
  f.set_column("y", y);
  return f;
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.variant = model::Variant::kFactorizedRandom;
  c.layers = 1;
  c.heads = 1;
  c.model_dim = 4;
  c.seq_len = 4;
  c.dropout = 0.1;
  c.factor_rank = 2;
  c.factor_k1 = 2;
  c.factor_k2 = 2;
  return c;
}

TrainConfig quick_train(int epochs) {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.batch_size = 4;
  t.max_epochs = epochs;
  t.patience = std::max(1, epochs - 1);
  t.seed = 3;
  return t;
}

TEST(EarlyStopping, ConstantLossStopsAfterPatience) {
  EarlyStopping s(5);
  int stopped = 0;
  for (int e = 1; e <= 100; ++e) {
    if (s.observe(e, 1.0)) {
      stopped = e;
      break;
    }
  }
  EXPECT_EQ(stopped, 6);
  EXPECT_EQ(s.best_epoch(), 1);
}

TEST(EarlyStopping, OnlyStrictImprovementResetsPatience) {
  EarlyStopping s(2);
  EXPECT_FALSE(s.observe(1, 3.0));
  EXPECT_FALSE(s.observe(2, 2.0));
  EXPECT_FALSE(s.observe(3, 2.0));
  EXPECT_TRUE(s.observe(4, 2.0));
  EXPECT_EQ(s.best_epoch(), 2);
  EXPECT_DOUBLE_EQ(s.best_loss(), 2.0);
}

TEST(AdamW, ZeroLearningRateLeavesWeightsUnchanged) {
  const auto mc = tiny_model();
  auto w = model::ModelWeights::initialize(mc, 1);
  const auto before = w;
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.weight_decay = 0.1;
  AdamW opt(tc);
  const auto windows = make_windows(sine_frame(20), {"x"}, mc.seq_len);
  for (int i = 0; i < 3; ++i) {
    w.zero_grad();
    model::batch_loss(mc, w, windows, true);
    opt.step(w);
  }
  w.visit([&](const std::string& name, const model::Var& v) {
    EXPECT_EQ(v.value(), const_cast<model::ModelWeights&>(before).find(name)->value()) << name;
  });
}

TEST(AdamW, FirstStepMovesEachCoordinateByAboutTheLearningRate) {
  const auto mc = tiny_model();
  auto w = model::ModelWeights::initialize(mc, 1);
  const auto before = w;
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.weight_decay = 0.0;
  AdamW opt(tc);
  w.zero_grad();
  model::batch_loss(mc, w, make_windows(sine_frame(20), {"x"}, mc.seq_len), true);
  const model::Matrix g = w.w_out.grad();
  opt.step(w);
  const model::Matrix delta = w.w_out.value() - before.w_out.value();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (std::abs(g.data()[i]) > 1e-6) {
      EXPECT_NEAR(delta.data()[i], -1e-3 * (g.data()[i] > 0 ? 1 : -1), 1e-6);
    }
  }
}

TEST(Windows, StrideOneWithTargetAtEveryPosition) {
  const auto f = sine_frame(10);
  const auto w = make_windows(f, {"x"}, 4);
  ASSERT_EQ(w.size(), 7u);
  const auto x = f.values("x"), y = f.values("y");
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (int t = 0; t < 4; ++t) {
      EXPECT_EQ(w[k].window(t, 0), x[k + t]);
      EXPECT_EQ(w[k].target(t, 0), y[k + t]);
    }
  }
}

TEST(Train, FrameShorterThanWindowIsRejected) {
  const auto mc = tiny_model();
  EXPECT_ERROR_CODE(train::train(mc, quick_train(2), sine_frame(4), sine_frame(30), {"x"}),
                    ErrorCode::kFrameTooShort);
  EXPECT_ERROR_CODE(train::train(mc, quick_train(2), sine_frame(30), sine_frame(3), {"x"}),
                    ErrorCode::kFrameTooShort);
}

TEST(Train, StopsAfterPatienceOnFlatValidation) {
  auto tc = quick_train(100);
  tc.patience = 4;
  const auto r = train::train(tiny_model(), tc, sine_frame(30), FeatureFrame{}, {"x"},
                              [](const model::ModelWeights&, int) { return 0.5; });
  EXPECT_EQ(r.history.stopped_epoch, 5);
  EXPECT_EQ(r.history.best_epoch, 1);
  EXPECT_EQ(r.history.val_loss.size(), 5u);
}

TEST(Train, RestoresWeightsOfBestEpoch) {
  auto tc = quick_train(8);
  model::ModelWeights snapshot;
  const auto r = train::train(tiny_model(), tc, sine_frame(30), FeatureFrame{}, {"x"},
                              [&](const model::ModelWeights& w, int epoch) {
                                if (epoch == 3) snapshot = w;
                                return epoch == 3 ? 0.1 : 1.0;
                              });
  EXPECT_EQ(r.history.best_epoch, 3);
  EXPECT_EQ(r.weights.w_out.value(), snapshot.w_out.value());
}

TEST(Train, IsDeterministicForASeed) {
  const auto a = train::train(tiny_model(), quick_train(5), sine_frame(40), sine_frame(20, 40), {"x"});
  const auto b = train::train(tiny_model(), quick_train(5), sine_frame(40), sine_frame(20, 40), {"x"});
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.weights.w_out.value(), b.weights.w_out.value());
  auto other = quick_train(5);
  other.seed = 4;
  const auto c = train::train(tiny_model(), other, sine_frame(40), sine_frame(20, 40), {"x"});
  EXPECT_NE(a.history.train_loss, c.history.train_loss);
}

TEST(Train, ReducesTrainingLoss) {
  auto tc = quick_train(30);
  const auto r = train::train(tiny_model(), tc, sine_frame(60), sine_frame(20, 60), {"x"});
  EXPECT_LT(r.history.train_loss.back(), r.history.train_loss.front());
}

TEST(Train, InputDimMustMatchColumns) {
  auto mc = tiny_model();
  mc.input_dim = 2;
  EXPECT_ERROR_CODE(train::train(mc, quick_train(3), sine_frame(30), sine_frame(30), {"x"}),
                    ErrorCode::kConfig);
}

TEST(Grid, DefaultGridContainsPublishedWinner) {
  HyperGrid g;
  EXPECT_TRUE(contains(g, GridPoint{4, 4, 4, 0.2}));
  EXPECT_EQ(enumerate(g).size(), 4u * 3u * 5u * 2u);
}

TEST(Grid, SinglePointGridMatchesDirectTraining) {
  HyperGrid g;
  g.layers = {1};
  g.heads = {1};
  g.batch_sizes = {4};
  g.dropouts = {0.1};
  const auto train_f = sine_frame(40), val_f = sine_frame(20, 40);
  const auto gr = grid_search(g, tiny_model(), quick_train(4), train_f, val_f, {"x"});
  ASSERT_EQ(gr.leaderboard.size(), 1u);
  auto tc = quick_train(4);
  tc.seed = derive_seed(tc.seed, 0);
  const auto direct = train::train(tiny_model(), tc, train_f, val_f, {"x"});
  EXPECT_EQ(gr.best_result.history, direct.history);
  EXPECT_EQ(gr.best_train.seed, tc.seed);
}

TrainResult rigged(double loss) {
  TrainResult r;
  r.history.best_val_loss = loss;
  r.history.best_epoch = 1;
  r.history.stopped_epoch = 1;
  return r;
}

TEST(Grid, SelectsLowestValidationLoss) {
  HyperGrid g;
  g.layers = {1, 2};
  g.heads = {1, 2};
  g.batch_sizes = {4};
  g.dropouts = {0.1, 0.2};
  auto trainer = [](const model::ModelConfig& mc, const TrainConfig& tc) {
    return rigged(mc.layers == 2 && mc.heads == 1 && mc.dropout == 0.2 && tc.batch_size == 4 ? 0.1 : 1.0);
  };
  const auto r = grid_search(g, tiny_model(), quick_train(1), trainer);
  EXPECT_EQ(r.leaderboard.front().point, (GridPoint{2, 1, 4, 0.2}));
  EXPECT_EQ(r.best_model.layers, 2);
  EXPECT_EQ(r.best_model.dropout, 0.2);
  for (std::size_t i = 1; i < r.leaderboard.size(); ++i) {
    EXPECT_LE(r.leaderboard[i - 1].best_val_loss, r.leaderboard[i].best_val_loss);
  }
}

TEST(Grid, TiesPreferSmallerModels) {
  HyperGrid g;
  g.layers = {2, 1};
  g.heads = {2, 1};
  g.batch_sizes = {8, 4};
  g.dropouts = {0.2, 0.1};
  const auto r = grid_search(g, tiny_model(), quick_train(1),
                             [](const model::ModelConfig&, const TrainConfig&) { return rigged(0.5); });
  EXPECT_EQ(r.leaderboard.front().point, (GridPoint{1, 1, 4, 0.1}));
  EXPECT_EQ(r.leaderboard.back().point, (GridPoint{2, 2, 8, 0.2}));
}

TEST(Grid, ResultsDoNotDependOnJobs) {
  HyperGrid g;
  g.layers = {1};
  g.heads = {1, 2};
  g.batch_sizes = {4, 8};
  g.dropouts = {0.1};
  auto mc = tiny_model();
  mc.model_dim = 4;
  const auto train_f = sine_frame(40), val_f = sine_frame(20, 40);
  const auto a = grid_search(g, mc, quick_train(3), train_f, val_f, {"x"}, 1);
  const auto b = grid_search(g, mc, quick_train(3), train_f, val_f, {"x"}, 3);
  ASSERT_EQ(a.leaderboard.size(), b.leaderboard.size());
  for (std::size_t i = 0; i < a.leaderboard.size(); ++i) {
    EXPECT_EQ(a.leaderboard[i].grid_index, b.leaderboard[i].grid_index);
    EXPECT_EQ(a.leaderboard[i].best_val_loss, b.leaderboard[i].best_val_loss);
    EXPECT_EQ(a.leaderboard[i].seed, b.leaderboard[i].seed);
  }
  EXPECT_EQ(a.best_result.history, b.best_result.history);
}

TEST(Grid, DerivedSeedsDiffer) {
  std::map<std::uint64_t, int> seen;
  for (std::size_t i = 0; i < 120; ++i) ++seen[derive_seed(42, i)];
  EXPECT_EQ(seen.size(), 120u);
  EXPECT_EQ(derive_seed(42, 5), derive_seed(42, 5));
}

TEST(Grid, FailuresNameTheGridPoint) {
  HyperGrid g;
  g.layers = {1};
  g.heads = {1};
  g.batch_sizes = {4};
  g.dropouts = {0.1};
  try {
    grid_search(g, tiny_model(), quick_train(1), [](const model::ModelConfig&, const TrainConfig&) -> TrainResult {
      throw Error(ErrorCode::kNonFinite, "boom");
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
    EXPECT_NE(std::string(e.what()).find("grid point 0"), std::string::npos);
  }
}

TEST(TrainConfig, RejectsNonPositiveLearningRate) {
  TrainConfig tc;
  tc.learning_rate = 0.0;
  EXPECT_ERROR_CODE(tc.validate(), ErrorCode::kConfig);
}

}  // namespace
