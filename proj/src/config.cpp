#include <fstream>
#include <set>
#include <sstream>

#include "volsynth/error.hpp"
#include "volsynth/json_io.hpp"
#include "volsynth/pipeline.hpp"

namespace volsynth::pipeline {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, recording type errors and unknown keys
// instead of stopping at the first one.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string prefix, std::vector<std::string>& problems)
      : j_(j), prefix_(std::move(prefix)), problems_(problems) {
    if (!j_.is_object()) problems_.push_back(where("") + "must be an object");
  }

  ~ObjectReader() {
    if (!j_.is_object()) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) problems_.push_back(where(key) + "unknown key");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back(where(key) + "has the wrong type");
    }
  }

  void read_path(const std::string& key, std::filesystem::path& out) {
    std::string s = out.string();
    read(key, s);
    out = s;
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string where(const std::string& key) const {
    std::string path = prefix_;
    if (!key.empty()) path += path.empty() ? key : "." + key;
    return path.empty() ? "config: " : path + ": ";
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

std::optional<Date> parse_date_field(const json& j, const std::string& where,
                                     std::vector<std::string>& problems) {
  if (!j.is_string()) {
    problems.push_back(where + ": must be a YYYY-MM-DD string");
    return std::nullopt;
  }
  auto d = Date::parse(j.get<std::string>());
  if (!d) problems.push_back(where + ": '" + j.get<std::string>() + "' is not a YYYY-MM-DD date");
  return d;
}

void collect(std::vector<std::string>& problems, const std::string& prefix, auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    problems.push_back(prefix + ": " + e.what());
  }
}

[[noreturn]] void fail(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration (" + std::to_string(problems.size()) + " problem" +
                    (problems.size() == 1 ? "" : "s") + "):";
  for (const auto& p : problems) msg += "\n  " + p;
  throw Error(ErrorCode::kConfig, msg);
}

}  // namespace

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::string StrategySpec::name() const {
  return std::string(backtest::to_string(kind)) + (volatility_scaled ? "_scaled" : "");
}

backtest::StrategyConfig BacktestConfig::strategy(const StrategySpec& s) const {
  backtest::StrategyConfig c;
  c.kind = s.kind;
  c.volatility_scaled = s.volatility_scaled;
  c.initial_capital = initial_capital;
  c.position_fraction = position_fraction;
  c.fee_rate = fee_rate;
  c.spike_threshold = spike_threshold;
  return c;
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.prepare.fill.backfill_columns = {"log_returns", "vol"};
  c.prepare.transforms = {{"vol", features::TransformMethod::kPow14}};
  c.splits = ingest::SplitBoundaries{Date::from_ymd(2020, 1, 2), Date::from_ymd(2020, 11, 11),
                                     Date::from_ymd(2021, 9, 21)};
  using backtest::StrategyKind;
  c.backtest.strategies = {{StrategyKind::kBuyAndHold, false},     {StrategyKind::kBuyLowSellHigh, false},
                           {StrategyKind::kMomentum, false},       {StrategyKind::kMeanReversion, false},
                           {StrategyKind::kBuyLowSellHigh, true},  {StrategyKind::kMomentum, true},
                           {StrategyKind::kMeanReversion, true}};
  return c;
}

void PipelineConfig::validate() const {
  std::vector<std::string> problems;
  collect(problems, "model", [&] {
    // input_dim follows the feature list at run time.
    auto m = model;
    m.input_dim = std::max(1, m.input_dim);
    m.validate();
  });
  collect(problems, "train", [&] { train.validate(); });
  collect(problems, "grid", [&] { grid.validate(); });
  if (grid_jobs < 1) problems.push_back("grid.jobs: must be >= 1");
  collect(problems, "backtest", [&] { backtest.strategy(StrategySpec{}).validate(); });
  if (!(evaluate.spike_threshold > 0.0)) problems.push_back("evaluate.spike_threshold: must be > 0");
  if (!(backtest.spike_threshold > 0.0)) problems.push_back("backtest.spike_threshold: must be > 0");
  if (prepare.ema.n < 1) problems.push_back("prepare.ema_n: must be >= 1");
  if (prepare.ema.S < 0.0) problems.push_back("prepare.ema_s: must be >= 0");
  if (prepare.volatility.window < 2) problems.push_back("prepare.volatility_window: must be >= 2");
  if (!(prepare.volatility.annualization > 0.0)) {
    problems.push_back("prepare.annualization: must be > 0");
  }
  for (const auto& name : prepare.fill.backfill_columns) {
    if (prepare.fill.zero_columns.count(name)) {
      problems.push_back("prepare.fill: column '" + name + "' is in both backfill and zero");
    }
  }
  for (const auto& [name, _] : prepare.transforms) {
    if (is_reserved_column(name)) {
      problems.push_back("prepare.transforms: column '" + name + "' is reserved");
    }
  }
  for (const auto& f : features) {
    if (is_reserved_column(f)) problems.push_back("features: column '" + f + "' is reserved");
  }
  if (splits && !(splits->train_end < splits->val_end && splits->val_end < splits->test_end)) {
    problems.push_back("splits: need train_end < val_end < test_end");
  }
  if (paths.output_dir.empty()) problems.push_back("paths.output_dir: must not be empty");
  if (!problems.empty()) fail(problems);
}

PipelineConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c = PipelineConfig::defaults();
  std::vector<std::string> problems;
  {
    ObjectReader root(j, "", problems);
    root.read("seed", c.seed);

    if (const json* p = root.child("paths")) {
      ObjectReader r(*p, "paths", problems);
      r.read_path("dataset", c.paths.dataset);
      r.read_path("tweets", c.paths.tweets);
      r.read_path("whale_csv", c.paths.whale_csv);
      r.read_path("features", c.paths.features);
      r.read_path("output_dir", c.paths.output_dir);
    }

    if (const json* p = root.child("prepare")) {
      ObjectReader r(*p, "prepare", problems);
      r.read("open", c.prepare.open);
      r.read("high", c.prepare.high);
      r.read("low", c.prepare.low);
      r.read("close", c.prepare.close);
      r.read("ema_n", c.prepare.ema.n);
      r.read("ema_s", c.prepare.ema.S);
      r.read("volatility_window", c.prepare.volatility.window);
      r.read("annualization", c.prepare.volatility.annualization);
      if (const json* f = r.child("fill")) {
        ObjectReader fr(*f, "prepare.fill", problems);
        fr.read("backfill", c.prepare.fill.backfill_columns);
        fr.read("zero", c.prepare.fill.zero_columns);
      }
      if (const json* t = r.child("transforms")) {
        if (!t->is_object()) {
          problems.push_back("prepare.transforms: must be an object of column: code");
        } else {
          c.prepare.transforms.clear();
          for (const auto& [name, code] : t->items()) {
            auto m = code.is_number_integer() ? features::transform_from_code(code.get<int>())
                                              : std::nullopt;
            if (!m) {
              problems.push_back("prepare.transforms." + name + ": code must be an integer 0-5");
            } else {
              c.prepare.transforms[name] = *m;
            }
          }
        }
      }
    }

    root.read("features", c.features);

    if (const json* s = root.child("splits")) {
      if (s->is_null()) {
        c.splits.reset();
      } else {
        ObjectReader r(*s, "splits", problems);
        auto a = r.child("train_end");
        auto b = r.child("val_end");
        auto e = r.child("test_end");
        if (!a || !b || !e) {
          problems.push_back("splits: needs train_end, val_end and test_end");
        } else {
          auto da = parse_date_field(*a, "splits.train_end", problems);
          auto db = parse_date_field(*b, "splits.val_end", problems);
          auto de = parse_date_field(*e, "splits.test_end", problems);
          if (da && db && de) c.splits = ingest::SplitBoundaries{*da, *db, *de};
        }
      }
    }

    if (const json* m = root.child("model")) {
      static const std::set<std::string> known{"variant",   "layers",  "heads",     "model_dim",
                                               "seq_len",   "dropout", "input_dim", "ff_dim",
                                               "factor_k1", "factor_k2", "factor_rank"};
      if (!m->is_object()) {
        problems.push_back("model: must be an object");
      } else {
        for (const auto& [key, _] : m->items()) {
          if (!known.count(key)) problems.push_back("model." + key + ": unknown key");
        }
        try {
          c.model = model_config_from_json(*m, c.model);
        } catch (const Error& e) {
          problems.push_back(std::string("model: ") + e.what());
        } catch (const json::exception&) {
          problems.push_back("model: a field has the wrong type");
        }
      }
    }

    if (const json* t = root.child("train")) {
      ObjectReader r(*t, "train", problems);
      r.read("learning_rate", c.train.learning_rate);
      r.read("weight_decay", c.train.weight_decay);
      r.read("batch_size", c.train.batch_size);
      r.read("max_epochs", c.train.max_epochs);
      r.read("patience", c.train.patience);
      r.read("shuffle", c.train.shuffle);
      r.read("beta1", c.train.beta1);
      r.read("beta2", c.train.beta2);
      r.read("adam_eps", c.train.adam_eps);
    }

    if (const json* g = root.child("grid")) {
      ObjectReader r(*g, "grid", problems);
      r.read("layers", c.grid.layers);
      r.read("heads", c.grid.heads);
      r.read("batch_sizes", c.grid.batch_sizes);
      r.read("dropouts", c.grid.dropouts);
      r.read("jobs", c.grid_jobs);
    }

    if (const json* e = root.child("evaluate")) {
      ObjectReader r(*e, "evaluate", problems);
      r.read("spike_threshold", c.evaluate.spike_threshold);
      r.read("sweep_thresholds", c.evaluate.sweep_thresholds);
      r.read("ablation_baseline", c.evaluate.ablation_baseline);
    }

    if (const json* b = root.child("backtest")) {
      ObjectReader r(*b, "backtest", problems);
      r.read("initial_capital", c.backtest.initial_capital);
      r.read("position_fraction", c.backtest.position_fraction);
      r.read("fee_rate", c.backtest.fee_rate);
      r.read("spike_threshold", c.backtest.spike_threshold);
      if (const json* s = r.child("strategies")) {
        if (!s->is_array()) {
          problems.push_back("backtest.strategies: must be an array");
        } else {
          c.backtest.strategies.clear();
          for (std::size_t i = 0; i < s->size(); ++i) {
            const std::string where = "backtest.strategies[" + std::to_string(i) + "]";
            ObjectReader sr((*s)[i], where, problems);
            std::string kind;
            StrategySpec spec;
            sr.read("kind", kind);
            sr.read("volatility_scaled", spec.volatility_scaled);
            auto k = backtest::strategy_from_string(kind);
            if (!k) {
              problems.push_back(where + ".kind: unknown strategy '" + kind + "'");
            } else {
              spec.kind = *k;
              c.backtest.strategies.push_back(spec);
            }
          }
        }
      }
    }
  }
  if (!problems.empty()) fail(problems);
  c.validate();
  c.base_dir = base_dir;
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  json transforms = json::object();
  for (const auto& [name, m] : c.prepare.transforms) transforms[name] = static_cast<int>(m);
  json strategies = json::array();
  for (const auto& s : c.backtest.strategies) {
    strategies.push_back(
        json{{"kind", std::string(backtest::to_string(s.kind))}, {"volatility_scaled", s.volatility_scaled}});
  }
  json splits = nullptr;
  if (c.splits) {
    splits = json{{"train_end", c.splits->train_end.iso()},
                  {"val_end", c.splits->val_end.iso()},
                  {"test_end", c.splits->test_end.iso()}};
  }
  return json{
      {"seed", c.seed},
      {"paths",
       {{"dataset", c.paths.dataset.string()},
        {"tweets", c.paths.tweets.string()},
        {"whale_csv", c.paths.whale_csv.string()},
        {"features", c.paths.features.string()},
        {"output_dir", c.paths.output_dir.string()}}},
      {"prepare",
       {{"open", c.prepare.open},
        {"high", c.prepare.high},
        {"low", c.prepare.low},
        {"close", c.prepare.close},
        {"ema_n", c.prepare.ema.n},
        {"ema_s", c.prepare.ema.S},
        {"volatility_window", c.prepare.volatility.window},
        {"annualization", c.prepare.volatility.annualization},
        {"fill", {{"backfill", c.prepare.fill.backfill_columns}, {"zero", c.prepare.fill.zero_columns}}},
        {"transforms", transforms}}},
      {"features", c.features},
      {"splits", splits},
      {"model", model_config_to_json(c.model)},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"shuffle", c.train.shuffle},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"adam_eps", c.train.adam_eps}}},
      {"grid",
       {{"layers", c.grid.layers},
        {"heads", c.grid.heads},
        {"batch_sizes", c.grid.batch_sizes},
        {"dropouts", c.grid.dropouts},
        {"jobs", c.grid_jobs}}},
      {"evaluate",
       {{"spike_threshold", c.evaluate.spike_threshold},
        {"sweep_thresholds", c.evaluate.sweep_thresholds},
        {"ablation_baseline", c.evaluate.ablation_baseline}}},
      {"backtest",
       {{"initial_capital", c.backtest.initial_capital},
        {"position_fraction", c.backtest.position_fraction},
        {"fee_rate", c.backtest.fee_rate},
        {"spike_threshold", c.backtest.spike_threshold},
        {"strategies", strategies}}}};
}

std::string serialize(const PipelineConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace volsynth::pipeline
