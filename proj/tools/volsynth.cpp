#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "volsynth/error.hpp"
#include "volsynth/pipeline.hpp"

namespace {

int report(volsynth::ErrorCode code, const std::string& message) {
  std::cerr << "error: " << volsynth::to_string(code) << ": " << message << '\n';
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace volsynth;

  CLI::App app{"Volatility spike forecasting with Synthesizer attention"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::string predictions;
  app.add_option("--config", config_path, "Pipeline config (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override the root seed");
  app.add_option("--out", out_dir, "Override the output directory");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"parse-tweets", "Parse the whale tweet corpus into daily flows"},
      {"prepare", "Merge, compute indicators, transform and label"},
      {"train", "Train one model and write a checkpoint"},
      {"grid", "Grid search over the hyperparameter grid"},
      {"evaluate", "Forecast the test split and compute metrics"},
      {"ablate", "Feature ablation attribution"},
      {"backtest", "Run the trading strategies on the forecasts"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "evaluate" || name == "ablate" || name == "backtest") {
      sub->add_option("--checkpoint", checkpoint, "Checkpoint to load");
    }
    if (name == "evaluate" || name == "backtest") {
      sub->add_option("--predictions", predictions, "Forecast CSV with date,pred_vol");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(ErrorCode::kConfig, e.what());
  }

  try {
    auto cfg = pipeline::load_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (!out_dir.empty()) cfg.paths.output_dir = std::filesystem::absolute(out_dir);

    pipeline::CommandOptions opts;
    if (!checkpoint.empty()) opts.checkpoint = checkpoint;
    if (!predictions.empty()) opts.predictions = predictions;

    const std::string command = app.get_subcommands().front()->get_name();
    for (const auto& path : pipeline::run_command(command, cfg, opts)) {
      std::cout << path.string() << '\n';
    }
  } catch (const Error& e) {
    return report(e.code(), e.what());
  } catch (const std::exception& e) {
    return report(ErrorCode::kIo, e.what());
  }
  return 0;
}
