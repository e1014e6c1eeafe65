#pragma once

// Experiment lifecycle: configuration profiles, trajectory generation,
// dataset assembly, multi-seed training, ablation sweeps and benchmarking.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csip/chansim.hpp"
#include "csip/dataset.hpp"
#include "csip/eval.hpp"
#include "csip/model.hpp"
#include "csip/train.hpp"

namespace csip {

// Optional overrides applied to every component of a scenario preset.
struct ScenarioOverrides {
  std::optional<double> rician_k_db;
  std::optional<int> num_paths;
  std::optional<int> num_sinusoids_per_path;
  std::optional<double> trajectory_m;
  std::optional<double> speed_min_kmh;
  std::optional<double> speed_max_kmh;

  bool operator==(const ScenarioOverrides&) const = default;
};

struct DataConfig {
  std::size_t n_p = 32;
  std::size_t n_l = 4;
  std::size_t stride = 8;
  double train_frac = 0.8;
  std::size_t gap = 200;
  std::size_t train_trajectories = 4;
  std::size_t test_trajectories = 2;

  bool operator==(const DataConfig&) const = default;
};

// Test scenario name that re-draws the training preset with unseen
// trajectory seeds.
inline constexpr const char* kHoldoutScenario = "holdout";

struct ExperimentConfig {
  std::string profile = "desk";
  std::string train_scenario = "train-mix";
  std::vector<std::string> test_scenarios;
  ScenarioOverrides overrides;
  DataConfig data;
  std::size_t d = 32;
  std::size_t layers = 1;
  std::size_t reduction = 4;
  TrainConfig train;
  std::vector<std::string> variants = {"proposed"};
  std::size_t seeds = 3;
  BenchConfig bench;
  std::string out_dir = "csip-out";

  ModelDims dims() const;
  // Throws ConfigError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// "desk": small CPU-friendly setup. "paper": full-size hyperparameters
// (long-running on CPU).
ExperimentConfig profile_config(const std::string& profile);

// JSON configuration. Keys absent from `text` keep their value from `base`.
// The result is validated; throws ConfigError.
ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base);
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base);
std::string render_config(const ExperimentConfig& cfg);

// Preset components with overrides and the window length requirement applied.
std::vector<ScenarioConfig> scenario_components(const ExperimentConfig& cfg, const std::string& scenario);
// Trajectory `index` of a scenario. The holdout scenario uses the training
// preset with indices offset so they never coincide with training draws.
ChannelSeries make_trajectory(const ExperimentConfig& cfg, const std::string& scenario, std::size_t index);
std::size_t trajectory_count(const ExperimentConfig& cfg, const std::string& scenario);

std::string data_dir(const ExperimentConfig& cfg);
std::string trajectory_path(const ExperimentConfig& cfg, const std::string& scenario, std::size_t index);
std::string run_dir(const ExperimentConfig& cfg, const std::string& variant);

// Where trajectories come from when assembling datasets.
enum class TrajectorySource {
  kMemory,  // generate on the fly
  kFiles,   // read CSIT1 files written by cmd_generate; missing files are an error
};

// Windowed, split and normalized training data.
WindowSet build_training_set(const ExperimentConfig& cfg, TrajectorySource source);
// Test windows of one scenario, normalized with `norm`.
WindowSet build_test_set(const ExperimentConfig& cfg, const std::string& scenario, const Normalizer& norm,
                         TrajectorySource source);

using Logger = std::function<void(const std::string&)>;

struct TrainedVariant {
  VariantSpec spec;
  std::vector<std::uint64_t> seeds;
  std::vector<Model<double>> models;
  std::vector<TrainHistory> histories;
};

// Trains `variant` once per seed. With `persist`, checkpoints, histories and
// resumable state are written under run_dir().
TrainedVariant train_variant(const ExperimentConfig& cfg, const WindowSet& train_set,
                             const std::string& variant, bool persist, const Logger& log = {});

// Reports per test scenario plus a pooled "all" report over every test window.
std::vector<EvalReport> evaluate_variant(const ExperimentConfig& cfg, const TrainedVariant& trained,
                                         const std::vector<std::pair<std::string, WindowSet>>& tests);

// Commands. Each returns the files it wrote.
std::vector<std::string> cmd_generate(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::string> cmd_train(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::string> cmd_ablate(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::string> cmd_bench(const ExperimentConfig& cfg, const Logger& log = {});
// Collects every run report into report.csv and summary.csv; returns the
// summary table as text.
std::string cmd_report(const ExperimentConfig& cfg, const Logger& log = {});

}  // namespace csip
