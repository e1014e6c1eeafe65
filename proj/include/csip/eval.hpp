#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csip/dataset.hpp"
#include "csip/model.hpp"

namespace csip {

inline constexpr double kNmseFloorDb = -300.0;

enum class NmseAggregation {
  kPooled,     // ratio of error energy to target energy summed over everything
  kPerWindow,  // mean of per-window ratios
};

// Error-to-signal energy ratio (linear). Throws NumericError if the target is
// identically zero. `window_size` (values per window) is needed for
// kPerWindow.
double nmse_ratio(std::span<const double> pred, std::span<const double> target,
                  NmseAggregation agg = NmseAggregation::kPooled, std::size_t window_size = 0);
// 10 log10 of nmse_ratio, clamped at -300 dB.
double nmse_db(std::span<const double> pred, std::span<const double> target,
               NmseAggregation agg = NmseAggregation::kPooled, std::size_t window_size = 0);
double ratio_to_db(double ratio);

// H_{t+k} = last_obs + sum_{j<=k} dH_{t+j}. last_obs: [N, C];
// increments: [N, N_L, C]. Returns [N, N_L, C].
std::vector<double> reconstruct_channel(std::span<const double> last_obs,
                                        std::span<const double> increments, std::size_t n_l,
                                        std::size_t channels);

// Mean squared error at each horizon step over windows and channels.
std::vector<double> per_step_mse(std::span<const double> pred, std::span<const double> target,
                                 std::size_t n_l, std::size_t channels);

// Denormalized predictions and ground truth for one split.
struct Predictions {
  std::size_t windows = 0;
  std::size_t n_l = 0;
  std::size_t channels = 0;
  std::vector<double> pred_increments;  // [N, N_L, C]
  std::vector<double> true_increments;  // [N, N_L, C]
  std::vector<double> last_observed;    // [N, C]
  std::vector<double> pred_channels;    // [N, N_L, C]
  std::vector<double> true_channels;    // [N, N_L, C]
};

Predictions predict(const Model<double>& model, const WindowSet& ws, Split split, std::size_t batch = 256);
// The zero-increment predictor.
Predictions predict_persistence(const WindowSet& ws, Split split);

struct BenchConfig {
  std::size_t batch = 256;
  std::size_t reps = 5;
  std::size_t warmup = 2;
  std::uint64_t seed = 0;

  bool operator==(const BenchConfig&) const = default;
};

// Median over `reps` timed float32 forward passes of batch / seconds.
// Throws MeasurementError if the clock is coarser than 1% of a pass, and
// ContractError if reps < 5 or warmup < 2.
double throughput_bench(const Model<float>& model, const BenchConfig& cfg);

struct SeedMetrics {
  std::uint64_t seed = 0;
  double nmse_inc_ratio = 0.0;
  double nmse_chan_ratio = 0.0;
  double nmse_inc_db = 0.0;
  double nmse_chan_db = 0.0;
  std::vector<double> per_step_mse;
};

struct EvalReport {
  std::string variant;
  std::string scenario;
  std::size_t seeds = 0;
  // Mean over seeds of the linear ratio, then converted to dB.
  double nmse_inc_db = 0.0;
  double nmse_chan_db = 0.0;
  // Sample standard deviation of the per-seed dB values; empty for one seed.
  std::optional<double> nmse_inc_db_std;
  std::optional<double> nmse_chan_db_std;
  std::vector<double> per_step_mse;  // averaged over seeds
  std::size_t params = 0;
  double gflops = 0.0;
  double throughput_sps = 0.0;
  std::vector<SeedMetrics> per_seed;
};

SeedMetrics score(const Predictions& p, std::uint64_t seed,
                  NmseAggregation agg = NmseAggregation::kPooled);

// Aggregates per-seed metrics into a report.
EvalReport aggregate(const std::string& variant, const std::string& scenario,
                     std::vector<SeedMetrics> per_seed, std::size_t params, double gflops,
                     double throughput_sps);

struct EvalConfig {
  std::string scenario = "test";
  Split split = Split::kTest;
  std::size_t batch = 256;
  NmseAggregation aggregation = NmseAggregation::kPooled;
  // Throughput is measured on the first model when set.
  std::optional<BenchConfig> bench;
};

// One trained model per seed, in seed order.
EvalReport evaluate(const std::vector<Model<double>>& models, const std::vector<std::uint64_t>& seeds,
                    const WindowSet& ws, const EvalConfig& cfg);

// `variant,scenario,seed,nmse_inc_db,nmse_chan_db,params,gflops,throughput_sps`
void write_report_header(std::ostream& out);
void write_report_rows(std::ostream& out, const EvalReport& report);
// `variant,step,mse`
void write_per_step_header(std::ostream& out);
void write_per_step_rows(std::ostream& out, const EvalReport& report);

}  // namespace csip
