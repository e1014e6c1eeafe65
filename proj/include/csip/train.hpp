#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "csip/dataset.hpp"
#include "csip/model.hpp"

namespace csip {

struct TrainConfig {
  double lr = 3e-4;
  double weight_decay = 1e-4;
  std::size_t batch = 256;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  std::uint64_t seed = 0;
  double dropout = 0.3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool clip = true;
  double clip_norm = 5.0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // zero-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  double initial_val_loss = 0.0;  // before the first update
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

// loss = sum_b sum_k w_k sum_c (pred - target)^2 / (B * C * sum_k w_k).
// pred, target: [B, N_L, C]; w: N_L weights.
template <typename T>
Tensor<T> weighted_mse(const Tensor<T>& pred, const Tensor<T>& target, std::span<const double> w);

// Patience-based stopping on a monitored loss. update() returns true once
// `patience` consecutive epochs failed to improve on the best value.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}
  bool update(double loss);
  bool improved_last() const { return improved_last_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }
  std::size_t since_improvement() const { return since_; }
  std::size_t epochs_seen() const { return seen_; }

 private:
  friend struct TrainStateAccess;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t since_ = 0;
  std::size_t seen_ = 0;
  bool improved_last_ = false;
};

// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
 public:
  AdamW(const ParamStore<double>& params, const TrainConfig& cfg);
  // Parameters without a gradient are treated as having a zero gradient.
  void step(ParamStore<double>& params);
  std::uint64_t steps() const { return t_; }

 private:
  friend struct TrainStateAccess;
  double lr_, wd_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Scales all gradients so that their global L2 norm is at most max_norm.
// Returns the norm before scaling.
double clip_grad_norm(ParamStore<double>& params, double max_norm);

struct TrainOptions {
  // When set, the full training state is written here after every epoch.
  std::string state_path;
  // Continue from `state_path` if it exists.
  bool resume = false;
  // Return after this many epochs of the current call (0 = no limit); used to
  // simulate an interrupted run.
  std::size_t stop_after = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model<double> model;  // parameters of the best validation epoch
  TrainHistory history;
};

// Mean weighted loss over the windows of `split`, evaluation mode.
double evaluate_loss(const Model<double>& model, const WindowSet& ws, Split split, std::size_t batch);

// Trains a copy of `init` whose dropout rate is set to cfg.dropout. Throws
// NumericError naming the batch index if a loss becomes non-finite.
TrainResult train(const Model<double>& init, const WindowSet& ws, const TrainConfig& cfg,
                  const TrainOptions& options = {});

// `epoch,train_loss,val_loss,seconds`
void write_history_csv(std::ostream& out, const TrainHistory& history);

}  // namespace csip
