#pragma once

// Windowed, normalized training examples built from channel series.
//
// Feature layout of one frame (D = 2RT + 1):
//   [Re vec(H) ; Im vec(H) ; speed]
// where vec() is column-major over (rx, tx): entry (r, t) lands at r + R*t.
// Targets use the same Re/Im layout (C = 2RT) for the per-step increments
// H_{t+k} - H_{t+k-1}.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "csip/chansim.hpp"
#include "csip/tensor.hpp"

namespace csip {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2, kUnassigned = 255 };

const char* split_name(Split s);

// Row-major [rows, width] real matrix.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }
};

inline std::size_t vec_index(int r, int t, int rx) { return static_cast<std::size_t>(r) + static_cast<std::size_t>(rx) * t; }

// Frames [Ts, 2RT + 1].
FrameMatrix featurize(const EffectiveChannel& effective, std::span<const double> speed);
// Increments [Ts - 1, 2RT]. Throws ContractError when Ts < 2.
FrameMatrix make_increments(const EffectiveChannel& effective);

struct Normalizer {
  std::vector<double> input_mean, input_std;    // length D
  std::vector<double> target_mean, target_std;  // length C

  bool empty() const { return input_mean.empty(); }
  bool operator==(const Normalizer&) const = default;
};

inline constexpr double kStdFloor = 1e-8;

struct WindowSet {
  std::size_t n_p = 0;
  std::size_t n_l = 0;
  std::size_t features = 0;  // D
  std::size_t channels = 0;  // C
  std::vector<double> inputs;   // [num, n_p, D]
  std::vector<double> targets;  // [num, n_l, C]
  std::vector<Split> split;
  // Provenance, used by the leakage audit. Not persisted in CSIW1 files.
  std::vector<int> trajectory;
  std::vector<int> start;
  std::vector<int> trajectory_frames;
  Normalizer normalizer;
  bool normalized = false;

  std::size_t size() const { return split.size(); }
  std::size_t input_stride() const { return n_p * features; }
  std::size_t target_stride() const { return n_l * channels; }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * input_stride(), input_stride()};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * target_stride(), target_stride()};
  }
  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const;
};

// Window i covers input frames [i*stride, i*stride + n_p) and the n_l
// increments that follow the last input frame. Throws ConfigError if the
// series is too short.
WindowSet window(const FrameMatrix& frames, const FrameMatrix& increments, std::size_t n_p,
                 std::size_t n_l, std::size_t stride);

// Appends `part` to `into`, renumbering trajectories.
void append_windows(WindowSet& into, const WindowSet& part);

// Marks every window with `s`.
void tag_all(WindowSet& ws, Split s);

// Per trajectory: the first train_frac of frames feed train windows, the next
// `gap` frames are discarded, the rest feed val windows; windows straddling a
// boundary are dropped. Windows already tagged test are kept as test. Then
// fits z-score statistics on train windows and applies them to every split.
WindowSet split_and_normalize(const WindowSet& ws, double train_frac, std::size_t gap);

// Statistics over train-tagged windows only.
Normalizer fit_normalizer(const WindowSet& ws);
void apply_normalizer(WindowSet& ws, const Normalizer& norm);
// Inverse of the target normalization, for flat [.., C] arrays.
void denormalize_targets(std::span<double> values, const Normalizer& norm);
void denormalize_inputs(std::span<double> values, const Normalizer& norm);

struct LeakageAudit {
  bool gap_ok = true;
  bool disjoint_ok = true;
  bool normalizer_ok = true;
  std::size_t min_gap_seen = 0;  // smallest (first val frame - last train frame - 1)
  std::string detail;
  bool ok() const { return gap_ok && disjoint_ok && normalizer_ok; }
};

// Verifies that val windows start more than `gap` frames after the last
// train frame of their trajectory, that no train and val frame ranges
// overlap, and that the train windows are standardized by the stored
// normalizer (which only statistics of the train windows themselves achieve).
LeakageAudit audit_leakage(const WindowSet& ws, std::size_t gap);

// w_k = k^{-1/2}, k = 1..n_l.
std::vector<double> loss_weights(std::size_t n_l);

template <typename T>
Tensor<T> gather_inputs(const WindowSet& ws, std::span<const std::size_t> idx);
template <typename T>
Tensor<T> gather_targets(const WindowSet& ws, std::span<const std::size_t> idx);

// "CSIW1" file: ASCII header `CSIW1 num N_P N_L D C`, float32 normalizer block
// (input means, input stds, target means, target stds), then per window one
// split byte followed by its float32 inputs and targets.
void write_windows(std::ostream& out, const WindowSet& ws);
WindowSet read_windows(std::istream& in);
void save_windows(const std::string& path, const WindowSet& ws);
WindowSet load_windows(const std::string& path);

}  // namespace csip
