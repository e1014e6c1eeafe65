#include "csip/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csip/binary_io.hpp"
#include "csip/error.hpp"

namespace csip {

namespace {

void realvec(const EffectiveChannel& e, int s, double* out) {
  const std::size_t half = static_cast<std::size_t>(e.rx) * e.tx;
  for (int t = 0; t < e.tx; ++t)
    for (int r = 0; r < e.rx; ++r) {
      const auto h = e.at(r, t, s);
      out[vec_index(r, t, e.rx)] = h.real();
      out[half + vec_index(r, t, e.rx)] = h.imag();
    }
}

struct Moments {
  std::vector<double> mean, std;
};

// Column statistics of `rows` rows of width `width` gathered by `row_at`.
template <typename RowAt>
Moments column_moments(std::size_t rows, std::size_t width, RowAt row_at) {
  Moments m;
  m.mean.assign(width, 0.0);
  m.std.assign(width, 0.0);
  if (rows == 0) return m;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* r = row_at(i);
    for (std::size_t j = 0; j < width; ++j) m.mean[j] += r[j];
  }
  for (auto& v : m.mean) v /= static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* r = row_at(i);
    for (std::size_t j = 0; j < width; ++j) {
      const double d = r[j] - m.mean[j];
      m.std[j] += d * d;
    }
  }
  for (auto& v : m.std) v = std::max(std::sqrt(v / static_cast<double>(rows)), kStdFloor);
  return m;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "?";
}

std::vector<std::size_t> WindowSet::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::size_t WindowSet::count(Split s) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

FrameMatrix featurize(const EffectiveChannel& effective, std::span<const double> speed) {
  if (speed.size() != static_cast<std::size_t>(effective.snapshots)) {
    throw DimensionError("featurize: speed track has " + std::to_string(speed.size()) +
                         " entries for " + std::to_string(effective.snapshots) + " snapshots");
  }
  FrameMatrix f;
  f.rows = effective.snapshots;
  f.width = 2 * static_cast<std::size_t>(effective.rx) * effective.tx + 1;
  f.values.resize(f.rows * f.width);
  for (std::size_t s = 0; s < f.rows; ++s) {
    double* row = f.values.data() + s * f.width;
    realvec(effective, static_cast<int>(s), row);
    row[f.width - 1] = speed[s];
  }
  return f;
}

FrameMatrix make_increments(const EffectiveChannel& effective) {
  if (effective.snapshots < 2) throw ContractError("make_increments: need at least 2 snapshots");
  FrameMatrix inc;
  inc.rows = effective.snapshots - 1;
  inc.width = 2 * static_cast<std::size_t>(effective.rx) * effective.tx;
  inc.values.resize(inc.rows * inc.width);
  std::vector<double> prev(inc.width), next(inc.width);
  realvec(effective, 0, prev.data());
  for (std::size_t s = 0; s < inc.rows; ++s) {
    realvec(effective, static_cast<int>(s + 1), next.data());
    for (std::size_t j = 0; j < inc.width; ++j) inc.values[s * inc.width + j] = next[j] - prev[j];
    prev.swap(next);
  }
  return inc;
}

WindowSet window(const FrameMatrix& frames, const FrameMatrix& increments, std::size_t n_p,
                 std::size_t n_l, std::size_t stride) {
  if (n_p < 1 || n_l < 1 || stride < 1) throw ConfigError("window: n_p, n_l and stride must be >= 1");
  if (increments.rows + 1 != frames.rows) {
    throw DimensionError("window: increments must have one row fewer than frames");
  }
  if (frames.width != increments.width + 1) {
    throw DimensionError("window: frame width must be increment width + 1");
  }
  const std::size_t ts = frames.rows;
  if (ts < n_p + n_l) {
    throw ConfigError("window: " + std::to_string(ts) + " frames cannot hold n_p + n_l = " +
                      std::to_string(n_p + n_l));
  }
  WindowSet ws;
  ws.n_p = n_p;
  ws.n_l = n_l;
  ws.features = frames.width;
  ws.channels = increments.width;
  ws.trajectory_frames = {static_cast<int>(ts)};
  const std::size_t count = (ts - n_p - n_l) / stride + 1;
  ws.inputs.reserve(count * n_p * ws.features);
  ws.targets.reserve(count * n_l * ws.channels);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t s = w * stride;
    ws.inputs.insert(ws.inputs.end(), frames.values.begin() + s * ws.features,
                     frames.values.begin() + (s + n_p) * ws.features);
    // Increment row j is H_{j+1} - H_j, so step k after the last input frame
    // (index s + n_p - 1) is row s + n_p - 2 + k.
    const std::size_t first = s + n_p - 1;
    ws.targets.insert(ws.targets.end(), increments.values.begin() + first * ws.channels,
                      increments.values.begin() + (first + n_l) * ws.channels);
    ws.split.push_back(Split::kUnassigned);
    ws.trajectory.push_back(0);
    ws.start.push_back(static_cast<int>(s));
  }
  return ws;
}

void append_windows(WindowSet& into, const WindowSet& part) {
  if (into.size() == 0 && into.trajectory_frames.empty()) {
    into = part;
    return;
  }
  if (into.n_p != part.n_p || into.n_l != part.n_l || into.features != part.features ||
      into.channels != part.channels) {
    throw DimensionError("append_windows: window dimensions differ");
  }
  if (into.normalized != part.normalized || (into.normalized && !(into.normalizer == part.normalizer))) {
    throw ContractError("append_windows: normalization state differs");
  }
  const int offset = static_cast<int>(into.trajectory_frames.size());
  into.inputs.insert(into.inputs.end(), part.inputs.begin(), part.inputs.end());
  into.targets.insert(into.targets.end(), part.targets.begin(), part.targets.end());
  into.split.insert(into.split.end(), part.split.begin(), part.split.end());
  into.start.insert(into.start.end(), part.start.begin(), part.start.end());
  for (int t : part.trajectory) into.trajectory.push_back(t + offset);
  into.trajectory_frames.insert(into.trajectory_frames.end(), part.trajectory_frames.begin(),
                                part.trajectory_frames.end());
}

void tag_all(WindowSet& ws, Split s) { std::fill(ws.split.begin(), ws.split.end(), s); }

Normalizer fit_normalizer(const WindowSet& ws) {
  const auto train = ws.indices(Split::kTrain);
  if (train.empty()) throw ConfigError("fit_normalizer: no train windows");
  const auto in = column_moments(train.size() * ws.n_p, ws.features, [&](std::size_t i) {
    return ws.inputs.data() + train[i / ws.n_p] * ws.input_stride() + (i % ws.n_p) * ws.features;
  });
  const auto tg = column_moments(train.size() * ws.n_l, ws.channels, [&](std::size_t i) {
    return ws.targets.data() + train[i / ws.n_l] * ws.target_stride() + (i % ws.n_l) * ws.channels;
  });
  return {in.mean, in.std, tg.mean, tg.std};
}

void apply_normalizer(WindowSet& ws, const Normalizer& norm) {
  if (ws.normalized) throw ContractError("apply_normalizer: window set is already normalized");
  if (norm.input_mean.size() != ws.features || norm.target_mean.size() != ws.channels) {
    throw DimensionError("apply_normalizer: normalizer does not match window dimensions");
  }
  for (std::size_t i = 0; i < ws.inputs.size(); ++i) {
    const auto j = i % ws.features;
    ws.inputs[i] = (ws.inputs[i] - norm.input_mean[j]) / norm.input_std[j];
  }
  for (std::size_t i = 0; i < ws.targets.size(); ++i) {
    const auto j = i % ws.channels;
    ws.targets[i] = (ws.targets[i] - norm.target_mean[j]) / norm.target_std[j];
  }
  ws.normalizer = norm;
  ws.normalized = true;
}

void denormalize_targets(std::span<double> values, const Normalizer& norm) {
  const auto c = norm.target_mean.size();
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = values[i] * norm.target_std[i % c] + norm.target_mean[i % c];
}

void denormalize_inputs(std::span<double> values, const Normalizer& norm) {
  const auto d = norm.input_mean.size();
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = values[i] * norm.input_std[i % d] + norm.input_mean[i % d];
}

WindowSet split_and_normalize(const WindowSet& ws, double train_frac, std::size_t gap) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("split_and_normalize: train_frac must lie in (0, 1)");
  }
  if (ws.normalized) throw ContractError("split_and_normalize: input is already normalized");
  const std::size_t span = ws.n_p + ws.n_l;

  WindowSet out;
  out.n_p = ws.n_p;
  out.n_l = ws.n_l;
  out.features = ws.features;
  out.channels = ws.channels;
  out.trajectory_frames = ws.trajectory_frames;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    Split tag = ws.split[i];
    if (tag != Split::kTest) {
      const auto frames = static_cast<std::size_t>(ws.trajectory_frames.at(ws.trajectory[i]));
      const auto train_end = static_cast<std::size_t>(std::floor(train_frac * frames));
      const auto val_begin = train_end + gap;
      const auto s = static_cast<std::size_t>(ws.start[i]);
      if (s + span <= train_end) {
        tag = Split::kTrain;
      } else if (s >= val_begin) {
        tag = Split::kVal;
      } else {
        continue;
      }
    }
    auto in = ws.input(i);
    auto tg = ws.target(i);
    out.inputs.insert(out.inputs.end(), in.begin(), in.end());
    out.targets.insert(out.targets.end(), tg.begin(), tg.end());
    out.split.push_back(tag);
    out.trajectory.push_back(ws.trajectory[i]);
    out.start.push_back(ws.start[i]);
  }
  if (out.count(Split::kTrain) == 0) throw ConfigError("split_and_normalize: train split is empty");
  if (out.count(Split::kVal) == 0) throw ConfigError("split_and_normalize: val split is empty");
  apply_normalizer(out, fit_normalizer(out));
  return out;
}

LeakageAudit audit_leakage(const WindowSet& ws, std::size_t gap) {
  LeakageAudit audit;
  std::ostringstream detail;
  const std::size_t span = ws.n_p + ws.n_l;
  const std::size_t trajectories = ws.trajectory_frames.size();
  std::vector<long> last_train(trajectories, -1), first_val(trajectories, -1);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto t = static_cast<std::size_t>(ws.trajectory[i]);
    const long s = ws.start[i];
    const long e = s + static_cast<long>(span) - 1;
    if (ws.split[i] == Split::kTrain) last_train[t] = std::max(last_train[t], e);
    if (ws.split[i] == Split::kVal) first_val[t] = first_val[t] < 0 ? s : std::min(first_val[t], s);
  }
  audit.min_gap_seen = static_cast<std::size_t>(-1);
  for (std::size_t t = 0; t < trajectories; ++t) {
    if (last_train[t] < 0 || first_val[t] < 0) continue;
    if (first_val[t] <= last_train[t]) {
      audit.disjoint_ok = false;
      detail << "trajectory " << t << ": val frames overlap train frames; ";
      continue;
    }
    const auto seen = static_cast<std::size_t>(first_val[t] - last_train[t] - 1);
    audit.min_gap_seen = std::min(audit.min_gap_seen, seen);
    if (seen < gap) {
      audit.gap_ok = false;
      detail << "trajectory " << t << ": only " << seen << " frames between train and val; ";
    }
  }
  // A val window placed before the train block would also be leakage.
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws.split[i] != Split::kVal) continue;
    const auto t = static_cast<std::size_t>(ws.trajectory[i]);
    if (last_train[t] >= 0 && ws.start[i] <= last_train[t]) {
      audit.disjoint_ok = false;
      detail << "window " << i << " precedes train block; ";
      break;
    }
  }

  if (ws.normalized) {
    // Statistics fitted on the train windows alone leave those windows with
    // zero mean and unit spread (exactly constant where the std floor
    // applied). Statistics from any other data do not.
    const auto moments = fit_normalizer(ws);
    constexpr double tol = 1e-5;
    auto standardized = [&](const std::vector<double>& mean, const std::vector<double>& sd,
                            const std::vector<double>& stored_sd) {
      for (std::size_t j = 0; j < mean.size(); ++j) {
        if (std::abs(mean[j]) > tol) return false;
        const bool floored = stored_sd[j] <= kStdFloor;
        if (floored ? sd[j] > 1.0 + tol : std::abs(sd[j] - 1.0) > tol) return false;
      }
      return true;
    };
    if (!standardized(moments.input_mean, moments.input_std, ws.normalizer.input_std) ||
        !standardized(moments.target_mean, moments.target_std, ws.normalizer.target_std)) {
      audit.normalizer_ok = false;
      detail << "train windows are not standardized by the stored normalizer; ";
    }
  } else {
    audit.normalizer_ok = false;
    detail << "window set is not normalized; ";
  }
  if (audit.min_gap_seen == static_cast<std::size_t>(-1)) audit.min_gap_seen = 0;
  audit.detail = detail.str();
  return audit;
}

std::vector<double> loss_weights(std::size_t n_l) {
  if (n_l < 1) throw ContractError("loss_weights: n_l must be >= 1");
  std::vector<double> w(n_l);
  for (std::size_t k = 1; k <= n_l; ++k) w[k - 1] = 1.0 / std::sqrt(static_cast<double>(k));
  return w;
}

template <typename T>
Tensor<T> gather_inputs(const WindowSet& ws, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size() * ws.input_stride());
  for (auto i : idx) {
    auto in = ws.input(i);
    for (double v : in) out.push_back(static_cast<T>(v));
  }
  return Tensor<T>::from({idx.size(), ws.n_p, ws.features}, std::move(out));
}

template <typename T>
Tensor<T> gather_targets(const WindowSet& ws, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size() * ws.target_stride());
  for (auto i : idx) {
    auto tg = ws.target(i);
    for (double v : tg) out.push_back(static_cast<T>(v));
  }
  return Tensor<T>::from({idx.size(), ws.n_l, ws.channels}, std::move(out));
}

template Tensor<float> gather_inputs<float>(const WindowSet&, std::span<const std::size_t>);
template Tensor<double> gather_inputs<double>(const WindowSet&, std::span<const std::size_t>);
template Tensor<float> gather_targets<float>(const WindowSet&, std::span<const std::size_t>);
template Tensor<double> gather_targets<double>(const WindowSet&, std::span<const std::size_t>);

void write_windows(std::ostream& out, const WindowSet& ws) {
  out << "CSIW1 " << ws.size() << ' ' << ws.n_p << ' ' << ws.n_l << ' ' << ws.features << ' '
      << ws.channels << '\n';
  Normalizer norm = ws.normalizer;
  if (!ws.normalized) {
    norm.input_mean.assign(ws.features, 0.0);
    norm.input_std.assign(ws.features, 1.0);
    norm.target_mean.assign(ws.channels, 0.0);
    norm.target_std.assign(ws.channels, 1.0);
  }
  for (const auto* block : {&norm.input_mean, &norm.input_std, &norm.target_mean, &norm.target_std})
    for (double v : *block) io::put_f32(out, static_cast<float>(v));
  for (std::size_t i = 0; i < ws.size(); ++i) {
    io::put_u8(out, static_cast<std::uint8_t>(ws.split[i]));
    for (double v : ws.input(i)) io::put_f32(out, static_cast<float>(v));
    for (double v : ws.target(i)) io::put_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("failed writing window set");
}

WindowSet read_windows(std::istream& in) {
  std::istringstream header(io::get_line(in));
  std::string magic;
  std::size_t num = 0;
  WindowSet ws;
  header >> magic >> num >> ws.n_p >> ws.n_l >> ws.features >> ws.channels;
  if (!header || magic != "CSIW1") throw IoError("not a CSIW1 window header");
  if (ws.n_p == 0 || ws.n_l == 0 || ws.features != ws.channels + 1) {
    throw IoError("CSIW1 header has inconsistent dimensions");
  }
  auto block = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = io::get_f32(in);
  };
  block(ws.normalizer.input_mean, ws.features);
  block(ws.normalizer.input_std, ws.features);
  block(ws.normalizer.target_mean, ws.channels);
  block(ws.normalizer.target_std, ws.channels);
  ws.normalized = true;
  ws.inputs.resize(num * ws.input_stride());
  ws.targets.resize(num * ws.target_stride());
  ws.split.resize(num);
  for (std::size_t i = 0; i < num; ++i) {
    const auto code = io::get_u8(in);
    if (code > 2 && code != 255) throw IoError("CSIW1: invalid split code");
    ws.split[i] = static_cast<Split>(code);
    for (std::size_t j = 0; j < ws.input_stride(); ++j) ws.inputs[i * ws.input_stride() + j] = io::get_f32(in);
    for (std::size_t j = 0; j < ws.target_stride(); ++j) ws.targets[i * ws.target_stride() + j] = io::get_f32(in);
  }
  ws.trajectory.assign(num, 0);
  ws.start.assign(num, 0);
  return ws;
}

void save_windows(const std::string& path, const WindowSet& ws) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_windows(out, ws);
}

WindowSet load_windows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_windows(in);
}

}  // namespace csip
