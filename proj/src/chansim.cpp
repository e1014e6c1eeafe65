#include "csip/chansim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "csip/binary_io.hpp"
#include "csip/error.hpp"

namespace csip {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ScenarioConfig component(std::string id, bool los, int paths, double vmin, double vmax) {
  ScenarioConfig c;
  c.id = std::move(id);
  c.los = los;
  c.rician_k_db = los ? 10.0 : -std::numeric_limits<double>::infinity();
  c.num_paths = paths;
  c.speed_min_kmh = vmin;
  c.speed_max_kmh = vmax;
  return c;
}

// Surrogate knobs: UMa is given a richer multipath profile than UMi.
constexpr int kUmaPaths = 6;
constexpr int kUmiPaths = 4;

}  // namespace

int ScenarioConfig::snapshots() const {
  return static_cast<int>(std::lround(trajectory_m * snapshots_per_meter));
}

void ScenarioConfig::validate() const {
  auto fail = [this](const std::string& why) {
    throw ConfigError("scenario '" + id + "': " + why);
  };
  if (!(speed_min_kmh > 0.0) || !(speed_max_kmh >= speed_min_kmh)) {
    fail("speed range must satisfy 0 < min <= max");
  }
  if (num_paths < 1) fail("num_paths must be >= 1");
  if (rx < 1 || tx < 1) fail("antenna counts must be >= 1");
  if (num_sinusoids_per_path < 1) fail("num_sinusoids_per_path must be >= 1");
  if (!(carrier_hz > 0.0) || !(snapshots_per_meter > 0.0) || !(trajectory_m > 0.0)) {
    fail("carrier, sampling density and trajectory length must be positive");
  }
  if (std::isnan(rician_k_db)) fail("rician_k_db is NaN");
  if (min_frames < 0) fail("min_frames must be non-negative");
  const int ts = snapshots();
  if (ts < 2) fail("trajectory yields fewer than 2 snapshots");
  if (min_frames > 0 && ts <= min_frames) {
    fail("trajectory yields " + std::to_string(ts) + " snapshots, windows need more than " +
         std::to_string(min_frames));
  }
}

double doppler_hz(double speed_kmh, double carrier_hz) {
  if (speed_kmh < 0.0) throw ContractError("doppler_hz: speed must be non-negative");
  return (speed_kmh / 3.6) * carrier_hz / kSpeedOfLight;
}

ChannelSeries generate_trajectory(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed ^ fnv1a(cfg.id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  ChannelSeries s;
  s.rx = cfg.rx;
  s.tx = cfg.tx;
  s.paths = cfg.num_paths;
  s.snapshots = cfg.snapshots();
  s.seed = seed;

  const double speed = cfg.speed_min_kmh + (cfg.speed_max_kmh - cfg.speed_min_kmh) * unit(rng);
  s.speed.assign(s.snapshots, speed);
  s.dt = 1.0 / (cfg.snapshots_per_meter * speed / 3.6);
  const double fd = doppler_hz(speed, cfg.carrier_hz);

  double k_lin = 0.0;
  if (cfg.los) {
    if (std::isinf(cfg.rician_k_db)) {
      k_lin = cfg.rician_k_db > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
      k_lin = std::pow(10.0, cfg.rician_k_db / 10.0);
    }
  }
  const double diffuse_share = std::isinf(k_lin) ? 0.0 : 1.0 / (k_lin + 1.0);
  const double los_share = std::isinf(k_lin) ? 1.0 : k_lin / (k_lin + 1.0);

  std::vector<double> path_power(s.paths);
  double total = 0.0;
  for (int p = 0; p < s.paths; ++p) {
    path_power[p] = std::pow(10.0, -cfg.path_decay_db * p / 10.0);
    total += path_power[p];
  }
  for (auto& pw : path_power) pw /= total;

  const int ns = cfg.num_sinusoids_per_path;
  s.per_path.assign(static_cast<std::size_t>(s.rx) * s.tx * s.paths * s.snapshots, {0.0, 0.0});

  // Angular frequency per snapshot index for each sinusoid, shared by all
  // antenna entries of a path.
  std::vector<double> omega(ns);
  std::vector<double> phase(ns);
  for (int p = 0; p < s.paths; ++p) {
    for (int i = 0; i < ns; ++i) omega[i] = two_pi * fd * std::cos(two_pi * unit(rng)) * s.dt;
    const double amp = std::sqrt(path_power[p] * diffuse_share / ns);
    for (int r = 0; r < s.rx; ++r) {
      for (int t = 0; t < s.tx; ++t) {
        for (int i = 0; i < ns; ++i) phase[i] = two_pi * unit(rng);
        if (amp == 0.0) continue;
        auto* out = &s.per_path[s.index(r, t, p, 0)];
        for (int n = 0; n < s.snapshots; ++n) {
          std::complex<double> acc{0.0, 0.0};
          for (int i = 0; i < ns; ++i) acc += std::polar(amp, omega[i] * n + phase[i]);
          out[n] = acc;
        }
      }
    }
  }

  if (cfg.los && los_share > 0.0) {
    const double omega_los = two_pi * fd * std::cos(two_pi * unit(rng)) * s.dt;
    const double amp = std::sqrt(los_share);
    for (int r = 0; r < s.rx; ++r) {
      for (int t = 0; t < s.tx; ++t) {
        const double phi = two_pi * unit(rng);
        auto* out = &s.per_path[s.index(r, t, 0, 0)];
        for (int n = 0; n < s.snapshots; ++n) out[n] += std::polar(amp, omega_los * n + phi);
      }
    }
  }
  return s;
}

EffectiveChannel collapse_paths(const ChannelSeries& series) {
  EffectiveChannel e;
  e.rx = series.rx;
  e.tx = series.tx;
  e.snapshots = series.snapshots;
  e.values.assign(static_cast<std::size_t>(e.rx) * e.tx * e.snapshots, {0.0, 0.0});
  for (int r = 0; r < e.rx; ++r)
    for (int t = 0; t < e.tx; ++t) {
      auto* out = &e.values[(static_cast<std::size_t>(r) * e.tx + t) * e.snapshots];
      for (int p = 0; p < series.paths; ++p) {
        const auto* in = &series.per_path[series.index(r, t, p, 0)];
        for (int n = 0; n < e.snapshots; ++n) out[n] += in[n];
      }
    }
  return e;
}

void write_trajectory(std::ostream& out, const ChannelSeries& s) {
  char dt[64];
  std::snprintf(dt, sizeof dt, "%.17g", s.dt);
  out << "CSIT1 " << s.rx << ' ' << s.tx << ' ' << s.paths << ' ' << s.snapshots << ' ' << dt
      << ' ' << s.seed << '\n';
  for (const auto& v : s.per_path) {
    io::put_f32(out, static_cast<float>(v.real()));
    io::put_f32(out, static_cast<float>(v.imag()));
  }
  for (double v : s.speed) io::put_f32(out, static_cast<float>(v));
  if (!out) throw IoError("failed writing trajectory");
}

ChannelSeries read_trajectory(std::istream& in) {
  std::istringstream header(io::get_line(in));
  std::string magic;
  ChannelSeries s;
  header >> magic >> s.rx >> s.tx >> s.paths >> s.snapshots >> s.dt >> s.seed;
  if (!header || magic != "CSIT1") throw IoError("not a CSIT1 trajectory header");
  if (s.rx < 1 || s.tx < 1 || s.paths < 1 || s.snapshots < 1) {
    throw IoError("CSIT1 header has non-positive dimensions");
  }
  s.per_path.resize(static_cast<std::size_t>(s.rx) * s.tx * s.paths * s.snapshots);
  for (auto& v : s.per_path) {
    const float re = io::get_f32(in);
    const float im = io::get_f32(in);
    v = {re, im};
  }
  s.speed.resize(s.snapshots);
  for (auto& v : s.speed) v = io::get_f32(in);
  return s;
}

void save_trajectory(const std::string& path, const ChannelSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_trajectory(out, series);
}

ChannelSeries load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_trajectory(in);
}

std::vector<std::string> scenario_preset_names() {
  return {"train-mix", "scenario-i", "scenario-ii", "scenario-iii", "scenario-iv", "scenario-v"};
}

std::vector<ScenarioConfig> scenario_preset(const std::string& name) {
  if (name == "train-mix") {
    return {component("uma-los", true, kUmaPaths, 3, 60), component("uma-nlos", false, kUmaPaths, 3, 60),
            component("umi-los", true, kUmiPaths, 3, 60), component("umi-nlos", false, kUmiPaths, 3, 60)};
  }
  if (name == "scenario-i") {
    return {component("uma-los", true, kUmaPaths, 10, 60),
            component("umi-nlos", false, kUmiPaths, 10, 60)};
  }
  if (name == "scenario-ii") {
    return {component("umi-los", true, kUmiPaths, 3, 5), component("umi-nlos", false, kUmiPaths, 3, 5)};
  }
  if (name == "scenario-iii") return {component("umi-nlos", false, kUmiPaths, 10, 60)};
  if (name == "scenario-iv") {
    return {component("uma-los", true, kUmaPaths, 80, 120),
            component("uma-nlos", false, kUmaPaths, 80, 120)};
  }
  if (name == "scenario-v") return {component("uma-los", true, kUmaPaths, 10, 60)};
  throw ConfigError("unknown scenario preset '" + name + "'");
}

}  // namespace csip
