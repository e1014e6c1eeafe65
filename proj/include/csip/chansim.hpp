#pragma once

// Sum-of-sinusoids MIMO fading simulator.
//
// Each NLOS path entry is a Clarke-style sum of complex sinusoids with Doppler
// shifts f_d cos(theta_i). Antenna entries of one path share the arrival
// angles but draw independent phases. A LOS scenario adds a deterministic
// phase ramp on the first path carrying K/(K+1) of the total power. Mean
// power is normalized to one (no pathloss or shadowing).

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace csip {

inline constexpr double kSpeedOfLight = 299792458.0;

struct ScenarioConfig {
  std::string id = "custom";
  bool los = false;
  // LOS-to-diffuse power ratio in dB; -inf gives pure NLOS, +inf pure LOS.
  double rician_k_db = -std::numeric_limits<double>::infinity();
  int num_paths = 4;
  double speed_min_kmh = 10.0;
  double speed_max_kmh = 60.0;
  double carrier_hz = 3.5e9;
  double snapshots_per_meter = 30.0;
  double trajectory_m = 150.0;
  int num_sinusoids_per_path = 32;
  int rx = 2;
  int tx = 2;
  // Consumers that need N_P + N_L consecutive frames set this so that a too
  // short trajectory is rejected up front. Zero disables the check.
  int min_frames = 0;
  // Power decay between consecutive path indices.
  double path_decay_db = 3.0;

  int snapshots() const;
  // Throws ConfigError on an invalid configuration.
  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

// Per-path complex channel over time plus the UE speed track.
struct ChannelSeries {
  int rx = 0;
  int tx = 0;
  int paths = 0;
  int snapshots = 0;
  double dt = 0.0;  // seconds per snapshot
  std::uint64_t seed = 0;
  // Row-major [rx, tx, paths, snapshots].
  std::vector<std::complex<double>> per_path;
  // km/h, one entry per snapshot.
  std::vector<double> speed;

  std::size_t index(int r, int t, int p, int s) const {
    return ((static_cast<std::size_t>(r) * tx + t) * paths + p) * snapshots + s;
  }
  std::complex<double> at(int r, int t, int p, int s) const { return per_path[index(r, t, p, s)]; }
};

// Path-collapsed channel, row-major [rx, tx, snapshots].
struct EffectiveChannel {
  int rx = 0;
  int tx = 0;
  int snapshots = 0;
  std::vector<std::complex<double>> values;

  std::complex<double> at(int r, int t, int s) const {
    return values[(static_cast<std::size_t>(r) * tx + t) * snapshots + s];
  }
};

// (speed_kmh / 3.6) * carrier_hz / c. Throws ContractError on negative speed.
double doppler_hz(double speed_kmh, double carrier_hz);

ChannelSeries generate_trajectory(const ScenarioConfig& cfg, std::uint64_t seed);

EffectiveChannel collapse_paths(const ChannelSeries& series);

// "CSIT1" trajectory file: ASCII header line `CSIT1 R T P Ts dt seed`, then
// little-endian float32 (re, im) pairs in row-major [R,T,P,Ts] order, then Ts
// float32 speeds.
void write_trajectory(std::ostream& out, const ChannelSeries& series);
ChannelSeries read_trajectory(std::istream& in);
void save_trajectory(const std::string& path, const ChannelSeries& series);
ChannelSeries load_trajectory(const std::string& path);

// Named scenario presets. A preset expands into one or more component
// configurations; trajectory `seed` of a preset uses component
// seed % components.size().
std::vector<std::string> scenario_preset_names();
std::vector<ScenarioConfig> scenario_preset(const std::string& name);

}  // namespace csip
