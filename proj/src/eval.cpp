#include "csip/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "csip/error.hpp"

namespace csip {

double ratio_to_db(double ratio) {
  if (ratio <= 0.0) return kNmseFloorDb;
  return std::max(10.0 * std::log10(ratio), kNmseFloorDb);
}

double nmse_ratio(std::span<const double> pred, std::span<const double> target, NmseAggregation agg,
                  std::size_t window_size) {
  if (pred.size() != target.size()) throw DimensionError("nmse: prediction and target sizes differ");
  if (target.empty()) throw ContractError("nmse: empty input");
  auto energies = [&](std::size_t from, std::size_t to) {
    double err = 0.0, sig = 0.0;
    for (std::size_t i = from; i < to; ++i) {
      const double e = pred[i] - target[i];
      err += e * e;
      sig += target[i] * target[i];
    }
    return std::pair{err, sig};
  };
  if (agg == NmseAggregation::kPooled) {
    const auto [err, sig] = energies(0, pred.size());
    if (sig == 0.0) throw NumericError("nmse: target energy is zero, metric undefined");
    return err / sig;
  }
  if (window_size == 0 || pred.size() % window_size != 0) {
    throw ContractError("nmse: per-window aggregation needs a window size dividing the input");
  }
  const std::size_t n = pred.size() / window_size;
  double total = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    const auto [err, sig] = energies(w * window_size, (w + 1) * window_size);
    if (sig == 0.0) throw NumericError("nmse: window " + std::to_string(w) + " has zero target energy");
    total += err / sig;
  }
  return total / static_cast<double>(n);
}

double nmse_db(std::span<const double> pred, std::span<const double> target, NmseAggregation agg,
               std::size_t window_size) {
  return ratio_to_db(nmse_ratio(pred, target, agg, window_size));
}

std::vector<double> reconstruct_channel(std::span<const double> last_obs,
                                        std::span<const double> increments, std::size_t n_l,
                                        std::size_t channels) {
  if (channels == 0 || n_l == 0 || last_obs.size() % channels != 0) {
    throw DimensionError("reconstruct_channel: last_obs is not [N, C]");
  }
  const std::size_t n = last_obs.size() / channels;
  if (increments.size() != n * n_l * channels) {
    throw DimensionError("reconstruct_channel: increments are not [N, N_L, C]");
  }
  std::vector<double> out(increments.size());
  for (std::size_t w = 0; w < n; ++w)
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = last_obs[w * channels + c];
      for (std::size_t k = 0; k < n_l; ++k) {
        const auto i = (w * n_l + k) * channels + c;
        acc += increments[i];
        out[i] = acc;
      }
    }
  return out;
}

std::vector<double> per_step_mse(std::span<const double> pred, std::span<const double> target,
                                 std::size_t n_l, std::size_t channels) {
  if (pred.size() != target.size() || pred.size() % (n_l * channels) != 0 || pred.empty()) {
    throw DimensionError("per_step_mse: inputs are not matching [N, N_L, C] arrays");
  }
  const std::size_t n = pred.size() / (n_l * channels);
  std::vector<double> out(n_l, 0.0);
  for (std::size_t w = 0; w < n; ++w)
    for (std::size_t k = 0; k < n_l; ++k)
      for (std::size_t c = 0; c < channels; ++c) {
        const auto i = (w * n_l + k) * channels + c;
        const double e = pred[i] - target[i];
        out[k] += e * e;
      }
  for (auto& v : out) v /= static_cast<double>(n * channels);
  return out;
}

namespace {

Predictions truth(const WindowSet& ws, const std::vector<std::size_t>& idx) {
  if (!ws.normalized) throw ContractError("predict: window set must be normalized");
  Predictions p;
  p.windows = idx.size();
  p.n_l = ws.n_l;
  p.channels = ws.channels;
  for (auto i : idx) {
    auto tg = ws.target(i);
    p.true_increments.insert(p.true_increments.end(), tg.begin(), tg.end());
    auto in = ws.input(i);
    const auto* last = in.data() + (ws.n_p - 1) * ws.features;
    std::vector<double> frame(last, last + ws.features);
    denormalize_inputs(frame, ws.normalizer);
    p.last_observed.insert(p.last_observed.end(), frame.begin(), frame.begin() + ws.channels);
  }
  denormalize_targets(p.true_increments, ws.normalizer);
  p.true_channels = reconstruct_channel(p.last_observed, p.true_increments, p.n_l, p.channels);
  return p;
}

}  // namespace

Predictions predict(const Model<double>& model, const WindowSet& ws, Split split, std::size_t batch) {
  const auto idx = ws.indices(split);
  if (idx.empty()) throw ConfigError(std::string("predict: no ") + split_name(split) + " windows");
  auto p = truth(ws, idx);
  NoGradGuard no_grad;
  p.pred_increments.reserve(p.true_increments.size());
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    std::span<const std::size_t> chunk(idx.data() + s, std::min(batch, idx.size() - s));
    auto out = model.forward(gather_inputs<double>(ws, chunk), false);
    p.pred_increments.insert(p.pred_increments.end(), out.data().begin(), out.data().end());
  }
  denormalize_targets(p.pred_increments, ws.normalizer);
  p.pred_channels = reconstruct_channel(p.last_observed, p.pred_increments, p.n_l, p.channels);
  return p;
}

Predictions predict_persistence(const WindowSet& ws, Split split) {
  const auto idx = ws.indices(split);
  if (idx.empty()) throw ConfigError(std::string("predict: no ") + split_name(split) + " windows");
  auto p = truth(ws, idx);
  p.pred_increments.assign(p.true_increments.size(), 0.0);
  p.pred_channels = reconstruct_channel(p.last_observed, p.pred_increments, p.n_l, p.channels);
  return p;
}

double throughput_bench(const Model<float>& model, const BenchConfig& cfg) {
  if (cfg.reps < 5 || cfg.warmup < 2 || cfg.batch == 0) {
    throw ContractError("throughput_bench: need reps >= 5, warmup >= 2 and a positive batch");
  }
  const auto& dims = model.dims();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> data(cfg.batch * dims.n_p * model.input_features());
  for (auto& v : data) v = dist(rng);
  const auto input = Tensor<float>::from({cfg.batch, dims.n_p, model.input_features()}, std::move(data));

  NoGradGuard no_grad;
  using Clock = std::chrono::steady_clock;
  const double tick = static_cast<double>(Clock::period::num) / static_cast<double>(Clock::period::den);
  for (std::size_t i = 0; i < cfg.warmup; ++i) model.forward(input, false);
  std::vector<double> rates;
  rates.reserve(cfg.reps);
  for (std::size_t i = 0; i < cfg.reps; ++i) {
    const auto t0 = Clock::now();
    auto out = model.forward(input, false);
    const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    if (elapsed <= 0.0 || tick > 0.01 * elapsed) {
      throw MeasurementError("throughput_bench: clock resolution too coarse for a " +
                             std::to_string(elapsed) + " s pass");
    }
    rates.push_back(static_cast<double>(cfg.batch) / elapsed);
  }
  std::sort(rates.begin(), rates.end());
  const auto n = rates.size();
  return n % 2 ? rates[n / 2] : 0.5 * (rates[n / 2 - 1] + rates[n / 2]);
}

SeedMetrics score(const Predictions& p, std::uint64_t seed, NmseAggregation agg) {
  SeedMetrics m;
  m.seed = seed;
  const auto window = p.n_l * p.channels;
  m.nmse_inc_ratio = nmse_ratio(p.pred_increments, p.true_increments, agg, window);
  m.nmse_chan_ratio = nmse_ratio(p.pred_channels, p.true_channels, agg, window);
  m.nmse_inc_db = ratio_to_db(m.nmse_inc_ratio);
  m.nmse_chan_db = ratio_to_db(m.nmse_chan_ratio);
  m.per_step_mse = per_step_mse(p.pred_increments, p.true_increments, p.n_l, p.channels);
  return m;
}

EvalReport aggregate(const std::string& variant, const std::string& scenario,
                     std::vector<SeedMetrics> per_seed, std::size_t params, double gflops,
                     double throughput_sps) {
  if (per_seed.empty()) throw ContractError("aggregate: no seeds");
  EvalReport r;
  r.variant = variant;
  r.scenario = scenario;
  r.seeds = per_seed.size();
  r.params = params;
  r.gflops = gflops;
  r.throughput_sps = throughput_sps;
  const double n = static_cast<double>(per_seed.size());
  double inc = 0.0, chan = 0.0;
  r.per_step_mse.assign(per_seed.front().per_step_mse.size(), 0.0);
  for (const auto& s : per_seed) {
    inc += s.nmse_inc_ratio;
    chan += s.nmse_chan_ratio;
    for (std::size_t k = 0; k < r.per_step_mse.size(); ++k) r.per_step_mse[k] += s.per_step_mse[k] / n;
  }
  r.nmse_inc_db = ratio_to_db(inc / n);
  r.nmse_chan_db = ratio_to_db(chan / n);
  if (per_seed.size() > 1) {
    auto sample_std = [&](auto field) {
      double mean = 0.0;
      for (const auto& s : per_seed) mean += field(s);
      mean /= n;
      double sq = 0.0;
      for (const auto& s : per_seed) sq += (field(s) - mean) * (field(s) - mean);
      return std::sqrt(sq / (n - 1.0));
    };
    r.nmse_inc_db_std = sample_std([](const SeedMetrics& s) { return s.nmse_inc_db; });
    r.nmse_chan_db_std = sample_std([](const SeedMetrics& s) { return s.nmse_chan_db; });
  }
  r.per_seed = std::move(per_seed);
  return r;
}

EvalReport evaluate(const std::vector<Model<double>>& models, const std::vector<std::uint64_t>& seeds,
                    const WindowSet& ws, const EvalConfig& cfg) {
  if (models.empty() || models.size() != seeds.size()) {
    throw ContractError("evaluate: need one model per seed");
  }
  std::vector<SeedMetrics> per_seed;
  for (std::size_t i = 0; i < models.size(); ++i) {
    per_seed.push_back(score(predict(models[i], ws, cfg.split, cfg.batch), seeds[i], cfg.aggregation));
  }
  const auto& first = models.front();
  double throughput = 0.0;
  if (cfg.bench) throughput = throughput_bench(first.cast<float>(), *cfg.bench);
  return aggregate(first.spec().name, cfg.scenario, std::move(per_seed), param_count(first),
                   gflops_per_sample(first.spec(), first.dims()), throughput);
}

void write_report_header(std::ostream& out) {
  out << "variant,scenario,seed,nmse_inc_db,nmse_chan_db,params,gflops,throughput_sps\n";
}

void write_report_rows(std::ostream& out, const EvalReport& r) {
  char line[512];
  auto row = [&](const std::string& seed, double inc, double chan) {
    std::snprintf(line, sizeof line, "%s,%s,%s,%.6f,%.6f,%zu,%.6f,%.2f\n", r.variant.c_str(),
                  r.scenario.c_str(), seed.c_str(), inc, chan, r.params, r.gflops, r.throughput_sps);
    out << line;
  };
  for (const auto& s : r.per_seed) row(std::to_string(s.seed), s.nmse_inc_db, s.nmse_chan_db);
  row("mean", r.nmse_inc_db, r.nmse_chan_db);
  if (r.nmse_inc_db_std) row("std", *r.nmse_inc_db_std, *r.nmse_chan_db_std);
}

void write_per_step_header(std::ostream& out) { out << "variant,step,mse\n"; }

void write_per_step_rows(std::ostream& out, const EvalReport& r) {
  char line[256];
  for (std::size_t k = 0; k < r.per_step_mse.size(); ++k) {
    std::snprintf(line, sizeof line, "%s,%zu,%.10g\n", r.variant.c_str(), k + 1, r.per_step_mse[k]);
    out << line;
  }
}

}  // namespace csip
