#include "csip/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "csip/error.hpp"

namespace csip {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t scenario_seed_base(const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

template <typename V>
void read_key(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

template <typename V>
void read_opt(const json& j, const char* key, std::optional<V>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<V>();
  }
}

template <typename V>
json opt_json(const std::optional<V>& v) {
  return v ? json(*v) : json(nullptr);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory '" + path + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::vector<std::pair<std::string, WindowSet>> build_test_sets(const ExperimentConfig& cfg,
                                                               const Normalizer& norm,
                                                               TrajectorySource source) {
  std::vector<std::pair<std::string, WindowSet>> tests;
  for (const auto& s : cfg.test_scenarios) tests.emplace_back(s, build_test_set(cfg, s, norm, source));
  return tests;
}

void write_reports(const std::string& dir, const std::vector<EvalReport>& reports) {
  auto report = open_out(dir + "/report.csv");
  write_report_header(report);
  for (const auto& r : reports) write_report_rows(report, r);
  auto steps = open_out(dir + "/per_step.csv");
  write_per_step_header(steps);
  for (const auto& r : reports)
    if (r.scenario == "all") write_per_step_rows(steps, r);
}

}  // namespace

ModelDims ExperimentConfig::dims() const {
  ModelDims m;
  m.d = d;
  m.layers = layers;
  m.n_p = data.n_p;
  m.n_l = data.n_l;
  // Antenna counts are fixed by the scenario presets (2x2).
  const auto comps = scenario_preset(train_scenario);
  m.channels = 2 * static_cast<std::size_t>(comps.front().rx) * comps.front().tx;
  m.features = m.channels + 1;
  m.reduction = reduction;
  m.dropout = train.dropout;
  return m;
}

void ExperimentConfig::validate() const {
  const auto names = scenario_preset_names();
  auto known = [&](const std::string& s) {
    return s == kHoldoutScenario || std::find(names.begin(), names.end(), s) != names.end();
  };
  if (!known(train_scenario) || train_scenario == kHoldoutScenario) {
    throw ConfigError("unknown training scenario '" + train_scenario + "'");
  }
  for (const auto& s : test_scenarios)
    if (!known(s)) throw ConfigError("unknown test scenario '" + s + "'");
  if (variants.empty()) throw ConfigError("no variants configured");
  for (const auto& v : variants) variant_by_name(v);
  if (seeds == 0) throw ConfigError("seed list must be non-empty");
  if (data.train_trajectories == 0) throw ConfigError("need at least one training trajectory");
  if (!test_scenarios.empty() && data.test_trajectories == 0) {
    throw ConfigError("test scenarios configured but test_trajectories is 0");
  }
  if (data.stride == 0) throw ConfigError("stride must be positive");
  dims().validate();
  train.validate();
  for (const auto& c : scenario_components(*this, train_scenario)) c.validate();
}

ExperimentConfig profile_config(const std::string& profile) {
  ExperimentConfig c;
  c.profile = profile;
  c.test_scenarios = {kHoldoutScenario, "scenario-i", "scenario-ii", "scenario-iii", "scenario-iv",
                      "scenario-v"};
  if (profile == "desk") {
    c.overrides.speed_min_kmh = 10.0;
    c.overrides.speed_max_kmh = 60.0;
    c.data = DataConfig{};
    c.d = 32;
    c.layers = 1;
    c.reduction = 4;
    c.train.lr = 3e-3;
    c.train.weight_decay = 1e-4;
    c.train.batch = 64;
    c.train.max_epochs = 150;
    c.train.patience = 20;
    c.train.dropout = 0.0;
    c.seeds = 3;
    return c;
  }
  if (profile == "paper") {
    c.data.n_p = 128;
    c.data.n_l = 8;
    c.data.stride = 1;
    c.data.train_trajectories = 40;
    c.data.test_trajectories = 8;
    c.d = 256;
    c.layers = 3;
    c.reduction = 4;
    c.train = TrainConfig{};  // lr 3e-4, wd 1e-4, batch 256, 100 epochs, patience 15, dropout 0.3
    c.seeds = 10;
    return c;
  }
  throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
}

ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = base;
  try {
    read_key(j, "profile", c.profile);
    if (j.contains("scenarios")) {
      const auto& s = j.at("scenarios");
      read_key(s, "train", c.train_scenario);
      read_key(s, "test", c.test_scenarios);
      if (s.contains("overrides")) {
        const auto& o = s.at("overrides");
        read_opt(o, "rician_k_db", c.overrides.rician_k_db);
        read_opt(o, "num_paths", c.overrides.num_paths);
        read_opt(o, "num_sinusoids_per_path", c.overrides.num_sinusoids_per_path);
        read_opt(o, "trajectory_m", c.overrides.trajectory_m);
        read_opt(o, "speed_min_kmh", c.overrides.speed_min_kmh);
        read_opt(o, "speed_max_kmh", c.overrides.speed_max_kmh);
      }
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read_key(d, "n_p", c.data.n_p);
      read_key(d, "n_l", c.data.n_l);
      read_key(d, "stride", c.data.stride);
      read_key(d, "train_frac", c.data.train_frac);
      read_key(d, "gap", c.data.gap);
      read_key(d, "train_trajectories", c.data.train_trajectories);
      read_key(d, "test_trajectories", c.data.test_trajectories);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      read_key(m, "d", c.d);
      read_key(m, "layers", c.layers);
      read_key(m, "reduction", c.reduction);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      read_key(t, "lr", c.train.lr);
      read_key(t, "weight_decay", c.train.weight_decay);
      read_key(t, "batch", c.train.batch);
      read_key(t, "max_epochs", c.train.max_epochs);
      read_key(t, "patience", c.train.patience);
      read_key(t, "seed", c.train.seed);
      read_key(t, "dropout", c.train.dropout);
      read_key(t, "beta1", c.train.beta1);
      read_key(t, "beta2", c.train.beta2);
      read_key(t, "eps", c.train.eps);
      read_key(t, "clip", c.train.clip);
      read_key(t, "clip_norm", c.train.clip_norm);
    }
    read_key(j, "variants", c.variants);
    read_key(j, "seeds", c.seeds);
    if (j.contains("bench")) {
      const auto& b = j.at("bench");
      read_key(b, "batch", c.bench.batch);
      read_key(b, "reps", c.bench.reps);
      read_key(b, "warmup", c.bench.warmup);
      read_key(b, "seed", c.bench.seed);
    }
    read_key(j, "out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a malformed field: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string render_config(const ExperimentConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["scenarios"] = {
      {"train", c.train_scenario},
      {"test", c.test_scenarios},
      {"overrides",
       {{"rician_k_db", opt_json(c.overrides.rician_k_db)},
        {"num_paths", opt_json(c.overrides.num_paths)},
        {"num_sinusoids_per_path", opt_json(c.overrides.num_sinusoids_per_path)},
        {"trajectory_m", opt_json(c.overrides.trajectory_m)},
        {"speed_min_kmh", opt_json(c.overrides.speed_min_kmh)},
        {"speed_max_kmh", opt_json(c.overrides.speed_max_kmh)}}}};
  j["data"] = {{"n_p", c.data.n_p},
               {"n_l", c.data.n_l},
               {"stride", c.data.stride},
               {"train_frac", c.data.train_frac},
               {"gap", c.data.gap},
               {"train_trajectories", c.data.train_trajectories},
               {"test_trajectories", c.data.test_trajectories}};
  j["model"] = {{"d", c.d}, {"layers", c.layers}, {"reduction", c.reduction}};
  j["train"] = {{"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"batch", c.train.batch},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"seed", c.train.seed},
                {"dropout", c.train.dropout},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"eps", c.train.eps},
                {"clip", c.train.clip},
                {"clip_norm", c.train.clip_norm}};
  j["variants"] = c.variants;
  j["seeds"] = c.seeds;
  j["bench"] = {{"batch", c.bench.batch}, {"reps", c.bench.reps}, {"warmup", c.bench.warmup},
                {"seed", c.bench.seed}};
  j["out_dir"] = c.out_dir;
  return j.dump(2) + "\n";
}

std::vector<ScenarioConfig> scenario_components(const ExperimentConfig& cfg, const std::string& scenario) {
  auto comps = scenario_preset(scenario == kHoldoutScenario ? cfg.train_scenario : scenario);
  const auto& o = cfg.overrides;
  for (auto& c : comps) {
    if (o.rician_k_db && c.los) c.rician_k_db = *o.rician_k_db;
    if (o.num_paths) c.num_paths = *o.num_paths;
    if (o.num_sinusoids_per_path) c.num_sinusoids_per_path = *o.num_sinusoids_per_path;
    if (o.trajectory_m) c.trajectory_m = *o.trajectory_m;
    // Speed overrides only retarget the training distribution (and its
    // holdout); test presets keep their own speed ranges.
    if (scenario == cfg.train_scenario || scenario == kHoldoutScenario) {
      if (o.speed_min_kmh) c.speed_min_kmh = *o.speed_min_kmh;
      if (o.speed_max_kmh) c.speed_max_kmh = *o.speed_max_kmh;
    }
    c.min_frames = static_cast<int>(cfg.data.n_p + cfg.data.n_l);
  }
  return comps;
}

std::size_t trajectory_count(const ExperimentConfig& cfg, const std::string& scenario) {
  return scenario == cfg.train_scenario ? cfg.data.train_trajectories : cfg.data.test_trajectories;
}

ChannelSeries make_trajectory(const ExperimentConfig& cfg, const std::string& scenario, std::size_t index) {
  const auto comps = scenario_components(cfg, scenario);
  return generate_trajectory(comps[index % comps.size()], scenario_seed_base(scenario) + index);
}

std::string data_dir(const ExperimentConfig& cfg) { return cfg.out_dir + "/data"; }

std::string trajectory_path(const ExperimentConfig& cfg, const std::string& scenario, std::size_t index) {
  return data_dir(cfg) + "/" + scenario + "-t" + std::to_string(index) + ".csit";
}

std::string run_dir(const ExperimentConfig& cfg, const std::string& variant) {
  return cfg.out_dir + "/runs/" + variant;
}

namespace {

ChannelSeries fetch(const ExperimentConfig& cfg, const std::string& scenario, std::size_t index,
                    TrajectorySource source) {
  if (source == TrajectorySource::kMemory) return make_trajectory(cfg, scenario, index);
  const auto path = trajectory_path(cfg, scenario, index);
  if (!fs::exists(path)) {
    throw IoError("missing trajectory '" + path + "'; run `csip generate` with the same config first");
  }
  return load_trajectory(path);
}

WindowSet windows_of(const ChannelSeries& s, const DataConfig& data) {
  const auto eff = collapse_paths(s);
  return window(featurize(eff, s.speed), make_increments(eff), data.n_p, data.n_l, data.stride);
}

}  // namespace

WindowSet build_training_set(const ExperimentConfig& cfg, TrajectorySource source) {
  WindowSet all;
  for (std::size_t i = 0; i < cfg.data.train_trajectories; ++i) {
    append_windows(all, windows_of(fetch(cfg, cfg.train_scenario, i, source), cfg.data));
  }
  return split_and_normalize(all, cfg.data.train_frac, cfg.data.gap);
}

WindowSet build_test_set(const ExperimentConfig& cfg, const std::string& scenario, const Normalizer& norm,
                         TrajectorySource source) {
  WindowSet all;
  for (std::size_t i = 0; i < cfg.data.test_trajectories; ++i) {
    append_windows(all, windows_of(fetch(cfg, scenario, i, source), cfg.data));
  }
  tag_all(all, Split::kTest);
  apply_normalizer(all, norm);
  return all;
}

TrainedVariant train_variant(const ExperimentConfig& cfg, const WindowSet& train_set,
                             const std::string& variant, bool persist, const Logger& log) {
  TrainedVariant out;
  out.spec = variant_by_name(variant);
  const auto dims = cfg.dims();
  const auto dir = run_dir(cfg, variant);
  if (persist) ensure_dir(dir);
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = cfg.train.seed + s;
    Model<double> init(out.spec, dims, seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    TrainOptions opts;
    const auto stem = dir + "/seed" + std::to_string(seed);
    if (persist) {
      opts.state_path = stem + ".state";
      opts.resume = true;
    }
    say(log, variant + " seed " + std::to_string(seed) + ": training (" +
                 std::to_string(param_count(init)) + " params)");
    auto result = train(init, train_set, tc, opts);
    say(log, variant + " seed " + std::to_string(seed) + ": best val loss " +
                 fmt_double(result.history.best_val_loss) + " at epoch " +
                 std::to_string(result.history.best_epoch) + " of " +
                 std::to_string(result.history.epochs.size()));
    if (persist) {
      save_checkpoint(stem + ".csim", result.model);
      auto hist = open_out(stem + ".history.csv");
      write_history_csv(hist, result.history);
    }
    out.seeds.push_back(seed);
    out.models.push_back(std::move(result.model));
    out.histories.push_back(std::move(result.history));
  }
  return out;
}

std::vector<EvalReport> evaluate_variant(const ExperimentConfig& cfg, const TrainedVariant& trained,
                                         const std::vector<std::pair<std::string, WindowSet>>& tests) {
  std::vector<EvalReport> reports;
  const auto& first = trained.models.front();
  const auto params = param_count(first);
  const auto gflops = gflops_per_sample(first.spec(), first.dims());
  // Pooled "all" metrics per seed: sum error and target energies across
  // scenarios by concatenating predictions.
  std::vector<Predictions> pooled(trained.models.size());
  for (const auto& [name, ws] : tests) {
    std::vector<SeedMetrics> per_seed;
    for (std::size_t i = 0; i < trained.models.size(); ++i) {
      auto p = predict(trained.models[i], ws, Split::kTest, cfg.train.batch);
      per_seed.push_back(score(p, trained.seeds[i]));
      auto& acc = pooled[i];
      acc.n_l = p.n_l;
      acc.channels = p.channels;
      acc.windows += p.windows;
      auto cat = [](std::vector<double>& a, const std::vector<double>& b) { a.insert(a.end(), b.begin(), b.end()); };
      cat(acc.pred_increments, p.pred_increments);
      cat(acc.true_increments, p.true_increments);
      cat(acc.last_observed, p.last_observed);
      cat(acc.pred_channels, p.pred_channels);
      cat(acc.true_channels, p.true_channels);
    }
    reports.push_back(aggregate(trained.spec.name, name, std::move(per_seed), params, gflops, 0.0));
  }
  if (!tests.empty()) {
    std::vector<SeedMetrics> per_seed;
    for (std::size_t i = 0; i < pooled.size(); ++i) per_seed.push_back(score(pooled[i], trained.seeds[i]));
    reports.push_back(aggregate(trained.spec.name, "all", std::move(per_seed), params, gflops, 0.0));
  }
  return reports;
}

std::vector<std::string> cmd_generate(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  ensure_dir(data_dir(cfg));
  std::vector<std::string> scenarios = {cfg.train_scenario};
  scenarios.insert(scenarios.end(), cfg.test_scenarios.begin(), cfg.test_scenarios.end());
  std::vector<std::string> written;
  for (const auto& s : scenarios) {
    for (std::size_t i = 0; i < trajectory_count(cfg, s); ++i) {
      const auto path = trajectory_path(cfg, s, i);
      save_trajectory(path, make_trajectory(cfg, s, i));
      written.push_back(path);
    }
    say(log, "generated " + std::to_string(trajectory_count(cfg, s)) + " trajectories for " + s);
  }
  auto cfg_out = open_out(cfg.out_dir + "/config.json");
  cfg_out << render_config(cfg);
  written.push_back(cfg.out_dir + "/config.json");
  return written;
}

std::vector<std::string> cmd_train(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  auto train_set = build_training_set(cfg, TrajectorySource::kFiles);
  const auto audit = audit_leakage(train_set, cfg.data.gap);
  if (!audit.ok()) throw ContractError("training set failed the leakage audit: " + audit.detail);
  say(log, "training set: " + std::to_string(train_set.count(Split::kTrain)) + " train / " +
               std::to_string(train_set.count(Split::kVal)) + " val windows");
  save_windows(data_dir(cfg) + "/train.csiw", train_set);
  const auto tests = build_test_sets(cfg, train_set.normalizer, TrajectorySource::kFiles);

  std::vector<std::string> written = {data_dir(cfg) + "/train.csiw"};
  for (const auto& v : cfg.variants) {
    auto trained = train_variant(cfg, train_set, v, true, log);
    const auto reports = evaluate_variant(cfg, trained, tests);
    const auto dir = run_dir(cfg, v);
    write_reports(dir, reports);
    for (auto seed : trained.seeds) {
      written.push_back(dir + "/seed" + std::to_string(seed) + ".csim");
      written.push_back(dir + "/seed" + std::to_string(seed) + ".history.csv");
    }
    written.push_back(dir + "/report.csv");
    written.push_back(dir + "/per_step.csv");
    for (const auto& r : reports) {
      if (r.scenario == "all") say(log, v + ": test NMSE " + fmt_double(r.nmse_inc_db) + " dB (increments)");
    }
  }
  return written;
}

std::vector<std::string> cmd_ablate(const ExperimentConfig& base, const Logger& log) {
  ExperimentConfig cfg = base;
  cfg.variants = ablation_variant_names();
  cfg.validate();
  auto train_set = build_training_set(cfg, TrajectorySource::kFiles);
  const auto tests = build_test_sets(cfg, train_set.normalizer, TrajectorySource::kFiles);
  ensure_dir(cfg.out_dir);
  const auto path = cfg.out_dir + "/ablation.csv";
  auto out = open_out(path);
  out << "variant,params,gflops,nmse_inc_db_mean,nmse_inc_db_std,nmse_chan_db_mean,nmse_chan_db_std\n";
  out.flush();
  std::vector<std::string> written = {path};
  for (const auto& v : cfg.variants) {
    auto trained = train_variant(cfg, train_set, v, true, log);
    const auto reports = evaluate_variant(cfg, trained, tests);
    write_reports(run_dir(cfg, v), reports);
    const auto& all = reports.back();
    char line[512];
    std::snprintf(line, sizeof line, "%s,%zu,%.6f,%.6f,%s,%.6f,%s\n", v.c_str(), all.params, all.gflops,
                  all.nmse_inc_db, all.nmse_inc_db_std ? fmt_double(*all.nmse_inc_db_std).c_str() : "",
                  all.nmse_chan_db, all.nmse_chan_db_std ? fmt_double(*all.nmse_chan_db_std).c_str() : "");
    out << line;
    out.flush();
    say(log, v + ": " + fmt_double(all.nmse_inc_db) + " dB, " + std::to_string(all.params) + " params");
  }
  return written;
}

std::vector<std::string> cmd_bench(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const auto path = cfg.out_dir + "/bench.csv";
  auto out = open_out(path);
  write_report_header(out);
  for (const auto& v : cfg.variants) {
    Model<double> model(variant_by_name(v), cfg.dims(), cfg.train.seed);
    const auto ckpt = run_dir(cfg, v) + "/seed" + std::to_string(cfg.train.seed) + ".csim";
    std::string source = "init";
    if (fs::exists(ckpt)) {
      load_checkpoint_into(ckpt, model);
      source = std::to_string(cfg.train.seed);
    }
    const double sps = throughput_bench(model.cast<float>(), cfg.bench);
    EvalReport r;
    r.variant = v;
    r.scenario = "bench";
    r.params = param_count(model);
    r.gflops = gflops_per_sample(model.spec(), model.dims());
    r.throughput_sps = sps;
    char line[512];
    std::snprintf(line, sizeof line, "%s,%s,%s,nan,nan,%zu,%.6f,%.2f\n", v.c_str(), r.scenario.c_str(),
                  source.c_str(), r.params, r.gflops, r.throughput_sps);
    out << line;
    say(log, v + ": " + std::to_string(r.params) + " params, " + fmt_double(r.gflops) + " GFLOPs, " +
                 fmt_double(sps) + " samples/s");
  }
  return {path};
}

std::string cmd_report(const ExperimentConfig& cfg, const Logger& log) {
  const auto runs = cfg.out_dir + "/runs";
  if (!fs::exists(runs)) throw IoError("no runs under '" + runs + "'; run `csip train` first");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(runs))
    if (e.is_directory() && fs::exists(e.path() / "report.csv")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  auto merged = open_out(cfg.out_dir + "/report.csv");
  write_report_header(merged);
  // variant -> scenario -> (mean, std)
  std::map<std::string, std::map<std::string, std::pair<std::string, std::string>>> table;
  std::map<std::string, std::string> params;
  std::vector<std::string> scenarios;
  for (const auto& d : dirs) {
    std::ifstream in(d / "report.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      merged << line << '\n';
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      if (f.size() != 8) throw IoError("malformed report row in " + (d / "report.csv").string());
      if (std::find(scenarios.begin(), scenarios.end(), f[1]) == scenarios.end()) scenarios.push_back(f[1]);
      params[f[0]] = f[5];
      if (f[2] == "mean") table[f[0]][f[1]].first = f[3];
      if (f[2] == "std") table[f[0]][f[1]].second = f[3];
    }
  }
  std::ostringstream text;
  auto summary = open_out(cfg.out_dir + "/summary.csv");
  summary << "variant,scenario,params,nmse_inc_db_mean,nmse_inc_db_std\n";
  text << "variant";
  for (const auto& s : scenarios) text << " | " << s;
  text << " | params\n";
  for (const auto& [variant, row] : table) {
    text << variant;
    for (const auto& s : scenarios) {
      auto it = row.find(s);
      if (it == row.end()) {
        text << " | -";
        continue;
      }
      const auto& [mean, sd] = it->second;
      text << " | " << mean << (sd.empty() ? "" : " +- " + sd);
      summary << variant << ',' << s << ',' << params[variant] << ',' << mean << ',' << sd << '\n';
    }
    text << " | " << params[variant] << '\n';
  }
  say(log, "merged " + std::to_string(dirs.size()) + " run reports");
  return text.str();
}

}  // namespace csip
