#include "csip/csip.h"

#include <new>
#include <sstream>
#include <string>

#include "csip/error.hpp"
#include "csip/experiment.hpp"
#include "csip/model.hpp"

struct csip_config {
  csip::ExperimentConfig cfg;
};

struct csip_model {
  csip::Model<double> model;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
csip_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CSIP_OK;
  } catch (const csip::DimensionError& e) {
    g_last_error = e.what();
    return CSIP_E_DIMENSION;
  } catch (const csip::ConfigError& e) {
    g_last_error = e.what();
    return CSIP_E_CONFIG;
  } catch (const csip::ContractError& e) {
    g_last_error = e.what();
    return CSIP_E_CONTRACT;
  } catch (const csip::NumericError& e) {
    g_last_error = e.what();
    return CSIP_E_NUMERIC;
  } catch (const csip::IoError& e) {
    g_last_error = e.what();
    return CSIP_E_IO;
  } catch (const csip::MeasurementError& e) {
    g_last_error = e.what();
    return CSIP_E_MEASUREMENT;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return CSIP_E_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CSIP_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CSIP_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

csip::Logger logger(csip_text_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const std::string& s) { fn(s.c_str(), user); };
}

void report_files(const std::vector<std::string>& files, csip_text_fn fn, void* user) {
  if (fn == nullptr) return;
  for (const auto& f : files) fn(f.c_str(), user);
}

}  // namespace

extern "C" {

const char* csip_version(void) { return "1.0.0"; }

const char* csip_last_error(void) { return g_last_error.c_str(); }

const char* csip_status_name(csip_status status) {
  switch (status) {
    case CSIP_OK: return "ok";
    case CSIP_E_DIMENSION: return "dimension error";
    case CSIP_E_CONFIG: return "config error";
    case CSIP_E_CONTRACT: return "contract error";
    case CSIP_E_NUMERIC: return "numeric error";
    case CSIP_E_IO: return "io error";
    case CSIP_E_MEASUREMENT: return "measurement error";
    case CSIP_E_INVALID_ARGUMENT: return "invalid argument";
    case CSIP_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

size_t csip_variant_count(void) { return csip::registered_variants().size(); }

const char* csip_variant_name(size_t index) {
  const auto& v = csip::registered_variants();
  return index < v.size() ? v[index].name.c_str() : nullptr;
}

csip_status csip_config_from_profile(const char* profile, csip_config** out) {
  return guarded([&] {
    require(profile, "profile");
    require(out, "out");
    *out = new csip_config{csip::profile_config(profile)};
  });
}

csip_status csip_config_parse(const char* json, const csip_config* base, csip_config** out) {
  return guarded([&] {
    require(json, "json");
    require(base, "base");
    require(out, "out");
    *out = new csip_config{csip::parse_config(json, base->cfg)};
  });
}

csip_status csip_config_load(const char* path, const csip_config* base, csip_config** out) {
  return guarded([&] {
    require(path, "path");
    require(base, "base");
    require(out, "out");
    *out = new csip_config{csip::load_config(path, base->cfg)};
  });
}

csip_status csip_config_clone(const csip_config* cfg, csip_config** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new csip_config{cfg->cfg};
  });
}

csip_status csip_config_render(const csip_config* cfg, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    const auto text = csip::render_config(cfg->cfg);
    if (needed != nullptr) *needed = text.size() + 1;
    if (buffer == nullptr) return;
    if (capacity < text.size() + 1) throw std::invalid_argument("buffer too small for rendered config");
    text.copy(buffer, text.size());
    buffer[text.size()] = '\0';
  });
}

csip_status csip_config_set_out_dir(csip_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    cfg->cfg.out_dir = out_dir;
  });
}

csip_status csip_config_set_seeds(csip_config* cfg, size_t seeds) {
  return guarded([&] {
    require(cfg, "cfg");
    if (seeds == 0) throw csip::ConfigError("seed count must be positive");
    cfg->cfg.seeds = seeds;
  });
}

csip_status csip_config_set_variants(csip_config* cfg, const char* variants) {
  return guarded([&] {
    require(cfg, "cfg");
    require(variants, "variants");
    std::vector<std::string> names;
    std::stringstream ss(variants);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      csip::variant_by_name(name);
      names.push_back(name);
    }
    if (names.empty()) throw csip::ConfigError("empty variant list");
    cfg->cfg.variants = std::move(names);
  });
}

csip_status csip_config_validate(const csip_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.validate();
  });
}

void csip_config_free(csip_config* cfg) { delete cfg; }

csip_status csip_cmd_generate(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    report_files(csip::cmd_generate(cfg->cfg, logger(log, user)), files, user);
  });
}

csip_status csip_cmd_train(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    report_files(csip::cmd_train(cfg->cfg, logger(log, user)), files, user);
  });
}

csip_status csip_cmd_ablate(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    report_files(csip::cmd_ablate(cfg->cfg, logger(log, user)), files, user);
  });
}

csip_status csip_cmd_bench(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    report_files(csip::cmd_bench(cfg->cfg, logger(log, user)), files, user);
  });
}

csip_status csip_cmd_report(const csip_config* cfg, csip_text_fn log, csip_text_fn summary, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    const auto text = csip::cmd_report(cfg->cfg, logger(log, user));
    if (summary != nullptr) summary(text.c_str(), user);
  });
}

csip_status csip_model_create(const char* variant, const csip_config* cfg, uint64_t init_seed, csip_model** out) {
  return guarded([&] {
    require(variant, "variant");
    require(cfg, "cfg");
    require(out, "out");
    *out = new csip_model{csip::Model<double>(csip::variant_by_name(variant), cfg->cfg.dims(), init_seed)};
  });
}

csip_status csip_model_load(const char* path, csip_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new csip_model{csip::load_checkpoint(path)};
  });
}

csip_status csip_model_save(const csip_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    csip::save_checkpoint(path, model->model);
  });
}

csip_status csip_model_param_count(const csip_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = csip::param_count(model->model);
  });
}

csip_status csip_model_gflops(const csip_model* model, double* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = csip::gflops_per_sample(model->model.spec(), model->model.dims());
  });
}

csip_status csip_model_io_shape(const csip_model* model, size_t* n_p, size_t* d_in, size_t* n_l,
                                size_t* channels) {
  return guarded([&] {
    require(model, "model");
    const auto& d = model->model.dims();
    if (n_p) *n_p = d.n_p;
    if (d_in) *d_in = model->model.input_features();
    if (n_l) *n_l = d.n_l;
    if (channels) *channels = d.channels;
  });
}

csip_status csip_model_predict(const csip_model* model, const double* inputs, size_t batch, double* outputs) {
  return guarded([&] {
    require(model, "model");
    require(inputs, "inputs");
    require(outputs, "outputs");
    if (batch == 0) throw csip::DimensionError("batch must be positive");
    const auto& m = model->model;
    const auto& d = m.dims();
    const std::size_t in_n = batch * d.n_p * m.input_features();
    csip::NoGradGuard ng;
    auto x = csip::Tensor<double>::from({batch, d.n_p, m.input_features()},
                                        std::vector<double>(inputs, inputs + in_n));
    const auto y = m.forward(x, false);
    const auto& v = y.data();
    std::copy(v.begin(), v.end(), outputs);
  });
}

void csip_model_free(csip_model* model) { delete model; }

}  // extern "C"
