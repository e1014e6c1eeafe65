#include "csip/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "csip/binary_io.hpp"
#include "csip/error.hpp"

namespace csip {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("train: lr and weight_decay must be >= 0");
  if (batch == 0 || max_epochs == 0 || patience == 0) {
    throw ConfigError("train: batch, max_epochs and patience must be positive");
  }
  if (patience > max_epochs) throw ConfigError("train: patience must not exceed max_epochs");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw ConfigError("train: invalid optimizer moments");
  }
  if (clip && !(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
}

template <typename T>
Tensor<T> weighted_mse(const Tensor<T>& pred, const Tensor<T>& target, std::span<const double> w) {
  if (pred.shape() != target.shape() || pred.rank() != 3) {
    throw DimensionError("weighted_mse: shapes " + shape_str(pred.shape()) + " and " +
                         shape_str(target.shape()) + " must match as [B, N_L, C]");
  }
  const auto bs = pred.dim(0), n_l = pred.dim(1), c = pred.dim(2);
  if (w.size() != n_l) throw DimensionError("weighted_mse: need one weight per horizon step");
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  const double norm = 1.0 / (static_cast<double>(bs) * static_cast<double>(c) * wsum);
  auto pv = pred.data(), tv = target.data();
  double total = 0.0;
  for (std::size_t b = 0; b < bs; ++b)
    for (std::size_t k = 0; k < n_l; ++k)
      for (std::size_t j = 0; j < c; ++j) {
        const auto i = (b * n_l + k) * c + j;
        const double e = static_cast<double>(pv[i]) - static_cast<double>(tv[i]);
        total += w[k] * e * e;
      }
  std::vector<double> weights(w.begin(), w.end());
  return make_result<T>({1}, {static_cast<T>(total * norm)}, {pred, target},
                        [weights, norm, n_l, c](Node<T>& self) {
                          auto& pp = *self.parents[0];
                          auto& pt = *self.parents[1];
                          const double g = self.grad[0];
                          for (std::size_t i = 0; i < pp.value.size(); ++i) {
                            const auto k = (i / c) % n_l;
                            const double d = 2.0 * g * norm * weights[k] *
                                             (static_cast<double>(pp.value[i]) - static_cast<double>(pt.value[i]));
                            if (pp.requires_grad) pp.ensure_grad()[i] += static_cast<T>(d);
                            if (pt.requires_grad) pt.ensure_grad()[i] -= static_cast<T>(d);
                          }
                        });
}

template Tensor<float> weighted_mse(const Tensor<float>&, const Tensor<float>&, std::span<const double>);
template Tensor<double> weighted_mse(const Tensor<double>&, const Tensor<double>&, std::span<const double>);

bool EarlyStopper::update(double loss) {
  improved_last_ = loss < best_;
  if (improved_last_) {
    best_ = loss;
    best_epoch_ = seen_;
    since_ = 0;
  } else {
    ++since_;
  }
  ++seen_;
  return since_ >= patience_;
}

AdamW::AdamW(const ParamStore<double>& params, const TrainConfig& cfg)
    : lr_(cfg.lr), wd_(cfg.weight_decay), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps) {
  for (const auto& [name, t] : params) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void AdamW::step(ParamStore<double>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double decay = 1.0 - lr_ * wd_;
  std::size_t k = 0;
  for (auto& [name, t] : params) {
    auto values = t.mutable_data();
    const bool has = t.has_grad();
    auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      values[i] *= decay;
      values[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
    ++k;
  }
}

double clip_grad_norm(ParamStore<double>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params)
    if (t.has_grad())
      for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& [name, t] : params)
      if (t.has_grad())
        for (double& g : t.mutable_grad()) g *= scale;
  }
  return norm;
}

double evaluate_loss(const Model<double>& model, const WindowSet& ws, Split split, std::size_t batch) {
  const auto idx = ws.indices(split);
  if (idx.empty()) throw ConfigError(std::string("evaluate_loss: no ") + split_name(split) + " windows");
  const auto w = loss_weights(ws.n_l);
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    std::span<const std::size_t> chunk(idx.data() + s, std::min(batch, idx.size() - s));
    auto pred = model.forward(gather_inputs<double>(ws, chunk), false);
    total += weighted_mse(pred, gather_targets<double>(ws, chunk), w).item() * chunk.size();
  }
  return total / static_cast<double>(idx.size());
}

// Friend of the optimizer and stopper for state persistence.
struct TrainStateAccess {
  static void write(std::ostream& out, const Model<double>& current, const Model<double>& best,
                    const AdamW& opt, const EarlyStopper& stop, const std::mt19937_64& rng,
                    const TrainHistory& history) {
    std::ostringstream rng_text;
    rng_text << rng;
    out << "CSIR1 " << history.epochs.size() << ' ' << opt.t_ << ' ' << stop.since_ << ' '
        << stop.best_epoch_ << ' ' << stop.seen_ << ' ' << (stop.improved_last_ ? 1 : 0) << '\n'
        << rng_text.str() << '\n';
    io::put_f64(out, history.initial_val_loss);
    io::put_f64(out, stop.best_);
    for (const auto& e : history.epochs) {
      io::put_f64(out, e.train_loss);
      io::put_f64(out, e.val_loss);
      io::put_f64(out, e.seconds);
    }
    auto dump = [&](const Model<double>& m) {
      for (const auto& [name, t] : m.params())
        for (double v : t.data()) io::put_f64(out, v);
    };
    dump(current);
    dump(best);
    for (const auto& block : opt.m_)
      for (double v : block) io::put_f64(out, v);
    for (const auto& block : opt.v_)
      for (double v : block) io::put_f64(out, v);
    if (!out) throw IoError("failed writing training state");
  }

  static void read(std::istream& in, Model<double>& current, Model<double>& best, AdamW& opt,
                   EarlyStopper& stop, std::mt19937_64& rng, TrainHistory& history) {
    std::istringstream header(io::get_line(in));
    std::string magic;
    std::size_t epochs = 0;
    int improved = 0;
    header >> magic >> epochs >> opt.t_ >> stop.since_ >> stop.best_epoch_ >> stop.seen_ >> improved;
    if (!header || magic != "CSIR1") throw IoError("not a CSIR1 training state");
    stop.improved_last_ = improved != 0;
    std::istringstream rng_text(io::get_line(in));
    rng_text >> rng;
    if (!rng_text) throw IoError("CSIR1: malformed rng state");
    history.initial_val_loss = io::get_f64(in);
    stop.best_ = io::get_f64(in);
    history.epochs.resize(epochs);
    for (std::size_t i = 0; i < epochs; ++i) {
      auto& e = history.epochs[i];
      e.epoch = i;
      e.train_loss = io::get_f64(in);
      e.val_loss = io::get_f64(in);
      e.seconds = io::get_f64(in);
    }
    auto load = [&](Model<double>& m) {
      for (auto& [name, t] : m.params())
        for (double& v : t.mutable_data()) v = io::get_f64(in);
    };
    load(current);
    load(best);
    for (auto& block : opt.m_)
      for (double& v : block) v = io::get_f64(in);
    for (auto& block : opt.v_)
      for (double& v : block) v = io::get_f64(in);
    history.best_epoch = stop.best_epoch_;
    history.best_val_loss = stop.best_;
  }
};

namespace {

Model<double> with_dropout(const Model<double>& src, double rate) {
  ModelDims dims = src.dims();
  dims.dropout = rate;
  Model<double> out(src.spec(), dims, 0);
  auto it = src.params().begin();
  for (auto& [name, t] : out.params()) {
    std::copy(it->second.data().begin(), it->second.data().end(), t.mutable_data().begin());
    ++it;
  }
  return out;
}

void copy_values(const Model<double>& from, Model<double>& to) {
  auto it = from.params().begin();
  for (auto& [name, t] : to.params()) {
    std::copy(it->second.data().begin(), it->second.data().end(), t.mutable_data().begin());
    ++it;
  }
}

}  // namespace

TrainResult train(const Model<double>& init, const WindowSet& ws, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  if (!ws.normalized) throw ContractError("train: window set must be normalized");
  if (ws.n_p != init.dims().n_p || ws.n_l != init.dims().n_l || ws.features != init.dims().features ||
      ws.channels != init.dims().channels) {
    throw DimensionError("train: window set dims do not match the model");
  }
  auto train_idx = ws.indices(Split::kTrain);
  if (train_idx.empty() || ws.count(Split::kVal) == 0) {
    throw ConfigError("train: window set needs train and val windows");
  }

  Model<double> model = with_dropout(init, cfg.dropout);
  Model<double> best = with_dropout(init, cfg.dropout);
  AdamW opt(model.params(), cfg);
  EarlyStopper stopper(cfg.patience);
  std::mt19937_64 rng(cfg.seed);
  TrainHistory history;
  const auto weights = loss_weights(ws.n_l);

  bool resumed = false;
  if (options.resume && !options.state_path.empty() && std::filesystem::exists(options.state_path)) {
    std::ifstream in(options.state_path, std::ios::binary);
    TrainStateAccess::read(in, model, best, opt, stopper, rng, history);
    resumed = true;
  }
  if (!resumed) {
    history.initial_val_loss = evaluate_loss(model, ws, Split::kVal, cfg.batch);
  }

  std::size_t ran_this_call = 0;
  bool halted = !history.epochs.empty() && stopper.since_improvement() >= cfg.patience;
  while (!halted && history.epochs.size() < cfg.max_epochs) {
    if (options.stop_after && ran_this_call >= options.stop_after) break;
    const auto t0 = std::chrono::steady_clock::now();
    // Restart from sorted order so the permutation depends only on rng state,
    // which is what the resume file captures.
    std::sort(train_idx.begin(), train_idx.end());
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double train_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t s = 0; s < train_idx.size(); s += cfg.batch, ++batch_index) {
      std::span<const std::size_t> chunk(train_idx.data() + s, std::min(cfg.batch, train_idx.size() - s));
      model.params().zero_grad();
      const std::string where =
          "epoch " + std::to_string(history.epochs.size()) + ", batch " + std::to_string(batch_index);
      Tensor<double> loss;
      try {
        auto pred = model.forward(gather_inputs<double>(ws, chunk), true, &rng);
        loss = weighted_mse(pred, gather_targets<double>(ws, chunk), weights);
      } catch (const NumericError& e) {
        throw NumericError("train: " + std::string(e.what()) + " at " + where);
      }
      if (!std::isfinite(loss.item())) throw NumericError("train: non-finite loss at " + where);
      loss.backward();
      if (cfg.clip) clip_grad_norm(model.params(), cfg.clip_norm);
      opt.step(model.params());
      train_total += loss.item() * chunk.size();
    }
    model.params().zero_grad();

    EpochRecord rec;
    rec.epoch = history.epochs.size();
    rec.train_loss = train_total / static_cast<double>(train_idx.size());
    rec.val_loss = evaluate_loss(model, ws, Split::kVal, cfg.batch);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(rec.epoch));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);
    halted = stopper.update(rec.val_loss);
    if (stopper.improved_last()) copy_values(model, best);
    history.best_epoch = stopper.best_epoch();
    history.best_val_loss = stopper.best();
    ++ran_this_call;
    if (!options.state_path.empty()) {
      std::ofstream out(options.state_path, std::ios::binary);
      if (!out) throw IoError("cannot write training state '" + options.state_path + "'");
      TrainStateAccess::write(out, model, best, opt, stopper, rng, history);
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  history.stopped_early = halted && history.epochs.size() < cfg.max_epochs;
  return {std::move(best), std::move(history)};
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,train_loss,val_loss,seconds\n";
  char line[160];
  for (const auto& e : history.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.4f\n", e.epoch, e.train_loss, e.val_loss, e.seconds);
    out << line;
  }
}

}  // namespace csip
