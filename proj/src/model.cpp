#include "csip/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csip/binary_io.hpp"
#include "csip/error.hpp"

namespace csip {

namespace {

const char* kGruGates[] = {"z", "r", "h"};
const char* kLstmGates[] = {"i", "f", "g", "o"};

std::string layer_prefix(std::size_t layer) { return "enc." + std::to_string(layer) + "."; }

template <typename T>
Tensor<T> concat_params(const ParamStore<T>& p, const std::string& prefix, const char* kind,
                        std::initializer_list<const char*> gates) {
  std::vector<Tensor<T>> parts;
  for (const char* g : gates) parts.push_back(p.get(prefix + kind + g));
  return concat_lastaxis(parts);
}

template <typename T>
Tensor<T> project_sequence(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const auto bs = x.dim(0), n = x.dim(1), in = x.dim(2);
  auto flat = reshape(x, {bs * n, in});
  auto y = add_bias(matmul(flat, w), b);
  return reshape(y, {bs, n, w.dim(1)});
}

}  // namespace

const char* to_string(EncoderKind k) { return k == EncoderKind::kGru ? "gru" : "lstm"; }
const char* to_string(FusionKind k) {
  switch (k) {
    case FusionKind::kNone: return "none";
    case FusionKind::kLinear: return "linear";
    case FusionKind::kGated: return "gated";
  }
  return "?";
}
const char* to_string(HeadKind k) { return k == HeadKind::kDense ? "dense" : "dslh"; }

EncoderKind parse_encoder(const std::string& s) {
  if (s == "gru") return EncoderKind::kGru;
  if (s == "lstm") return EncoderKind::kLstm;
  throw ConfigError("unknown encoder '" + s + "'");
}
FusionKind parse_fusion(const std::string& s) {
  if (s == "none") return FusionKind::kNone;
  if (s == "linear") return FusionKind::kLinear;
  if (s == "gated") return FusionKind::kGated;
  throw ConfigError("unknown fusion '" + s + "'");
}
HeadKind parse_head(const std::string& s) {
  if (s == "dense") return HeadKind::kDense;
  if (s == "dslh") return HeadKind::kDslh;
  throw ConfigError("unknown head '" + s + "'");
}

void ModelDims::validate() const {
  if (d == 0 || layers == 0 || n_p == 0 || n_l == 0 || channels == 0 || reduction == 0) {
    throw ConfigError("model dims must all be positive");
  }
  if (features != channels + 1) throw ConfigError("model dims: D must equal C + 1");
  if (d % reduction != 0) {
    throw ConfigError("model dims: d = " + std::to_string(d) + " is not divisible by r = " +
                      std::to_string(reduction));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model dims: dropout must be in [0, 1)");
}

void VariantSpec::validate() const {
  if (fusion != FusionKind::kNone && !attention) {
    throw ConfigError("variant '" + name + "': fusion requires attention");
  }
}

const std::vector<VariantSpec>& registered_variants() {
  using E = EncoderKind;
  using F = FusionKind;
  using H = HeadKind;
  // The "+Attn" rows without gating use per-step linear fusion of [h; c].
  static const std::vector<VariantSpec> variants = {
      {"gru-dense", E::kGru, false, F::kNone, H::kDense, true},
      {"gru-dslh", E::kGru, false, F::kNone, H::kDslh, true},
      {"gru-attn-dense", E::kGru, true, F::kLinear, H::kDense, true},
      {"gru-attn-gated-dense", E::kGru, true, F::kGated, H::kDense, true},
      {"gru-attn-dslh", E::kGru, true, F::kLinear, H::kDslh, true},
      {"proposed", E::kGru, true, F::kGated, H::kDslh, true},
      {"proposed-nospeed", E::kGru, true, F::kGated, H::kDslh, false},
      {"lstm-dslh", E::kLstm, false, F::kNone, H::kDslh, true},
  };
  return variants;
}

VariantSpec variant_by_name(const std::string& name) {
  for (const auto& v : registered_variants())
    if (v.name == name) return v;
  throw ConfigError("unknown variant '" + name + "'");
}

std::vector<std::string> ablation_variant_names() {
  return {"gru-dense",    "gru-dslh", "gru-attn-dense",  "gru-attn-gated-dense",
          "gru-attn-dslh", "proposed", "proposed-nospeed"};
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
bool ParamStore<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

template <typename T>
std::size_t ParamStore<T>::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template <typename T>
Tensor<T> gru_layer(const Tensor<T>& x, const ParamStore<T>& p, const std::string& prefix) {
  if (x.rank() != 3) throw DimensionError("gru_layer: input must be [B, N, in], got " + shape_str(x.shape()));
  const auto& wz = p.get(prefix + "W_z");
  if (wz.dim(0) != x.dim(2)) {
    throw DimensionError("gru_layer: input width " + std::to_string(x.dim(2)) +
                         " does not match W_z " + shape_str(wz.shape()));
  }
  const auto bs = x.dim(0), n = x.dim(1), d = wz.dim(1);

  auto xw = project_sequence(x, concat_params(p, prefix, "W_", {"z", "r", "h"}),
                             concat_params(p, prefix, "bx_", {"z", "r", "h"}));
  auto u_zr = concat_params(p, prefix, "U_", {"z", "r"});
  auto b_zr = concat_params(p, prefix, "bh_", {"z", "r"});
  const auto& u_h = p.get(prefix + "U_h");
  const auto& b_h = p.get(prefix + "bh_h");

  auto h = Tensor<T>::zeros({bs, d});
  std::vector<Tensor<T>> states;
  states.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto xt = select_axis1(xw, t);
    auto hzr = add_bias(matmul(h, u_zr), b_zr);
    auto z = sigmoid(add(slice_lastaxis(xt, 0, d), slice_lastaxis(hzr, 0, d)));
    auto r = sigmoid(add(slice_lastaxis(xt, d, d), slice_lastaxis(hzr, d, d)));
    auto cand = tanh(add(slice_lastaxis(xt, 2 * d, d), add_bias(matmul(mul(r, h), u_h), b_h)));
    // (1 - z) * h + z * cand
    h = add(h, mul(z, sub(cand, h)));
    states.push_back(h);
  }
  return stack_axis1(states);
}

template <typename T>
Tensor<T> lstm_layer(const Tensor<T>& x, const ParamStore<T>& p, const std::string& prefix) {
  if (x.rank() != 3) throw DimensionError("lstm_layer: input must be [B, N, in], got " + shape_str(x.shape()));
  const auto& wi = p.get(prefix + "W_i");
  if (wi.dim(0) != x.dim(2)) {
    throw DimensionError("lstm_layer: input width " + std::to_string(x.dim(2)) +
                         " does not match W_i " + shape_str(wi.shape()));
  }
  const auto bs = x.dim(0), n = x.dim(1), d = wi.dim(1);

  auto xw = project_sequence(x, concat_params(p, prefix, "W_", {"i", "f", "g", "o"}),
                             concat_params(p, prefix, "bx_", {"i", "f", "g", "o"}));
  auto u = concat_params(p, prefix, "U_", {"i", "f", "g", "o"});
  auto bh = concat_params(p, prefix, "bh_", {"i", "f", "g", "o"});

  auto h = Tensor<T>::zeros({bs, d});
  auto c = Tensor<T>::zeros({bs, d});
  std::vector<Tensor<T>> states;
  states.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto pre = add(select_axis1(xw, t), add_bias(matmul(h, u), bh));
    auto i = sigmoid(slice_lastaxis(pre, 0, d));
    auto f = sigmoid(slice_lastaxis(pre, d, d));
    auto g = tanh(slice_lastaxis(pre, 2 * d, d));
    auto o = sigmoid(slice_lastaxis(pre, 3 * d, d));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    states.push_back(h);
  }
  return stack_axis1(states);
}

template <typename T>
AttentionResult<T> attention(const Tensor<T>& encoded) {
  if (encoded.rank() != 3) throw DimensionError("attention: expected [B, N, d], got " + shape_str(encoded.shape()));
  const auto bs = encoded.dim(0), n = encoded.dim(1), d = encoded.dim(2);
  auto query = reshape(select_axis1(encoded, n - 1), {bs, d, 1});
  auto scores = affine(reshape(bmm(encoded, query), {bs, n}),
                       T(1) / std::sqrt(static_cast<T>(d)), T(0));
  auto weights = softmax_lastaxis(scores);
  auto context = reshape(bmm(reshape(weights, {bs, 1, n}), encoded), {bs, d});
  return {weights, context};
}

template <typename T>
Tensor<T> gated_fusion(const Tensor<T>& encoded, const Tensor<T>& context, const Tensor<T>& w1,
                       const Tensor<T>& b1, const Tensor<T>& w2, const Tensor<T>& b2) {
  const auto bs = encoded.dim(0), n = encoded.dim(1), d = encoded.dim(2);
  if (context.shape() != Shape{bs, d}) throw DimensionError("gated_fusion: context shape mismatch");
  auto ctx = repeat_axis1(context, n);
  auto u = reshape(concat_lastaxis<T>({encoded, ctx}), {bs * n, 2 * d});
  auto hidden = relu(add_bias(matmul(u, w1), b1));
  auto gate = reshape(sigmoid(add_bias(matmul(hidden, w2), b2)), {bs, n, d});
  // g * h + (1 - g) * c
  return add(ctx, mul(gate, sub(encoded, ctx)));
}

template <typename T>
Tensor<T> linear_fusion(const Tensor<T>& encoded, const Tensor<T>& context, const Tensor<T>& w,
                        const Tensor<T>& b) {
  const auto bs = encoded.dim(0), n = encoded.dim(1), d = encoded.dim(2);
  if (context.shape() != Shape{bs, d}) throw DimensionError("linear_fusion: context shape mismatch");
  auto u = concat_lastaxis<T>({encoded, repeat_axis1(context, n)});
  return project_sequence(u, w, b);
}

template <typename T>
Tensor<T> dslh(const Tensor<T>& refined, const Tensor<T>& w_time, const Tensor<T>& b_time,
               const Tensor<T>& w_ch, const Tensor<T>& b_ch, std::size_t channels) {
  if (refined.rank() != 3 || w_time.rank() != 2 || w_ch.rank() != 2 ||
      refined.dim(1) != w_time.dim(0) || refined.dim(2) != w_ch.dim(0) || w_ch.dim(1) != channels) {
    throw DimensionError("dslh: incompatible shapes " + shape_str(refined.shape()) + ", W_time " +
                         shape_str(w_time.shape()) + ", W_ch " + shape_str(w_ch.shape()));
  }
  const auto bs = refined.dim(0), d = refined.dim(2);
  const auto n_l = w_time.dim(1);
  // Time projection: mix the N_P positions of every feature column.
  auto steps = reshape(project_axis1(refined, w_time, b_time), {bs * n_l, d});
  // Channel projection per future step.
  auto y = add_bias(matmul(steps, w_ch), b_ch);
  return reshape(y, {bs, n_l, channels});
}

template <typename T>
Tensor<T> dense_head(const Tensor<T>& refined, const Tensor<T>& w, const Tensor<T>& b,
                     std::size_t n_l, std::size_t channels) {
  if (refined.rank() != 3 || w.rank() != 2 || w.dim(0) != refined.dim(1) * refined.dim(2) ||
      w.dim(1) != n_l * channels) {
    throw DimensionError("dense_head: incompatible shapes " + shape_str(refined.shape()) + ", W " +
                         shape_str(w.shape()));
  }
  const auto bs = refined.dim(0);
  auto flat = reshape(refined, {bs, refined.dim(1) * refined.dim(2)});
  return reshape(add_bias(matmul(flat, w), b), {bs, n_l, channels});
}

std::vector<ParamLayout> parameter_layout(const VariantSpec& spec, const ModelDims& dims) {
  spec.validate();
  dims.validate();
  std::vector<ParamLayout> out;
  const auto d = dims.d;
  std::size_t in = spec.use_speed ? dims.features : dims.features - 1;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    const auto prefix = layer_prefix(l);
    const bool gru = spec.encoder == EncoderKind::kGru;
    std::vector<const char*> gates = gru ? std::vector<const char*>(std::begin(kGruGates), std::end(kGruGates))
                                         : std::vector<const char*>(std::begin(kLstmGates), std::end(kLstmGates));
    for (const char* g : gates) out.push_back({prefix + "W_" + g, {in, d}, false});
    for (const char* g : gates) out.push_back({prefix + "U_" + g, {d, d}, false});
    for (const char* g : gates) out.push_back({prefix + "bx_" + g, {d}, true});
    for (const char* g : gates) out.push_back({prefix + "bh_" + g, {d}, true});
    in = d;
  }
  if (spec.fusion == FusionKind::kGated) {
    const auto mid = d / dims.reduction;
    out.push_back({"fusion.W_1", {2 * d, mid}, false});
    out.push_back({"fusion.b_1", {mid}, true});
    out.push_back({"fusion.W_2", {mid, d}, false});
    out.push_back({"fusion.b_2", {d}, true});
  } else if (spec.fusion == FusionKind::kLinear) {
    out.push_back({"fusion.W", {2 * d, d}, false});
    out.push_back({"fusion.b", {d}, true});
  }
  if (spec.head == HeadKind::kDslh) {
    out.push_back({"head.W_time", {dims.n_p, dims.n_l}, false});
    out.push_back({"head.b_time", {dims.n_l}, true});
    out.push_back({"head.W_ch", {d, dims.channels}, false});
    out.push_back({"head.b_ch", {dims.channels}, true});
  } else {
    out.push_back({"head.W", {dims.n_p * d, dims.n_l * dims.channels}, false});
    out.push_back({"head.b", {dims.n_l * dims.channels}, true});
  }
  return out;
}

std::size_t param_count(const VariantSpec& spec, const ModelDims& dims) {
  std::size_t n = 0;
  for (const auto& p : parameter_layout(spec, dims)) n += shape_numel(p.shape);
  return n;
}

std::uint64_t flops_estimate(const VariantSpec& spec, const ModelDims& dims, std::size_t batch) {
  spec.validate();
  dims.validate();
  const std::uint64_t d = dims.d, n_p = dims.n_p, n_l = dims.n_l, c = dims.channels;
  const std::uint64_t gates = spec.encoder == EncoderKind::kGru ? 3 : 4;
  std::uint64_t in = spec.use_speed ? dims.features : dims.features - 1;
  std::uint64_t macs = 0;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    macs += n_p * gates * (d * in + d * d);
    in = d;
  }
  if (spec.attention) macs += 2 * n_p * d;
  if (spec.fusion == FusionKind::kGated) macs += n_p * 3 * d * (d / dims.reduction);
  if (spec.fusion == FusionKind::kLinear) macs += n_p * 2 * d * d;
  if (spec.head == HeadKind::kDslh) {
    macs += n_p * n_l * d + n_l * d * c;
  } else {
    macs += n_p * d * n_l * c;
  }
  return macs * batch;
}

double gflops_per_sample(const VariantSpec& spec, const ModelDims& dims) {
  return 2.0 * static_cast<double>(flops_estimate(spec, dims, 1)) * 1e-9;
}

template <typename T>
Model<T>::Model(VariantSpec spec, ModelDims dims, std::uint64_t init_seed)
    : spec_(std::move(spec)), dims_(dims) {
  std::mt19937_64 rng(init_seed);
  for (auto& layout : parameter_layout(spec_, dims_)) {
    auto t = Tensor<T>::zeros(layout.shape, true);
    if (!layout.bias) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layout.shape[0]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
    }
    params_.add(std::move(layout.name), std::move(t));
  }
}

template <typename T>
Tensor<T> Model<T>::encode(const Tensor<T>& x, bool training, std::mt19937_64* rng) const {
  if (x.rank() != 3 || x.dim(1) != dims_.n_p) {
    throw DimensionError("forward: expected input [B, " + std::to_string(dims_.n_p) + ", D], got " +
                         shape_str(x.shape()));
  }
  Tensor<T> seq = x;
  if (!spec_.use_speed && x.dim(2) == dims_.features) seq = drop_last_column(x);
  if (seq.dim(2) != input_features()) {
    throw DimensionError("forward: input width " + std::to_string(x.dim(2)) + " does not match " +
                         std::to_string(input_features()));
  }
  if (training && dims_.dropout > 0.0 && rng == nullptr) {
    throw ContractError("forward: training with dropout needs an rng");
  }
  for (std::size_t l = 0; l < dims_.layers; ++l) {
    if (l > 0 && training && dims_.dropout > 0.0) seq = dropout(seq, static_cast<T>(dims_.dropout), *rng);
    seq = spec_.encoder == EncoderKind::kGru ? gru_layer(seq, params_, layer_prefix(l))
                                             : lstm_layer(seq, params_, layer_prefix(l));
  }
  return seq;
}

template <typename T>
Tensor<T> Model<T>::refine(const Tensor<T>& encoded) const {
  if (!spec_.attention) return encoded;
  auto att = attention(encoded);
  switch (spec_.fusion) {
    case FusionKind::kNone:
      return encoded;
    case FusionKind::kLinear:
      return linear_fusion(encoded, att.context, params_.get("fusion.W"), params_.get("fusion.b"));
    case FusionKind::kGated:
      return gated_fusion(encoded, att.context, params_.get("fusion.W_1"), params_.get("fusion.b_1"),
                          params_.get("fusion.W_2"), params_.get("fusion.b_2"));
  }
  return encoded;
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, bool training, std::mt19937_64* rng) const {
  auto refined = refine(encode(x, training, rng));
  if (training && dims_.dropout > 0.0) refined = dropout(refined, static_cast<T>(dims_.dropout), *rng);
  if (spec_.head == HeadKind::kDslh) {
    return dslh(refined, params_.get("head.W_time"), params_.get("head.b_time"),
                params_.get("head.W_ch"), params_.get("head.b_ch"), dims_.channels);
  }
  return dense_head(refined, params_.get("head.W"), params_.get("head.b"), dims_.n_l, dims_.channels);
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  ParamStore<U> converted;
  for (const auto& [name, t] : params_) {
    std::vector<U> values(t.data().begin(), t.data().end());
    converted.add(name, Tensor<U>::from(t.shape(), std::move(values), true));
  }
  return Model<U>(spec_, dims_, std::move(converted));
}

template <typename T>
void Model<T>::load_values(const Model<T>& other) {
  if (!(other.spec_ == spec_) || !(other.dims_ == dims_)) {
    throw ConfigError("load_values: variant or dims differ");
  }
  auto it = other.params_.begin();
  for (auto& [name, t] : params_) {
    std::copy(it->second.data().begin(), it->second.data().end(), t.mutable_data().begin());
    ++it;
  }
}

void write_checkpoint(std::ostream& out, const Model<double>& model) {
  const auto& s = model.spec();
  const auto& d = model.dims();
  char dropout[64];
  std::snprintf(dropout, sizeof dropout, "%.17g", d.dropout);
  out << "CSIM1 " << s.name << ' ' << to_string(s.encoder) << ' ' << (s.attention ? 1 : 0) << ' '
      << to_string(s.fusion) << ' ' << to_string(s.head) << ' ' << (s.use_speed ? 1 : 0) << ' '
      << d.d << ' ' << d.layers << ' ' << d.n_p << ' ' << d.n_l << ' ' << d.features << ' '
      << d.channels << ' ' << d.reduction << ' ' << dropout << ' ' << model.params().size() << '\n';
  for (const auto& [name, t] : model.params()) {
    io::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) io::put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.data()) io::put_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Model<double> read_checkpoint(std::istream& in) {
  std::istringstream header(io::get_line(in));
  std::string magic, encoder, fusion, head;
  VariantSpec spec;
  ModelDims dims;
  int attention = 0, use_speed = 0;
  std::size_t count = 0;
  header >> magic >> spec.name >> encoder >> attention >> fusion >> head >> use_speed >> dims.d >>
      dims.layers >> dims.n_p >> dims.n_l >> dims.features >> dims.channels >> dims.reduction >>
      dims.dropout >> count;
  if (!header || magic != "CSIM1") throw IoError("not a CSIM1 checkpoint header");
  spec.encoder = parse_encoder(encoder);
  spec.attention = attention != 0;
  spec.fusion = parse_fusion(fusion);
  spec.head = parse_head(head);
  spec.use_speed = use_speed != 0;

  Model<double> model(spec, dims, 0);
  if (count != model.params().size()) throw IoError("CSIM1: tensor count does not match variant");
  for (auto& [name, t] : model.params()) {
    const auto len = io::get_u32(in);
    std::string stored(len, '\0');
    if (!in.read(stored.data(), len)) throw IoError("CSIM1: truncated tensor name");
    if (stored != name) throw IoError("CSIM1: expected tensor '" + name + "', found '" + stored + "'");
    const auto rank = io::get_u32(in);
    Shape shape(rank);
    for (auto& e : shape) e = io::get_u32(in);
    if (shape != t.shape()) {
      throw IoError("CSIM1: tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                    shape_str(t.shape()));
    }
    for (auto& v : t.mutable_data()) v = io::get_f32(in);
  }
  return model;
}

void save_checkpoint(const std::string& path, const Model<double>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_checkpoint(out, model);
}

Model<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_checkpoint(in);
}

void load_checkpoint_into(const std::string& path, Model<double>& model) {
  auto loaded = load_checkpoint(path);
  if (!(loaded.dims() == model.dims())) {
    throw ConfigError("checkpoint '" + path + "' has incompatible dims for variant '" +
                      model.spec().name + "'");
  }
  if (!(loaded.spec() == model.spec())) {
    throw ConfigError("checkpoint '" + path + "' holds variant '" + loaded.spec().name +
                      "', expected '" + model.spec().name + "'");
  }
  model.load_values(loaded);
}

#define CSIP_INSTANTIATE(T)                                                                     \
  template class ParamStore<T>;                                                                 \
  template class Model<T>;                                                                      \
  template Tensor<T> gru_layer(const Tensor<T>&, const ParamStore<T>&, const std::string&);     \
  template Tensor<T> lstm_layer(const Tensor<T>&, const ParamStore<T>&, const std::string&);    \
  template AttentionResult<T> attention(const Tensor<T>&);                                      \
  template Tensor<T> gated_fusion(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                  const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> linear_fusion(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&);                                           \
  template Tensor<T> dslh(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                          const Tensor<T>&, const Tensor<T>&, std::size_t);                     \
  template Tensor<T> dense_head(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                std::size_t, std::size_t);

CSIP_INSTANTIATE(float)
CSIP_INSTANTIATE(double)

#undef CSIP_INSTANTIATE

template Model<float> Model<double>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;
template Model<double> Model<float>::cast<double>() const;

}  // namespace csip
