#pragma once

// Predictor architectures: recurrent encoder, optional scaled dot-product
// attention with per-step fusion, and a dense or dimension-wise separable
// output head.
//
// Weight matrices are stored as [in, out] so that a projection is x * W.
// Every recurrent gate carries an input-side and a hidden-side bias; their sum
// plays the role of the single gate bias of the textbook equations.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "csip/tensor.hpp"

namespace csip {

enum class EncoderKind { kGru, kLstm };
enum class FusionKind { kNone, kLinear, kGated };
enum class HeadKind { kDense, kDslh };

const char* to_string(EncoderKind k);
const char* to_string(FusionKind k);
const char* to_string(HeadKind k);
EncoderKind parse_encoder(const std::string& s);
FusionKind parse_fusion(const std::string& s);
HeadKind parse_head(const std::string& s);

struct ModelDims {
  std::size_t d = 32;          // hidden size
  std::size_t layers = 1;      // stacked encoder layers
  std::size_t n_p = 32;        // past window
  std::size_t n_l = 4;         // horizon
  std::size_t features = 9;    // D, including the speed column
  std::size_t channels = 8;    // C
  std::size_t reduction = 4;   // fusion bottleneck ratio r
  double dropout = 0.0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

struct VariantSpec {
  std::string name = "proposed";
  EncoderKind encoder = EncoderKind::kGru;
  bool attention = true;
  FusionKind fusion = FusionKind::kGated;
  HeadKind head = HeadKind::kDslh;
  bool use_speed = true;

  // Throws ConfigError (fusion without attention).
  void validate() const;
  bool operator==(const VariantSpec&) const = default;
};

// Registered variants: the six ablation rows, the speed ablation, and the
// LSTM baseline.
const std::vector<VariantSpec>& registered_variants();
VariantSpec variant_by_name(const std::string& name);
// Ablation sweep order: the six architecture rows then "proposed-nospeed".
std::vector<std::string> ablation_variant_names();

template <typename T>
class ParamStore {
 public:
  void add(std::string name, Tensor<T> t) { entries_.emplace_back(std::move(name), std::move(t)); }
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

// One GRU layer over x [B, N, in]; h_0 = 0. Parameter names under `prefix`:
// W_z W_r W_h [in,d], U_z U_r U_h [d,d], bx_z bx_r bx_h bh_z bh_r bh_h [d].
template <typename T>
Tensor<T> gru_layer(const Tensor<T>& x, const ParamStore<T>& p, const std::string& prefix);

// Standard LSTM layer (gates i, f, g, o; zero initial state). Names as for
// the GRU with gate letters i f g o.
template <typename T>
Tensor<T> lstm_layer(const Tensor<T>& x, const ParamStore<T>& p, const std::string& prefix);

template <typename T>
struct AttentionResult {
  Tensor<T> weights;  // [B, N]
  Tensor<T> context;  // [B, d]
};

// Query = last encoder state; scores h_tau . q / sqrt(d); softmax over tau.
template <typename T>
AttentionResult<T> attention(const Tensor<T>& encoded);

// g = sigmoid(W_2 relu(W_1 [h; c] + b_1) + b_2), out = g*h + (1-g)*c.
// W_1 [2d, d/r], b_1 [d/r], W_2 [d/r, d], b_2 [d].
template <typename T>
Tensor<T> gated_fusion(const Tensor<T>& encoded, const Tensor<T>& context, const Tensor<T>& w1,
                       const Tensor<T>& b1, const Tensor<T>& w2, const Tensor<T>& b2);

// out = [h; c] W + b. W [2d, d], b [d].
template <typename T>
Tensor<T> linear_fusion(const Tensor<T>& encoded, const Tensor<T>& context, const Tensor<T>& w,
                        const Tensor<T>& b);

// Time projection W_time [N_P, N_L] (+ b_time per future step), then channel
// projection W_ch [d, C] (+ b_ch per channel). Returns [B, N_L, C].
template <typename T>
Tensor<T> dslh(const Tensor<T>& refined, const Tensor<T>& w_time, const Tensor<T>& b_time,
               const Tensor<T>& w_ch, const Tensor<T>& b_ch, std::size_t channels);

// Flattens [B, N_P, d] step-major and maps it with W [N_P*d, N_L*C] + b.
template <typename T>
Tensor<T> dense_head(const Tensor<T>& refined, const Tensor<T>& w, const Tensor<T>& b,
                     std::size_t n_l, std::size_t channels);

template <typename T>
class Model {
 public:
  // Weights uniform in +-1/sqrt(fan_in), biases zero, drawn from `init_seed`.
  Model(VariantSpec spec, ModelDims dims, std::uint64_t init_seed);

  const VariantSpec& spec() const { return spec_; }
  const ModelDims& dims() const { return dims_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::size_t input_features() const { return spec_.use_speed ? dims_.features : dims_.features - 1; }

  // x is [B, N_P, D] (or [B, N_P, D-1] for a no-speed variant). Dropout is
  // only active when `training` is set, and then `rng` must be non-null.
  Tensor<T> forward(const Tensor<T>& x, bool training, std::mt19937_64* rng = nullptr) const;

  // Intermediate stages, for inspection.
  Tensor<T> encode(const Tensor<T>& x, bool training, std::mt19937_64* rng) const;
  Tensor<T> refine(const Tensor<T>& encoded) const;

  template <typename U>
  Model<U> cast() const;

  // Copies values from `other` (same spec and dims).
  void load_values(const Model<T>& other);

 private:
  template <typename U>
  friend class Model;
  Model(VariantSpec spec, ModelDims dims, ParamStore<T> params)
      : spec_(std::move(spec)), dims_(dims), params_(std::move(params)) {}

  VariantSpec spec_;
  ModelDims dims_;
  ParamStore<T> params_;
};

struct ParamLayout {
  std::string name;
  Shape shape;
  bool bias = false;
};

// Named parameter shapes of a variant in construction order.
std::vector<ParamLayout> parameter_layout(const VariantSpec& spec, const ModelDims& dims);

// Exact count by enumerating the named parameter tensors of a freshly built
// variant (no weights are materialized).
std::size_t param_count(const VariantSpec& spec, const ModelDims& dims);
template <typename T>
std::size_t param_count(const Model<T>& model) {
  return model.params().numel();
}

// Multiply-accumulates of every matrix product for `batch` samples:
// encoder input and recurrent products at every step and layer, attention
// scores and context, fusion, and head. Activations are not counted.
std::uint64_t flops_estimate(const VariantSpec& spec, const ModelDims& dims, std::size_t batch);
// 2 * MACs per sample, in units of 1e9.
double gflops_per_sample(const VariantSpec& spec, const ModelDims& dims);

// "CSIM1" checkpoint: ASCII header line
//   CSIM1 name encoder attention fusion head use_speed d layers n_p n_l D C r dropout count
// then `count` records of (u32 name length, name bytes, u32 rank, u32
// extents, float32 values), all little-endian.
void write_checkpoint(std::ostream& out, const Model<double>& model);
Model<double> read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Model<double>& model);
Model<double> load_checkpoint(const std::string& path);
// Loads into an existing model; throws ConfigError if spec or dims differ.
void load_checkpoint_into(const std::string& path, Model<double>& model);

}  // namespace csip
