#pragma once

// Dense row-major tensors with dynamic reverse-mode differentiation.
//
// Every op executed while gradient recording is enabled links its result to
// its inputs; Tensor::backward() walks that graph in reverse topological order.
// Only bias-add along the last axis broadcasts, every other op requires
// matching shapes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace csip {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until the node takes part in a backward pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad();
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  // Throws NumericError if `data` holds a non-finite value.
  static Tensor from(const Shape& shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  // Writable view, for leaves (parameters, inputs) only.
  std::span<T> mutable_data() { return node_->value; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  // Reverse pass from a one-element tensor. Gradients accumulate.
  void backward() const;

  // Copy of the values without graph history.
  Tensor detach() const;

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Recording switch, per thread. Gradient recording is on by default.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. When recording is enabled and any parent requires a
// gradient, the result keeps `parents` and `backward`; otherwise both are
// dropped. Used by the built-in ops and by ops defined in other modules.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward);

enum class Activation { kSigmoid, kTanh, kRelu };

// 2-D product [m,k] x [k,n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// Batched product [B,m,k] x [B,k,n].
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b);
// Shared left projection over axis 1: [B,m,n], w [m,k], bias [k] -> [B,k,n],
// out_b = w^T x_b + bias broadcast along n.
template <typename T>
Tensor<T> project_axis1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
// x + bias, bias broadcast along the last axis.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
// scale * x + shift.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) { return activation(x, Activation::kSigmoid); }
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) { return activation(x, Activation::kTanh); }
template <typename T>
Tensor<T> relu(const Tensor<T>& x) { return activation(x, Activation::kRelu); }

// Max-subtracted softmax over each last-axis slice.
template <typename T>
Tensor<T> softmax_lastaxis(const Tensor<T>& x);

template <typename T>
Tensor<T> concat_lastaxis(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> slice_lastaxis(const Tensor<T>& x, std::size_t start, std::size_t length);

// [B,N,F] -> [B,F] at position `index` of axis 1.
template <typename T>
Tensor<T> select_axis1(const Tensor<T>& x, std::size_t index);
// N tensors of [B,F] -> [B,N,F].
template <typename T>
Tensor<T> stack_axis1(const std::vector<Tensor<T>>& steps);
// [B,F] -> [B,N,F] by repetition.
template <typename T>
Tensor<T> repeat_axis1(const Tensor<T>& x, std::size_t count);
// [B,m,n] -> [B,n,m].
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);
// [.., F] -> [.., F - 1] with the last column removed.
template <typename T>
Tensor<T> drop_last_column(const Tensor<T>& x);

// Inverted dropout; identity when `rate` is zero.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T rate, std::mt19937_64& rng);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Throws NumericError naming `what` if any value is NaN or infinite.
template <typename T>
void check_finite(const Tensor<T>& x, const std::string& what);

// Largest |autodiff - central difference| / max(1, |central difference|)
// over all coordinates of `x`. `f` must return a one-element tensor.
double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  const Tensor<double>& x, double eps);

}  // namespace csip
