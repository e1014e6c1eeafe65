#include "csip/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "csip/error.hpp"

namespace csip {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

template <typename T>
bool wants_grad(const Node<T>& n) {
  return n.requires_grad;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
std::vector<T>& Node<T>::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), T(0));
  return grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value.assign(shape_numel(shape), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::vector<T> data, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
  }
  for (T v : data) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor data");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  auto node = std::make_shared<Node<T>>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a one-element tensor, got " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; recurrent graphs are thousands of nodes deep.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = std::any_of(parents.begin(), parents.end(),
                           [](const Tensor<T>& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node_ptr());
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  Map<T>(out.data(), m, n).noalias() =
      MapC<T>(a.data().data(), m, k) * MapC<T>(b.data().data(), k, n);
  return make_result<T>({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    MapC<T> g(self.grad.data(), m, n);
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (wants_grad(pa)) {
      Map<T>(pa.ensure_grad().data(), m, k).noalias() +=
          g * MapC<T>(pb.value.data(), k, n).transpose();
    }
    if (wants_grad(pb)) {
      Map<T>(pb.ensure_grad().data(), k, n).noalias() +=
          MapC<T>(pa.value.data(), m, k).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("bmm: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const auto bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<T> out(bs * m * n);
  for (std::size_t i = 0; i < bs; ++i) {
    Map<T>(out.data() + i * m * n, m, n).noalias() =
        MapC<T>(a.data().data() + i * m * k, m, k) * MapC<T>(b.data().data() + i * k * n, k, n);
  }
  return make_result<T>({bs, m, n}, std::move(out), {a, b}, [bs, m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < bs; ++i) {
      MapC<T> g(self.grad.data() + i * m * n, m, n);
      if (wants_grad(pa)) {
        Map<T>(pa.ensure_grad().data() + i * m * k, m, k).noalias() +=
            g * MapC<T>(pb.value.data() + i * k * n, k, n).transpose();
      }
      if (wants_grad(pb)) {
        Map<T>(pb.ensure_grad().data() + i * k * n, k, n).noalias() +=
            MapC<T>(pa.value.data() + i * m * k, m, k).transpose() * g;
      }
    }
  });
}

template <typename T>
Tensor<T> project_axis1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.rank() != 3 || w.rank() != 2 || bias.rank() != 1 || x.dim(1) != w.dim(0) ||
      bias.dim(0) != w.dim(1)) {
    throw DimensionError("project_axis1: incompatible shapes " + shape_str(x.shape()) + ", " +
                         shape_str(w.shape()) + ", " + shape_str(bias.shape()));
  }
  const auto bs = x.dim(0), m = x.dim(1), n = x.dim(2), k = w.dim(1);
  std::vector<T> out(bs * k * n);
  MapC<T> wm(w.data().data(), m, k);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.data().data(), k);
  for (std::size_t i = 0; i < bs; ++i) {
    Map<T> o(out.data() + i * k * n, k, n);
    o.noalias() = wm.transpose() * MapC<T>(x.data().data() + i * m * n, m, n);
    o.colwise() += bv;
  }
  return make_result<T>({bs, k, n}, std::move(out), {x, w, bias}, [bs, m, n, k](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    MapC<T> wm(pw.value.data(), m, k);
    for (std::size_t i = 0; i < bs; ++i) {
      MapC<T> g(self.grad.data() + i * k * n, k, n);
      if (wants_grad(px)) Map<T>(px.ensure_grad().data() + i * m * n, m, n).noalias() += wm * g;
      if (wants_grad(pw)) {
        Map<T>(pw.ensure_grad().data(), m, k).noalias() +=
            MapC<T>(px.value.data() + i * m * n, m, n) * g.transpose();
      }
      if (wants_grad(pb)) {
        auto& gb = pb.ensure_grad();
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t c = 0; c < n; ++c) gb[r] += g(r, c);
      }
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!wants_grad(*p)) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (wants_grad(pa)) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(pb)) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (wants_grad(pa)) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (wants_grad(pb)) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match last axis of " + shape_str(x.shape()));
  }
  const auto f = bias.dim(0);
  const auto rows = x.numel() / f;
  std::vector<T> out(x.data().begin(), x.data().end());
  auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < f; ++j) out[r * f + j] += bv[j];
  return make_result<T>(x.shape(), std::move(out), {x, bias}, [rows, f](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (wants_grad(px)) {
      auto& g = px.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(pb)) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < f; ++j) g[j] += self.grad[r * f + j];
    }
  });
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * xv[i] + shift;
  return make_result<T>(x.shape(), std::move(out), {x}, [scale](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * self.grad[i];
  });
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  switch (kind) {
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) {
        // Split by sign so exp() never overflows.
        const T v = xv[i];
        if (v >= T(0)) {
          out[i] = T(1) / (T(1) + std::exp(-v));
        } else {
          const T e = std::exp(v);
          out[i] = e / (T(1) + e);
        }
      }
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
      break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
      break;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [kind](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& g = px.ensure_grad();
    const auto& y = self.value;
    switch (kind) {
      case Activation::kSigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (T(1) - y[i]);
        break;
      case Activation::kTanh:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (T(1) - y[i] * y[i]);
        break;
      case Activation::kRelu:
        for (std::size_t i = 0; i < g.size(); ++i)
          if (px.value[i] > T(0)) g[i] += self.grad[i];
        break;
    }
  });
}

template <typename T>
Tensor<T> softmax_lastaxis(const Tensor<T>& x) {
  const auto f = x.shape().back();
  const auto rows = x.numel() / f;
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * f;
    T* o = out.data() + r * f;
    const T mx = *std::max_element(in, in + f);
    T total = 0;
    for (std::size_t j = 0; j < f; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < f; ++j) o[j] /= total;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [rows, f](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.value.data() + r * f;
      const T* gy = self.grad.data() + r * f;
      T dot = 0;
      for (std::size_t j = 0; j < f; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < f; ++j) g[r * f + j] += y[j] * (gy[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> concat_lastaxis(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_lastaxis: no inputs");
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape pl(p.shape().begin(), p.shape().end() - 1);
    if (pl != lead) {
      throw DimensionError("concat_lastaxis: leading shapes differ " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  const auto rows = shape_numel(lead);
  std::vector<T> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return make_result<T>(shape, std::move(out), parts, [rows, total, widths](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (wants_grad(p)) {
        auto& g = p.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[k]; ++j)
            g[r * widths[k] + j] += self.grad[r * total + off + j];
      }
      off += widths[k];
    }
  });
}

template <typename T>
Tensor<T> slice_lastaxis(const Tensor<T>& x, std::size_t start, std::size_t length) {
  const auto f = x.shape().back();
  if (length == 0 || start + length > f) {
    throw DimensionError("slice_lastaxis: [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") out of range for " +
                         shape_str(x.shape()));
  }
  const auto rows = x.numel() / f;
  std::vector<T> out(rows * length);
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.data() + r * f + start, length, out.data() + r * length);
  Shape shape = x.shape();
  shape.back() = length;
  return make_result<T>(shape, std::move(out), {x}, [rows, f, start, length](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < length; ++j) g[r * f + start + j] += self.grad[r * length + j];
  });
}

template <typename T>
Tensor<T> select_axis1(const Tensor<T>& x, std::size_t index) {
  require_rank(x, 3, "select_axis1");
  const auto b = x.dim(0), n = x.dim(1), f = x.dim(2);
  if (index >= n) throw DimensionError("select_axis1: index out of range");
  std::vector<T> out(b * f);
  auto xv = x.data();
  for (std::size_t i = 0; i < b; ++i)
    std::copy_n(xv.data() + (i * n + index) * f, f, out.data() + i * f);
  return make_result<T>({b, f}, std::move(out), {x}, [b, n, f, index](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < f; ++j) g[(i * n + index) * f + j] += self.grad[i * f + j];
  });
}

template <typename T>
Tensor<T> stack_axis1(const std::vector<Tensor<T>>& steps) {
  if (steps.empty()) throw ContractError("stack_axis1: no inputs");
  const auto& s0 = steps[0].shape();
  if (s0.size() != 2) throw DimensionError("stack_axis1: expected [B,F] steps");
  for (const auto& s : steps) require_same_shape(steps[0], s, "stack_axis1");
  const auto b = s0[0], f = s0[1], n = steps.size();
  std::vector<T> out(b * n * f);
  for (std::size_t t = 0; t < n; ++t) {
    auto sv = steps[t].data();
    for (std::size_t i = 0; i < b; ++i)
      std::copy_n(sv.data() + i * f, f, out.data() + (i * n + t) * f);
  }
  return make_result<T>({b, n, f}, std::move(out), steps, [b, n, f](Node<T>& self) {
    for (std::size_t t = 0; t < n; ++t) {
      auto& p = *self.parents[t];
      if (!wants_grad(p)) continue;
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < f; ++j) g[i * f + j] += self.grad[(i * n + t) * f + j];
    }
  });
}

template <typename T>
Tensor<T> repeat_axis1(const Tensor<T>& x, std::size_t count) {
  require_rank(x, 2, "repeat_axis1");
  if (count == 0) throw DimensionError("repeat_axis1: count must be positive");
  const auto b = x.dim(0), f = x.dim(1);
  std::vector<T> out(b * count * f);
  auto xv = x.data();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < count; ++t)
      std::copy_n(xv.data() + i * f, f, out.data() + (i * count + t) * f);
  return make_result<T>({b, count, f}, std::move(out), {x}, [b, count, f](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t t = 0; t < count; ++t)
        for (std::size_t j = 0; j < f; ++j) g[i * f + j] += self.grad[(i * count + t) * f + j];
  });
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  require_rank(x, 3, "transpose_last2");
  const auto b = x.dim(0), m = x.dim(1), n = x.dim(2);
  std::vector<T> out(b * m * n);
  for (std::size_t i = 0; i < b; ++i) {
    Map<T>(out.data() + i * m * n, n, m) = MapC<T>(x.data().data() + i * m * n, m, n).transpose();
  }
  return make_result<T>({b, n, m}, std::move(out), {x}, [b, m, n](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < b; ++i) {
      Map<T>(g.data() + i * m * n, m, n) += MapC<T>(self.grad.data() + i * m * n, n, m).transpose();
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(shape, std::move(out), {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> drop_last_column(const Tensor<T>& x) {
  if (x.shape().back() < 2) throw DimensionError("drop_last_column: need at least two columns");
  return slice_lastaxis(x, 0, x.shape().back() - 1);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T rate, std::mt19937_64& rng) {
  if (rate < T(0) || rate >= T(1)) throw ContractError("dropout rate must be in [0, 1)");
  if (rate == T(0)) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  const T scale = T(1) / (T(1) - rate);
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? scale : T(0);
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return make_result<T>(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>({1}, {total}, {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return affine(sum(x), T(1) / static_cast<T>(x.numel()), T(0));
}

template <typename T>
void check_finite(const Tensor<T>& x, const std::string& what) {
  for (T v : x.data()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }
}

double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  const Tensor<double>& x, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");

  auto probe = Tensor<double>::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()),
                                    true);
  auto out = f(probe);
  if (out.numel() != 1) {
    throw ContractError("grad_check: function output must be scalar, got " +
                        shape_str(out.shape()));
  }
  out.backward();
  std::vector<double> analytic(probe.numel(), 0.0);
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  auto values = probe.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f(probe).item();
    values[i] = saved - eps;
    const double down = f(probe).item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

#define CSIP_INSTANTIATE(T)                                                                      \
  template struct Node<T>;                                                                       \
  template class Tensor<T>;                                                                      \
  template Tensor<T> make_result<T>(Shape, std::vector<T>, std::vector<Tensor<T>>,               \
                                    std::function<void(Node<T>&)>);                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> project_axis1(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> affine(const Tensor<T>&, T, T);                                             \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                   \
  template Tensor<T> softmax_lastaxis(const Tensor<T>&);                                         \
  template Tensor<T> concat_lastaxis(const std::vector<Tensor<T>>&);                             \
  template Tensor<T> slice_lastaxis(const Tensor<T>&, std::size_t, std::size_t);                 \
  template Tensor<T> select_axis1(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> stack_axis1(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> repeat_axis1(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> transpose_last2(const Tensor<T>&);                                          \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                    \
  template Tensor<T> drop_last_column(const Tensor<T>&);                                         \
  template Tensor<T> dropout(const Tensor<T>&, T, std::mt19937_64&);                             \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template void check_finite(const Tensor<T>&, const std::string&);

CSIP_INSTANTIATE(float)
CSIP_INSTANTIATE(double)

#undef CSIP_INSTANTIATE

}  // namespace csip
