#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "csip/error.hpp"
#include "csip/model.hpp"
#include "csip/train.hpp"
#include "support.hpp"

using namespace csip;
using T = Tensor<double>;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.d = 4;
  d.layers = 2;
  d.n_p = 5;
  d.n_l = 3;
  d.features = 3;
  d.channels = 2;
  d.reduction = 2;
  return d;
}

ModelDims paper_dims() {
  ModelDims d;
  d.d = 256;
  d.layers = 3;
  d.n_p = 128;
  d.n_l = 8;
  d.features = 9;
  d.channels = 8;
  d.reduction = 4;
  return d;
}

// Values of `name` in row-major order as a 2-D accessor.
struct Mat {
  std::span<const double> v;
  std::size_t cols;
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

Mat mat(const ParamStore<double>& p, const std::string& name) {
  const auto& t = p.get(name);
  return {t.data(), t.rank() == 2 ? t.dim(1) : t.dim(0)};
}

// Straight-loop GRU over one sequence [N, in]; returns [N, d].
std::vector<double> gru_oracle(const std::vector<double>& x, std::size_t n, std::size_t in, const ParamStore<double>& p,
                               const std::string& pre, std::size_t d) {
  auto W = [&](const char* g) { return mat(p, pre + "W_" + g); };
  auto U = [&](const char* g) { return mat(p, pre + "U_" + g); };
  auto bx = [&](const char* g) { return p.get(pre + "bx_" + g).data(); };
  auto bh = [&](const char* g) { return p.get(pre + "bh_" + g).data(); };
  std::vector<double> h(d, 0.0), out;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> z(d), r(d), hn(d);
    for (std::size_t j = 0; j < d; ++j) {
      double az = bx("z")[j] + bh("z")[j], ar = bx("r")[j] + bh("r")[j];
      for (std::size_t i = 0; i < in; ++i) {
        az += x[t * in + i] * W("z")(i, j);
        ar += x[t * in + i] * W("r")(i, j);
      }
      for (std::size_t i = 0; i < d; ++i) {
        az += h[i] * U("z")(i, j);
        ar += h[i] * U("r")(i, j);
      }
      z[j] = testing::sigmoid(az);
      r[j] = testing::sigmoid(ar);
    }
    for (std::size_t j = 0; j < d; ++j) {
      double a = bx("h")[j] + bh("h")[j];
      for (std::size_t i = 0; i < in; ++i) a += x[t * in + i] * W("h")(i, j);
      for (std::size_t i = 0; i < d; ++i) a += r[i] * h[i] * U("h")(i, j);
      hn[j] = (1 - z[j]) * h[j] + z[j] * std::tanh(a);
    }
    h = hn;
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

std::vector<double> lstm_oracle(const std::vector<double>& x, std::size_t n, std::size_t in,
                                const ParamStore<double>& p, const std::string& pre, std::size_t d) {
  std::vector<double> h(d, 0.0), c(d, 0.0), out;
  const char* gates[] = {"i", "f", "g", "o"};
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<std::vector<double>> a(4, std::vector<double>(d));
    for (int g = 0; g < 4; ++g) {
      auto W = mat(p, pre + "W_" + gates[g]);
      auto U = mat(p, pre + "U_" + gates[g]);
      auto bx = p.get(pre + "bx_" + gates[g]).data();
      auto bh = p.get(pre + "bh_" + gates[g]).data();
      for (std::size_t j = 0; j < d; ++j) {
        double s = bx[j] + bh[j];
        for (std::size_t i = 0; i < in; ++i) s += x[t * in + i] * W(i, j);
        for (std::size_t i = 0; i < d; ++i) s += h[i] * U(i, j);
        a[g][j] = s;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      c[j] = testing::sigmoid(a[1][j]) * c[j] + testing::sigmoid(a[0][j]) * std::tanh(a[2][j]);
      h[j] = testing::sigmoid(a[3][j]) * std::tanh(c[j]);
    }
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

void fill(ParamStore<double>& p, double value) {
  for (auto& [name, t] : p)
    for (auto& v : t.mutable_data()) v = value;
}

T input(const Model<double>& m, std::size_t batch, std::uint64_t seed) {
  return testing::rand_tensor({batch, m.dims().n_p, m.input_features()}, seed);
}

}  // namespace

TEST_CASE("GRU examples") {
  SUBCASE("zero parameters give zero states") {
    Model<double> m(variant_by_name("gru-dslh"), tiny_dims(), 1);
    fill(m.params(), 0.0);
    auto e = m.encode(input(m, 2, 1), false, nullptr);
    for (double v : e.data()) CHECK(v == 0.0);
  }
  SUBCASE("scalar hand computation") {
    ParamStore<double> p;
    for (const char* n : {"W_z", "U_z", "W_r", "U_r", "U_h"}) p.add(std::string("g.") + n, T::zeros({1, 1}));
    p.get("g.W_r") = T::from({1, 1}, {0.7});
    p.add("g.W_h", T::from({1, 1}, {1.0}));
    for (const char* n : {"bx_z", "bx_r", "bx_h", "bh_z", "bh_r", "bh_h"}) p.add(std::string("g.") + n, T::zeros({1}));
    auto h = gru_layer(T::from({1, 1, 1}, {1.0}), p, "g.");
    CHECK(std::abs(h.item() - 0.5 * std::tanh(1.0)) < 1e-15);
    CHECK(std::abs(h.item() - 0.38079) < 1e-5);
  }
  SUBCASE("two stacked layers match a loop oracle") {
    auto dims = tiny_dims();
    Model<double> m(variant_by_name("gru-dslh"), dims, 3);
    for (auto& [name, t] : m.params())
      if (name.find("bx_") != std::string::npos || name.find("bh_") != std::string::npos)
        for (auto& v : t.mutable_data()) v = 0.1 * static_cast<double>(name.size() % 5) - 0.2;
    auto x = input(m, 2, 4);
    auto e = m.encode(x, false, nullptr);
    for (std::size_t b = 0; b < 2; ++b) {
      std::vector<double> seq(x.data().begin() + b * 15, x.data().begin() + (b + 1) * 15);
      auto l0 = gru_oracle(seq, 5, 3, m.params(), "enc.0.", 4);
      auto l1 = gru_oracle(l0, 5, 4, m.params(), "enc.1.", 4);
      std::vector<double> got(e.data().begin() + b * 20, e.data().begin() + (b + 1) * 20);
      CHECK(testing::max_abs_diff(got, l1) < 1e-12);
    }
  }
  SUBCASE("wrong input width") {
    Model<double> m(variant_by_name("gru-dslh"), tiny_dims(), 1);
    CHECK_THROWS_AS(m.forward(testing::rand_tensor({1, 5, 7}, 1), false), DimensionError);
    CHECK_THROWS_AS(m.forward(testing::rand_tensor({1, 4, 3}, 1), false), DimensionError);
  }
}

TEST_CASE("LSTM examples") {
  auto dims = tiny_dims();
  Model<double> m(variant_by_name("lstm-dslh"), dims, 5);
  SUBCASE("loop oracle") {
    auto x = input(m, 1, 6);
    auto e = m.encode(x, false, nullptr);
    std::vector<double> seq(x.data().begin(), x.data().end());
    auto l1 = lstm_oracle(lstm_oracle(seq, 5, 3, m.params(), "enc.0.", 4), 5, 4, m.params(), "enc.1.", 4);
    CHECK(testing::max_abs_diff(e.data(), l1) < 1e-12);
  }
  SUBCASE("zero parameters give zero states") {
    fill(m.params(), 0.0);
    auto e = m.encode(input(m, 2, 1), false, nullptr);
    for (double v : e.data()) CHECK(v == 0.0);
  }
  SUBCASE("per-layer count") {
    std::size_t enc = 0;
    for (const auto& l : parameter_layout(m.spec(), dims))
      if (l.name.rfind("enc.0.", 0) == 0) enc += shape_numel(l.shape);
    CHECK(enc == 4 * (4 * 3 + 16 + 2 * 4));
  }
  SUBCASE("gradient check") {
    auto x = input(m, 2, 7);
    auto y = testing::rand_tensor({2, 3, 2}, 8);
    auto f = [&](const T& w) {
      auto saved = m.params().get("enc.1.U_f");
      m.params().get("enc.1.U_f") = w;
      auto loss = weighted_mse(m.forward(x, false), y, loss_weights(3));
      m.params().get("enc.1.U_f") = saved;
      return loss;
    };
    CHECK(grad_check(f, m.params().get("enc.1.U_f").detach(), 1e-6) < 1e-4);
  }
}

TEST_CASE("attention examples") {
  SUBCASE("single step") {
    auto e = testing::rand_tensor({2, 1, 3}, 1);
    auto a = attention(e);
    CHECK(a.weights.data()[0] == 1.0);
    CHECK(testing::max_abs_diff(a.context.data(), e.data()) == 0.0);
  }
  SUBCASE("identical states give uniform weights") {
    std::vector<double> v;
    for (int t = 0; t < 4; ++t) v.insert(v.end(), {0.3, -1.2});
    auto a = attention(T::from({1, 4, 2}, v));
    for (double w : a.weights.data()) CHECK(std::abs(w - 0.25) < 1e-15);
    CHECK(std::abs(a.context.data()[0] - 0.3) < 1e-15);
  }
  SUBCASE("loop oracle") {
    auto e = testing::rand_tensor({1, 3, 2}, 2);
    auto a = attention(e);
    auto h = e.data();
    double s[3], z = 0.0;
    for (int t = 0; t < 3; ++t) {
      s[t] = std::exp((h[t * 2] * h[4] + h[t * 2 + 1] * h[5]) / std::sqrt(2.0));
      z += s[t];
    }
    for (int t = 0; t < 3; ++t) CHECK(std::abs(a.weights.data()[t] - s[t] / z) < 1e-12);
    for (int j = 0; j < 2; ++j) {
      double c = 0.0;
      for (int t = 0; t < 3; ++t) c += s[t] / z * h[t * 2 + j];
      CHECK(std::abs(a.context.data()[j] - c) < 1e-12);
    }
  }
  SUBCASE("weights are a distribution") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto a = attention(testing::rand_tensor({3, 7, 5}, seed, 3.0));
      for (std::size_t b = 0; b < 3; ++b) {
        double total = 0.0;
        for (std::size_t t = 0; t < 7; ++t) {
          CHECK(a.weights.data()[b * 7 + t] >= 0.0);
          total += a.weights.data()[b * 7 + t];
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("gated fusion") {
  const std::size_t d = 4, mid = 2;
  auto e = testing::rand_tensor({2, 3, d}, 1);
  auto c = testing::rand_tensor({2, d}, 2);
  auto w1 = testing::rand_tensor({2 * d, mid}, 3);
  auto b1 = testing::rand_tensor({mid}, 4);
  SUBCASE("saturated open gate returns E") {
    auto out = gated_fusion(e, c, w1, b1, T::zeros({mid, d}), T::full({d}, 50.0));
    CHECK(testing::max_abs_diff(out.data(), e.data()) < 1e-9);
  }
  SUBCASE("saturated closed gate returns c") {
    auto out = gated_fusion(e, c, w1, b1, T::zeros({mid, d}), T::full({d}, -50.0));
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(out.data()[(b * 3 + t) * d + j] - c.data()[b * d + j]) < 1e-9);
  }
  SUBCASE("loop oracle and gate range") {
    auto w2 = testing::rand_tensor({mid, d}, 5);
    auto b2 = testing::rand_tensor({d}, 6);
    auto out = gated_fusion(e, c, w1, b1, w2, b2);
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t t = 0; t < 3; ++t) {
        std::vector<double> u(2 * d);
        for (std::size_t j = 0; j < d; ++j) {
          u[j] = e.data()[(b * 3 + t) * d + j];
          u[d + j] = c.data()[b * d + j];
        }
        std::vector<double> hid(mid);
        for (std::size_t k = 0; k < mid; ++k) {
          double s = b1.data()[k];
          for (std::size_t i = 0; i < 2 * d; ++i) s += u[i] * w1.data()[i * mid + k];
          hid[k] = std::max(0.0, s);
        }
        for (std::size_t j = 0; j < d; ++j) {
          double s = b2.data()[j];
          for (std::size_t k = 0; k < mid; ++k) s += hid[k] * w2.data()[k * d + j];
          const double g = testing::sigmoid(s);
          CHECK(g > 0.0);
          CHECK(g < 1.0);
          CHECK(std::abs(out.data()[(b * 3 + t) * d + j] - (g * u[j] + (1 - g) * u[d + j])) < 1e-12);
        }
      }
    }
  }
  SUBCASE("d must divide by r") {
    auto dims = tiny_dims();
    dims.reduction = 3;
    CHECK_THROWS_AS(Model<double>(variant_by_name("proposed"), dims, 1), ConfigError);
  }
}

TEST_CASE("linear fusion") {
  const std::size_t d = 3;
  auto e = testing::rand_tensor({2, 4, d}, 1);
  auto c = testing::rand_tensor({2, d}, 2);
  std::vector<double> sel_h(2 * d * d, 0.0), sel_c(2 * d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    sel_h[j * d + j] = 1.0;
    sel_c[(d + j) * d + j] = 1.0;
  }
  auto out_h = linear_fusion(e, c, T::from({2 * d, d}, sel_h), T::zeros({d}));
  CHECK(testing::max_abs_diff(out_h.data(), e.data()) < 1e-15);
  auto out_c = linear_fusion(e, c, T::from({2 * d, d}, sel_c), T::zeros({d}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < d; ++j) CHECK(out_c.data()[(b * 4 + t) * d + j] == c.data()[b * d + j]);

  auto w = testing::rand_tensor({2 * d, d}, 3);
  auto bias = testing::rand_tensor({d}, 4);
  auto out = linear_fusion(e, c, w, bias);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        double s = bias.data()[j];
        for (std::size_t i = 0; i < d; ++i) {
          s += e.data()[(b * 4 + t) * d + i] * w.data()[i * d + j];
          s += c.data()[b * d + i] * w.data()[(d + i) * d + j];
        }
        CHECK(std::abs(out.data()[(b * 4 + t) * d + j] - s) < 1e-12);
      }
}

TEST_CASE("DSLH") {
  SUBCASE("identity factorization") {
    auto e = testing::rand_tensor({2, 3, 3}, 1);
    std::vector<double> eye(9, 0.0);
    for (int i = 0; i < 3; ++i) eye[i * 4] = 1.0;
    auto out = dslh(e, T::from({3, 3}, eye), T::zeros({3}), T::from({3, 3}, eye), T::zeros({3}), 3);
    CHECK(testing::max_abs_diff(out.data(), e.data()) < 1e-15);
  }
  SUBCASE("zero time projection leaves only biases") {
    auto e = testing::rand_tensor({1, 4, 3}, 2);
    auto bt = testing::rand_tensor({2}, 3);
    auto wc = testing::rand_tensor({3, 5}, 4);
    auto bc = testing::rand_tensor({5}, 5);
    auto out = dslh(e, T::zeros({4, 2}), bt, wc, bc, 5);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t c = 0; c < 5; ++c) {
        double s = bc.data()[c];
        for (std::size_t j = 0; j < 3; ++j) s += bt.data()[k] * wc.data()[j * 5 + c];
        CHECK(std::abs(out.data()[k * 5 + c] - s) < 1e-14);
      }
    auto plain = dslh(e, T::zeros({4, 2}), T::zeros({2}), wc, bc, 5);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t c = 0; c < 5; ++c) CHECK(plain.data()[k * 5 + c] == bc.data()[c]);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(dslh(T::zeros({1, 4, 3}), T::zeros({5, 2}), T::zeros({2}), T::zeros({3, 2}), T::zeros({2}), 2),
                    DimensionError);
  }
}

TEST_CASE("dense head") {
  const std::size_t n_p = 4, d = 3, n_l = 2, ch = 5;
  auto e = testing::rand_tensor({2, n_p, d}, 1);
  SUBCASE("zero weights give the bias") {
    auto b = testing::rand_tensor({n_l * ch}, 2);
    auto out = dense_head(e, T::zeros({n_p * d, n_l * ch}), b, n_l, ch);
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == b.data()[i % (n_l * ch)]);
  }
  SUBCASE("Kronecker weights reproduce DSLH") {
    auto wt = testing::rand_tensor({n_p, n_l}, 3);
    auto bt = testing::rand_tensor({n_l}, 4);
    auto wc = testing::rand_tensor({d, ch}, 5);
    auto bc = testing::rand_tensor({ch}, 6);
    std::vector<double> w(n_p * d * n_l * ch), b(n_l * ch);
    for (std::size_t t = 0; t < n_p; ++t)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < n_l; ++k)
          for (std::size_t c = 0; c < ch; ++c)
            w[(t * d + j) * n_l * ch + k * ch + c] = wt.data()[t * n_l + k] * wc.data()[j * ch + c];
    for (std::size_t k = 0; k < n_l; ++k)
      for (std::size_t c = 0; c < ch; ++c) {
        b[k * ch + c] = bc.data()[c];
        for (std::size_t j = 0; j < d; ++j) b[k * ch + c] += bt.data()[k] * wc.data()[j * ch + c];
      }
    auto dense = dense_head(e, T::from({n_p * d, n_l * ch}, w), T::from({n_l * ch}, b), n_l, ch);
    auto fact = dslh(e, wt, bt, wc, bc, ch);
    CHECK(testing::max_abs_diff(dense.data(), fact.data()) < 1e-10);
  }
  SUBCASE("gradient check") {
    auto b = testing::rand_tensor({n_l * ch}, 2);
    auto f = [&](const T& w) { return sum(mul(dense_head(e, w, b, n_l, ch), dense_head(e, w, b, n_l, ch))); };
    CHECK(grad_check(f, testing::rand_tensor({n_p * d, n_l * ch}, 9), 1e-6) < 1e-4);
  }
}

TEST_CASE("forward") {
  auto dims = tiny_dims();
  SUBCASE("deterministic in evaluation mode") {
    Model<double> a(variant_by_name("proposed"), dims, 42);
    Model<double> b(variant_by_name("proposed"), dims, 42);
    auto x = input(a, 3, 1);
    auto ya = a.forward(x, false);
    auto again = a.forward(x, false);
    CHECK(testing::max_abs_diff(ya.data(), again.data()) == 0.0);
    auto yb = b.forward(x, false);
    CHECK(testing::max_abs_diff(ya.data(), yb.data()) == 0.0);
    CHECK(ya.shape() == Shape{3, 3, 2});
  }
  SUBCASE("dropout only in training") {
    auto dd = dims;
    dd.dropout = 0.5;
    Model<double> m(variant_by_name("proposed"), dd, 1);
    auto x = input(m, 2, 2);
    auto e1 = m.forward(x, false);
    auto e2 = m.forward(x, false);
    CHECK(testing::max_abs_diff(e1.data(), e2.data()) == 0.0);
    std::mt19937_64 rng(3);
    auto t1 = m.forward(x, true, &rng);
    CHECK(testing::max_abs_diff(t1.data(), e1.data()) > 0.0);
    CHECK_THROWS_AS(m.forward(x, true, nullptr), ContractError);
  }
  SUBCASE("saturated gate reduces to no fusion") {
    Model<double> gated(variant_by_name("proposed"), dims, 7);
    VariantSpec plain_spec = variant_by_name("proposed");
    plain_spec.name = "attn-only";
    plain_spec.fusion = FusionKind::kNone;
    Model<double> plain(plain_spec, dims, 7);
    for (auto& [name, t] : plain.params()) {
      auto src = gated.params().get(name).data();
      std::copy(src.begin(), src.end(), t.mutable_data().begin());
    }
    for (auto& v : gated.params().get("fusion.W_2").mutable_data()) v = 0.0;
    for (auto& v : gated.params().get("fusion.b_2").mutable_data()) v = 50.0;
    auto x = input(gated, 2, 3);
    CHECK(testing::max_abs_diff(gated.forward(x, false).data(), plain.forward(x, false).data()) < 1e-9);
  }
  SUBCASE("no-speed variant drops the speed column") {
    Model<double> ns(variant_by_name("proposed-nospeed"), dims, 1);
    CHECK(ns.input_features() == 2);
    auto full = testing::rand_tensor({2, 5, 3}, 4);
    auto y_full = ns.forward(full, false);
    auto y_drop = ns.forward(drop_last_column(full), false);
    CHECK(testing::max_abs_diff(y_full.data(), y_drop.data()) == 0.0);
  }
  SUBCASE("full model gradient check") {
    Model<double> m(variant_by_name("proposed"), dims, 11);
    auto x = input(m, 2, 12);
    auto y = testing::rand_tensor({2, 3, 2}, 13);
    const auto w = loss_weights(3);
    double worst = 0.0;
    std::vector<std::string> names;
    for (const auto& [name, t] : m.params()) names.push_back(name);
    for (const auto& name : names) {
      auto f = [&](const T& p) {
        auto saved = m.params().get(name);
        m.params().get(name) = p;
        auto loss = weighted_mse(m.forward(x, false), y, w);
        m.params().get(name) = saved;
        return loss;
      };
      worst = std::max(worst, grad_check(f, m.params().get(name).detach(), 1e-6));
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("fusion requires attention") {
    VariantSpec bad = variant_by_name("proposed");
    bad.attention = false;
    CHECK_THROWS_AS(Model<double>(bad, dims, 1), ConfigError);
  }
}

TEST_CASE("registry") {
  const auto names = ablation_variant_names();
  CHECK(names == std::vector<std::string>{"gru-dense", "gru-dslh", "gru-attn-dense", "gru-attn-gated-dense",
                                          "gru-attn-dslh", "proposed", "proposed-nospeed"});
  auto g = variant_by_name("gru-dslh");
  CHECK(g.encoder == EncoderKind::kGru);
  CHECK(g.fusion == FusionKind::kNone);
  CHECK(g.head == HeadKind::kDslh);
  CHECK_FALSE(g.attention);
  CHECK_THROWS_AS(variant_by_name("transformer"), ConfigError);
  CHECK(parse_head("dslh") == HeadKind::kDslh);
  CHECK_THROWS_AS(parse_fusion("mix"), ConfigError);
}

TEST_CASE("parameter counts") {
  const auto dims = paper_dims();
  auto count = [&](const VariantSpec& s, const char* prefix) {
    std::size_t n = 0, weights = 0;
    for (const auto& l : parameter_layout(s, dims))
      if (l.name.rfind(prefix, 0) == 0) {
        n += shape_numel(l.shape);
        if (!l.bias) weights += shape_numel(l.shape);
      }
    return std::pair{n, weights};
  };
  const auto proposed = variant_by_name("proposed");
  const auto dense = variant_by_name("gru-attn-gated-dense");
  CHECK(count(proposed, "head.").second == 128 * 8 + 256 * 8);
  CHECK(count(proposed, "head.").second == 3072);
  CHECK(count(proposed, "head.").first == 3072 + 8 + 8);
  CHECK(count(dense, "head.").second == 2097152);
  CHECK(count(proposed, "fusion.").first == 49472);
  CHECK(count(variant_by_name("gru-attn-dslh"), "fusion.").first == 131328);
  CHECK(count(proposed, "enc.").first == 3 * (256 * 9 + 256 * 256 + 512) + 2 * 3 * (2 * 256 * 256 + 512));
  CHECK(param_count(proposed, dims) == 1047120);
  CHECK(param_count(dense, dims) == 3141248);

  // Enumeration equals the closed forms for every registered variant.
  for (const auto& s : registered_variants()) {
    const std::size_t d = dims.d, r = dims.reduction;
    std::size_t in = s.use_speed ? dims.features : dims.features - 1;
    const std::size_t gates = s.encoder == EncoderKind::kGru ? 3 : 4;
    std::size_t expect = 0;
    for (std::size_t l = 0; l < dims.layers; ++l, in = d) expect += gates * (d * in + d * d + 2 * d);
    if (s.fusion == FusionKind::kGated) expect += (d / r) * 2 * d + d * (d / r) + d / r + d;
    if (s.fusion == FusionKind::kLinear) expect += 2 * d * d + d;
    expect += s.head == HeadKind::kDslh ? dims.n_p * dims.n_l + d * dims.channels + dims.n_l + dims.channels
                                        : dims.n_p * d * dims.n_l * dims.channels + dims.n_l * dims.channels;
    CAPTURE(s.name);
    CHECK(param_count(s, dims) == expect);
  }
  Model<double> m(proposed, tiny_dims(), 1);
  CHECK(param_count(m) == param_count(proposed, tiny_dims()));
}

TEST_CASE("MAC estimates") {
  auto dims = tiny_dims();
  dims.layers = 1;
  const auto s = variant_by_name("proposed");
  // d=4, n_p=5, n_l=3, D=3, C=2, r=2
  const std::uint64_t gru = 5 * 3 * (4 * 3 + 4 * 4);
  const std::uint64_t att = 2 * 5 * 4;
  const std::uint64_t fus = 5 * (8 * 2 + 2 * 4);
  const std::uint64_t head = 5 * 3 * 4 + 3 * 4 * 2;
  CHECK(flops_estimate(s, dims, 1) == gru + att + fus + head);
  CHECK(flops_estimate(s, dims, 7) == 7 * (gru + att + fus + head));
  CHECK(gflops_per_sample(s, dims) == doctest::Approx(2.0 * (gru + att + fus + head) * 1e-9));

  // Doubling d quadruples the recurrent U h products.
  auto g = variant_by_name("gru-dslh");
  auto d2 = dims;
  d2.d = 8;
  auto recurrent = [&](const ModelDims& m) {
    return flops_estimate(g, m, 1) - (m.n_p * 3 * m.d * m.features) - (m.n_p * m.n_l * m.d + m.n_l * m.d * m.channels);
  };
  CHECK(recurrent(d2) == 4 * recurrent(dims));
}

TEST_CASE("checkpoint round trip") {
  Model<double> m(variant_by_name("proposed"), tiny_dims(), 9);
  std::stringstream buf;
  write_checkpoint(buf, m);
  CHECK(buf.str().rfind("CSIM1 proposed ", 0) == 0);
  auto back = read_checkpoint(buf);
  CHECK(back.spec() == m.spec());
  CHECK(back.dims() == m.dims());
  for (const auto& [name, t] : m.params()) {
    auto got = back.params().get(name).data();
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(got[i] == static_cast<double>(static_cast<float>(t.data()[i])));
  }
  const auto path = std::string("/tmp/csip_model_test.csim");
  save_checkpoint(path, m);
  Model<double> into(variant_by_name("proposed"), tiny_dims(), 1);
  load_checkpoint_into(path, into);
  CHECK(testing::max_abs_diff(into.params().get("head.W_ch").data(), back.params().get("head.W_ch").data()) == 0.0);
  auto other_dims = tiny_dims();
  other_dims.d = 6;
  Model<double> wrong(variant_by_name("proposed"), other_dims, 1);
  CHECK_THROWS_AS(load_checkpoint_into(path, wrong), ConfigError);
  Model<double> wrong_variant(variant_by_name("gru-dslh"), tiny_dims(), 1);
  CHECK_THROWS_AS(load_checkpoint_into(path, wrong_variant), ConfigError);
  std::stringstream junk("CSIM1 proposed gru 1\n");
  CHECK_THROWS_AS(read_checkpoint(junk), IoError);
}

TEST_CASE("float cast preserves the forward pass") {
  Model<double> m(variant_by_name("proposed"), tiny_dims(), 2);
  auto mf = m.cast<float>();
  auto x = input(m, 2, 3);
  std::vector<float> xf(x.data().begin(), x.data().end());
  auto yf = mf.forward(Tensor<float>::from(x.shape(), xf), false);
  auto y = m.forward(x, false);
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(std::abs(yf.data()[i] - y.data()[i]) < 1e-5);
}
