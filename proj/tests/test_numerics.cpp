#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csip/error.hpp"
#include "csip/tensor.hpp"
#include "support.hpp"

using csip::Tensor;
using T = Tensor<double>;

TEST_CASE("matmul small products") {
  auto eye = T::from({2, 2}, {1, 0, 0, 1});
  auto a = T::from({2, 2}, {1, 2, 3, 4});
  auto p = csip::matmul(eye, a);
  CHECK(std::vector<double>(p.data().begin(), p.data().end()) == std::vector<double>{1, 2, 3, 4});

  auto r = csip::matmul(T::from({1, 2}, {1, 2}), T::from({2, 1}, {3, 4}));
  CHECK(r.shape() == csip::Shape{1, 1});
  CHECK(r.item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  auto a = T::zeros({2, 3});
  auto b = T::zeros({2, 3});
  try {
    csip::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const csip::DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3] by [2,3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum matches finite differences") {
  auto b = testing::rand_tensor({4, 2}, 2);
  auto a = testing::rand_tensor({3, 4}, 1);
  auto fa = [&](const T& x) { return csip::sum(csip::matmul(x, b)); };
  auto fb = [&](const T& x) { return csip::sum(csip::matmul(a, x)); };
  CHECK(csip::grad_check(fa, a, 1e-5) < 1e-6);
  CHECK(csip::grad_check(fb, b, 1e-5) < 1e-6);
}

TEST_CASE("activation values") {
  auto z = T::from({1}, {0.0});
  CHECK(csip::sigmoid(z).item() == 0.5);
  CHECK(csip::tanh(z).item() == 0.0);
  CHECK(csip::relu(T::from({1}, {-3.0})).item() == 0.0);
  CHECK(csip::relu(T::from({1}, {2.5})).item() == 2.5);
}

TEST_CASE("sigmoid gradient at 1.2") {
  auto x = T::from({1}, {1.2}, true);
  auto y = csip::sigmoid(x);
  y.backward();
  const double s = testing::sigmoid(1.2);
  CHECK(x.grad()[0] == doctest::Approx(s * (1 - s)).epsilon(1e-12));
  auto f = [](const T& v) { return csip::sum(csip::sigmoid(v)); };
  CHECK(csip::grad_check(f, T::from({1}, {1.2}), 1e-5) < 1e-6);
}

TEST_CASE("softmax examples") {
  auto u = csip::softmax_lastaxis(T::from({3}, {0, 0, 0}));
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto big = csip::softmax_lastaxis(T::from({2}, {1000, 1000}));
  CHECK(big.data()[0] == 0.5);
  CHECK(big.data()[1] == 0.5);

  auto s = csip::softmax_lastaxis(T::from({3}, {1, 2, 3}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(std::abs(s.data()[0] - std::exp(1.0) / z) < 1e-12);
  CHECK(std::abs(s.data()[0] - 0.09003) < 1e-5);
  CHECK(std::abs(s.data()[1] - 0.24473) < 1e-5);
  CHECK(std::abs(s.data()[2] - 0.66524) < 1e-5);
}

TEST_CASE("softmax rows sum to one and ignore a constant shift") {
  auto x = testing::rand_tensor({5, 7}, 3, 4.0);
  auto s = csip::softmax_lastaxis(x);
  auto shifted = csip::softmax_lastaxis(csip::affine(x, 1.0, 17.0));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(s.data()[r * 7 + c] > 0.0);
      total += s.data()[r * 7 + c];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK(testing::max_abs_diff(s.data(), shifted.data()) < 1e-12);
}

TEST_CASE("grad_check contract") {
  auto x = testing::rand_tensor({3, 2}, 4);
  SUBCASE("linear function is exact") {
    auto f = [](const T& v) { return csip::sum(v); };
    auto xr = testing::rand_tensor({3, 2}, 4, 1.0, true);
    csip::sum(xr).backward();
    for (double g : xr.grad()) CHECK(g == 1.0);
    CHECK(csip::grad_check(f, x, 1e-5) < 1e-9);
  }
  SUBCASE("sigmoid of a product") {
    auto w = testing::rand_tensor({4, 3}, 5);
    auto v = testing::rand_tensor({3, 1}, 6);
    auto f = [&](const T& m) { return csip::sum(csip::sigmoid(csip::matmul(m, v))); };
    CHECK(csip::grad_check(f, w, 1e-5) < 1e-5);
  }
  SUBCASE("non-scalar output is rejected") {
    auto f = [](const T& v) { return csip::sigmoid(v); };
    CHECK_THROWS_AS(csip::grad_check(f, x, 1e-5), csip::ContractError);
  }
  SUBCASE("eps outside [1e-7, 1e-3] is rejected") {
    auto f = [](const T& v) { return csip::sum(v); };
    CHECK_THROWS_AS(csip::grad_check(f, x, 1e-2), csip::ContractError);
    CHECK_THROWS_AS(csip::grad_check(f, x, 1e-9), csip::ContractError);
  }
}

TEST_CASE("every primitive passes finite differences") {
  auto a = testing::rand_tensor({2, 3, 4}, 10);
  auto b = testing::rand_tensor({2, 3, 4}, 11);
  auto m = testing::rand_tensor({2, 4, 3}, 12);
  auto bias = testing::rand_tensor({4}, 13);
  auto w = testing::rand_tensor({2, 3, 4}, 14);  // fixed weighting so sums are not degenerate
  auto weigh = [&](const T& y) { return csip::sum(csip::mul(y, w)); };
  const double tol = 1e-5;

  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::add(x, b)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::sub(b, x)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::mul(x, x)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::add_bias(a, x)); }, bias, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::affine(x, 1.7, -0.3)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::sigmoid(x)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::tanh(x)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::relu(x)); }, a, 1e-6) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::softmax_lastaxis(x)); }, a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return csip::sum(csip::mul(csip::bmm(x, m), csip::bmm(x, m))); }, a,
                         1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return csip::sum(csip::bmm(a, x)); }, m, 1e-5) < tol);
  CHECK(csip::grad_check(
            [&](const T& x) {
              auto c = csip::concat_lastaxis<double>({x, b});
              return weigh(csip::slice_lastaxis(c, 2, 4));
            },
            a, 1e-5) < tol);
  CHECK(csip::grad_check(
            [&](const T& x) {
              auto s = csip::select_axis1(x, 1);
              return weigh(csip::stack_axis1<double>({s, csip::select_axis1(x, 2), s}));
            },
            a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::repeat_axis1(csip::select_axis1(x, 0), 3)); }, a,
                         1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::transpose_last2(csip::transpose_last2(x))); }, a,
                         1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return csip::sum(csip::mul(csip::transpose_last2(x), m)); }, a,
                         1e-5) < tol);
  auto pw = testing::rand_tensor({3, 3}, 16), pb = testing::rand_tensor({3}, 17);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::tanh(csip::project_axis1(x, pw, pb))); }, a, 1e-5) <
        tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::tanh(csip::project_axis1(a, x, pb))); }, pw, 1e-5) <
        tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::tanh(csip::project_axis1(a, pw, x))); }, pb, 1e-5) <
        tol);
  CHECK(csip::grad_check([&](const T& x) { return weigh(csip::reshape(csip::reshape(x, {6, 4}), {2, 3, 4})); },
                         a, 1e-5) < tol);
  CHECK(csip::grad_check(
            [&](const T& x) { return csip::sum(csip::mul(csip::drop_last_column(x), csip::drop_last_column(w))); },
            a, 1e-5) < tol);
  CHECK(csip::grad_check([&](const T& x) { return csip::mean(csip::mul(x, x)); }, a, 1e-5) < tol);
  auto mat = testing::rand_tensor({3, 4}, 15);
  auto rhs = testing::rand_tensor({4, 2}, 16);
  CHECK(csip::grad_check([&](const T& x) { return csip::sum(csip::tanh(csip::matmul(x, rhs))); }, mat, 1e-5) <
        tol);
}

TEST_CASE("composed 2x2 graph matches the hand chain rule") {
  // y = sum(tanh(A x)), dy/dx = A^T (1 - tanh^2(A x))
  auto A = T::from({2, 2}, {1.0, 2.0, -0.5, 0.25});
  auto x = T::from({2, 1}, {0.3, -0.2}, true);
  auto y = csip::sum(csip::tanh(csip::matmul(A, x)));
  y.backward();
  const double u0 = 1.0 * 0.3 + 2.0 * -0.2;
  const double u1 = -0.5 * 0.3 + 0.25 * -0.2;
  const double d0 = 1 - std::tanh(u0) * std::tanh(u0);
  const double d1 = 1 - std::tanh(u1) * std::tanh(u1);
  CHECK(std::abs(x.grad()[0] - (1.0 * d0 + -0.5 * d1)) < 1e-15);
  CHECK(std::abs(x.grad()[1] - (2.0 * d0 + 0.25 * d1)) < 1e-15);
}

TEST_CASE("gradients land exactly on tensors that require them") {
  auto a = testing::rand_tensor({2, 2}, 20, 1.0, true);
  auto b = testing::rand_tensor({2, 2}, 21);
  auto c = csip::mul(a, b);
  csip::sum(c).backward();
  CHECK(a.has_grad());
  CHECK_FALSE(b.has_grad());
}

TEST_CASE("gradients accumulate across backward calls") {
  auto a = T::from({2}, {1.0, 2.0}, true);
  csip::sum(a).backward();
  csip::sum(a).backward();
  CHECK(a.grad()[0] == 2.0);
  a.zero_grad();
  CHECK_FALSE(a.has_grad());
}

TEST_CASE("no-grad mode records nothing") {
  auto a = T::from({2}, {1.0, 2.0}, true);
  {
    csip::NoGradGuard guard;
    CHECK_FALSE(csip::grad_enabled());
    auto y = csip::sum(a);
    CHECK(y.node().parents.empty());
  }
  CHECK(csip::grad_enabled());
}

TEST_CASE("non-finite values are an error") {
  CHECK_THROWS_AS(T::from({2}, {1.0, std::nan("")}), csip::NumericError);
  CHECK_THROWS_AS(T::from({1}, {INFINITY}), csip::NumericError);
  auto big = T::from({1}, {1e308});
  CHECK_THROWS_AS(csip::check_finite(csip::mul(big, big), "square"), csip::NumericError);
}

TEST_CASE("shape contracts") {
  CHECK_THROWS_AS(T::from({2, 2}, {1, 2, 3}), csip::DimensionError);
  CHECK_THROWS_AS(csip::add(T::zeros({2}), T::zeros({3})), csip::DimensionError);
  CHECK_THROWS_AS(csip::add_bias(T::zeros({2, 3}), T::zeros({2})), csip::DimensionError);
  CHECK_THROWS_AS(csip::reshape(T::zeros({2, 3}), {4}), csip::DimensionError);
  CHECK_THROWS_AS(csip::bmm(T::zeros({2, 3, 4}), T::zeros({3, 4, 2})), csip::DimensionError);
}

TEST_CASE("dropout is inverted and identity at rate zero") {
  std::mt19937_64 rng(1);
  auto x = T::full({1000}, 1.0);
  auto same = csip::dropout(x, 0.0, rng);
  CHECK(testing::max_abs_diff(same.data(), x.data()) == 0.0);
  auto d = csip::dropout(x, 0.25, rng);
  std::size_t kept = 0;
  for (double v : d.data()) {
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-12));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
}

TEST_CASE("float32 path computes the same ops") {
  auto a = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
  auto b = Tensor<float>::from({2, 2}, {1, 0, 0, 1});
  auto p = csip::matmul(a, b);
  CHECK(p.data()[3] == 4.0f);
  CHECK(csip::softmax_lastaxis(Tensor<float>::from({2}, {3, 3})).data()[0] == 0.5f);
}
