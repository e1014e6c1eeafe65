#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "csip/tensor.hpp"

namespace testing {

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline csip::Tensor<double> rand_tensor(const csip::Shape& shape, std::uint64_t seed, double scale = 1.0,
                                        bool requires_grad = false) {
  return csip::Tensor<double>::from(shape, randn(csip::shape_numel(shape), seed, scale), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace testing
