#include "jumpflow/activations.hpp"

#include <cmath>

namespace jumpflow {

double softplus(double x) noexcept {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double softplus_grad(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_inverse(double y) noexcept {
  if (y > 30.0) return y + std::log(-std::expm1(-y));
  return std::log(std::expm1(y));
}

double celu(double x) noexcept { return x > 0.0 ? x : std::expm1(x); }

double celu_grad(double x) noexcept { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace jumpflow
