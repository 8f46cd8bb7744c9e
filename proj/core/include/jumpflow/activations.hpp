#pragma once

namespace jumpflow {

/// log(1 + e^x), evaluated without overflow for large |x|.
double softplus(double x) noexcept;

/// d softplus / dx, i.e. the logistic sigmoid.
double softplus_grad(double x) noexcept;

/// Inverse of softplus for y > 0.
double softplus_inverse(double y) noexcept;

/// CELU with alpha = 1: max(0, x) + min(0, e^x - 1).
double celu(double x) noexcept;
double celu_grad(double x) noexcept;

}  // namespace jumpflow
