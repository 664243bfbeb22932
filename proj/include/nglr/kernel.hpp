#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nglr/common.hpp"

namespace nglr {

// Quartic (biweight) kernel: K(u) = 15/16 (1-u^2)^2 on [-1,1], 0 outside.
inline double quartic_kernel(double u) {
  if (!std::isfinite(u)) throw std::invalid_argument("quartic_kernel: non-finite argument");
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double t = 1.0 - u * u;
  return 0.9375 * t * t;
}

// Coordinate-wise product of quartic kernels; zero as soon as one coordinate
// leaves the support.
inline double product_kernel(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("product_kernel: empty argument");
  double k = 1.0;
  for (const double ui : u) {
    k *= quartic_kernel(ui);
    if (k == 0.0) return 0.0;
  }
  return k;
}

struct KernelConstants {
  double k_at_zero = 0.9375;               // K(0) = 15/16
  double int_k_squared = 0.0;              // ∫ K^2(u) du
  double int_two_k_minus_conv_squared = 0.0;  // ∫ [2K(u) - K*K(u)]^2 du
  double quadrature_tolerance = 0.0;
};

namespace detail {

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  if (depth <= 0) throw numerical_error("adaptive quadrature did not converge within tolerance");
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 48) {
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace detail

// K*K(x) = ∫ K(t) K(x-t) dt; support [-2,2].
inline double quartic_convolution(double x, double tol = 1e-12) {
  const double lo = std::max(-1.0, x - 1.0);
  const double hi = std::min(1.0, x + 1.0);
  if (lo >= hi) return 0.0;
  return detail::adaptive_simpson(
      [x](double t) { return quartic_kernel(t) * quartic_kernel(x - t); }, lo, hi, tol);
}

// Computes the kernel constants entering the Wilks-type standardization.
// ∫K^2 by adaptive quadrature on [-1,1]; the convolution term on a cached
// 4097-point grid over [-2,2], then composite Simpson.
inline KernelConstants kernel_constants(double tolerance = 1e-10) {
  if (!(tolerance > 0.0)) throw config_error("kernel_constants: tolerance must be > 0");
  KernelConstants c;
  c.quadrature_tolerance = tolerance;
  c.k_at_zero = quartic_kernel(0.0);
  c.int_k_squared = detail::adaptive_simpson(
      [](double u) { double k = quartic_kernel(u); return k * k; }, -1.0, 1.0, tolerance);

  constexpr int grid_n = 4097;  // even number of intervals for composite Simpson
  const double a = -2.0, b = 2.0;
  const double step = (b - a) / (grid_n - 1);
  const double inner_tol = tolerance / 8.0;
  std::vector<double> g(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double x = a + step * i;
    const double v = 2.0 * quartic_kernel(x) - quartic_convolution(x, inner_tol);
    g[i] = v * v;
  }
  double sum = g.front() + g.back();
  for (int i = 1; i + 1 < grid_n; ++i) sum += g[i] * ((i % 2 == 1) ? 4.0 : 2.0);
  c.int_two_k_minus_conv_squared = sum * step / 3.0;
  return c;
}

}  // namespace nglr
