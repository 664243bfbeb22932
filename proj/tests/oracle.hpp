#pragma once

// Independent reference implementations of every statistic, written as plain
// double/triple loops over std::vector<double>, straight from the formulas.
// They deliberately share no code with the library headers: the kernel is
// restated inline, the weights are built by hand, and the eta0 triple sum is
// the literal O(n^3) loop. Production code must match these to 1e-10.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // row-major

inline double kernel(double u) {
  const double a = std::fabs(u);
  if (a >= 1.0) return 0.0;
  const double t = 1.0 - u * u;
  return (15.0 / 16.0) * t * t;
}

// projected data: z[i][l] = sum_c x[i][c] * b[c][l]
inline Mat project(const Mat& x, const Mat& b) {
  const std::size_t n = x.size();
  const std::size_t p = x[0].size();
  const std::size_t q = b[0].size();
  Mat z(n, Vec(q, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < q; ++l)
      for (std::size_t c = 0; c < p; ++c) z[i][l] += x[i][c] * b[c][l];
  return z;
}

// Product-kernel weight matrix on projected rows, full or leave-one-out.
// Rows with raw mass below n*1e-12 get the uniform fallback over j != i.
inline Mat weights(const Mat& z, double h, bool loo) {
  const std::size_t n = z.size();
  const std::size_t q = z[0].size();
  Mat w(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    Vec raw(n, 0.0);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (loo && j == i) continue;
      double k = 1.0;
      for (std::size_t l = 0; l < q; ++l) k *= kernel((z[i][l] - z[j][l]) / h);
      raw[j] = k;
      denom += k;
    }
    if (denom < n * 1e-12) {
      for (std::size_t j = 0; j < n; ++j) w[i][j] = (j == i) ? 0.0 : 1.0 / double(n - 1);
    } else {
      for (std::size_t j = 0; j < n; ++j) w[i][j] = raw[j] / denom;
    }
  }
  return w;
}

inline Vec smooth(const Mat& w, const Vec& y) {
  const std::size_t n = y.size();
  Vec m(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i] += w[i][j] * y[j];
  return m;
}

struct TnOracle {
  double t_n, rss0, rss1;
  double l1, l2, l3, eta0_sq, q1, v0;
  double s_n;
};

// T_n, the nuisance plug-ins, and S_n, all from scratch.
inline TnOracle tn_chain(const Vec& y, const Vec& e, const Mat& z, double h) {
  const std::size_t n = y.size();
  const Mat w = weights(z, h, false);
  const Vec m = smooth(w, y);

  TnOracle o{};
  for (std::size_t i = 0; i < n; ++i) {
    o.rss0 += e[i] * e[i];
    o.rss1 += (y[i] - m[i]) * (y[i] - m[i]);
  }
  o.t_n = 0.5 * double(n) * std::log(o.rss0 / o.rss1);

  Vec xi(n);  // nonparametric residuals
  for (std::size_t i = 0; i < n; ++i) xi[i] = y[i] - m[i];

  o.l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) o.l1 += xi[i] * xi[i];
  o.l1 /= double(n);

  o.l2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) o.l2 += w[i][j] * w[i][j] * xi[j] * xi[j];
  o.l2 *= h;

  o.l3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) o.l3 += w[i][i] * xi[i] * xi[i];
  o.l3 *= h;

  o.eta0_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double c = 0.0;
      for (std::size_t k = 0; k < n; ++k) c += w[k][i] * w[k][j];
      const double t = w[i][j] + w[j][i] - c;
      o.eta0_sq += xi[i] * xi[i] * xi[j] * xi[j] * t * t;
    }
  }
  o.eta0_sq *= 2.0 * h;

  o.q1 = (o.l3 - 0.5 * o.l2) / o.l1;
  o.v0 = o.eta0_sq / (4.0 * o.l1 * o.l1);
  o.s_n = std::sqrt(h) / std::sqrt(o.v0) * (o.t_n - o.q1 / h);
  return o;
}

struct RnOracle {
  double t_tilde, r_n, v1;
};

// Bias-corrected chain: leave-one-out weights, residual-product RSS~1, R_n.
inline RnOracle rn_chain(const Vec& y, const Vec& e, const Mat& z, double h) {
  const std::size_t n = y.size();
  const Mat w = weights(z, h, true);
  const Vec m = smooth(w, y);

  double rss0 = 0.0, rss1_tilde = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rss0 += std::fabs(e[i]) * std::fabs(e[i]);
    rss1_tilde += std::fabs(e[i] * (y[i] - m[i]));
  }
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      den += w[i][j] * w[i][j] * e[i] * e[i] * e[j] * e[j];
    }

  RnOracle o{};
  o.t_tilde = 0.5 * double(n) * (rss0 - rss1_tilde) / rss1_tilde;
  o.r_n = (rss0 - rss1_tilde) / std::sqrt(2.0 * den);
  o.v1 = h * den / (2.0 * (rss1_tilde / double(n)) * (rss1_tilde / double(n)));
  return o;
}

// Full-dimensional baseline statistic: identity projection, same T_n formula.
inline double tbar(const Vec& y, const Vec& e, const Mat& x, double h) {
  const std::size_t n = y.size();
  const Mat w = weights(x, h, false);
  const Vec m = smooth(w, y);
  double rss0 = 0.0, rss1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rss0 += e[i] * e[i];
    rss1 += (y[i] - m[i]) * (y[i] - m[i]);
  }
  return 0.5 * double(n) * std::log(rss0 / rss1);
}

}  // namespace oracle
