#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nglr/common.hpp"
#include "nglr/dataset.hpp"
#include "nglr/kernel.hpp"

namespace nglr {

struct SmootherWeights {
  Eigen::MatrixXd w;  // n x n, rows sum to 1 for retained rows
  bool loo = false;
  double bandwidth = 0.0;
  int q_used = 0;
  std::vector<Eigen::Index> dropped;  // rows whose raw kernel mass fell below the floor
  std::vector<char> is_dropped;       // size n indicator
  bool orthonormalized_input = false; // projection matrix was re-orthonormalized on entry

  Eigen::Index n_retained() const {
    return w.rows() - static_cast<Eigen::Index>(dropped.size());
  }
};

struct LocalLinearFit {
  Eigen::VectorXd a_hat;  // n local intercepts
  Eigen::MatrixXd b_hat;  // n x p local gradient estimates
  double bandwidth = 0.0;
  std::vector<char> flagged;  // rows with fewer than p+2 in-support neighbours
  std::vector<int> support;   // in-support neighbour count per row (self included)
  int n_flagged = 0;
};

namespace detail {

// Gram-Schmidt with a tolerance check; returns whether input needed fixing.
inline bool orthonormalize_columns(Eigen::MatrixXd& b, double tol = 1e-6) {
  bool already = true;
  const Eigen::MatrixXd gram = b.transpose() * b;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(b.cols(), b.cols());
  if ((gram - eye).cwiseAbs().maxCoeff() > tol) already = false;
  if (!already) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(b.rows(), b.cols());
    // keep the orientation of the original columns where possible
    const Eigen::MatrixXd r = qr.matrixQR().topRows(b.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    b = q;
  }
  return !already;
}

// product quartic kernel of the scaled difference of two projected rows
inline double pair_kernel(const Eigen::MatrixXd& z, Eigen::Index i, Eigen::Index j, double inv_h) {
  double k = 1.0;
  for (Eigen::Index l = 0; l < z.cols(); ++l) {
    k *= quartic_kernel((z(i, l) - z(j, l)) * inv_h);
    if (k == 0.0) return 0.0;
  }
  return k;
}

}  // namespace detail

// Nadaraya-Watson weight matrix over the projected covariates B^T x. Entry
// (i,j) is the product quartic kernel of B^T(x_i-x_j)/h normalized by the row
// sum; with loo the j = i term is excluded from numerator and denominator.
// Rows whose raw mass falls below n*1e-12 are recorded in `dropped` and given
// a uniform fallback over the other points so every row remains a proper
// weight row.
inline SmootherWeights nw_weight_matrix(const Eigen::MatrixXd& x, Eigen::MatrixXd b, double h,
                                        bool loo) {
  if (!(h > 0.0)) throw config_error("nw_weight_matrix: bandwidth must be > 0");
  if (b.rows() != x.cols() || b.cols() < 1 || b.cols() > b.rows())
    throw config_error("nw_weight_matrix: projection matrix must be p x q with 1 <= q <= p");

  SmootherWeights sw;
  sw.orthonormalized_input = detail::orthonormalize_columns(b);
  sw.loo = loo;
  sw.bandwidth = h;
  sw.q_used = static_cast<int>(b.cols());

  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd z = x * b;
  const double inv_h = 1.0 / h;
  const double floor = static_cast<double>(n) * 1e-12;

  sw.w = Eigen::MatrixXd::Zero(n, n);
  sw.is_dropped.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd raw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double k = (loo && j == i) ? 0.0 : detail::pair_kernel(z, i, j, inv_h);
      raw(j) = k;
      denom += k;
    }
    if (denom < floor) {
      sw.dropped.push_back(i);
      sw.is_dropped[static_cast<std::size_t>(i)] = 1;
      if (n > 1) {
        const double u = 1.0 / static_cast<double>(n - 1);
        for (Eigen::Index j = 0; j < n; ++j) sw.w(i, j) = (j == i) ? 0.0 : u;
      }
    } else {
      sw.w.row(i) = raw.transpose() / denom;
    }
  }
  if (static_cast<Eigen::Index>(sw.dropped.size()) == n)
    throw numerical_error("nw_weight_matrix: degenerate bandwidth, every row dropped");
  return sw;
}

// Local linear fit at every sample point: weighted LS of y on (1, x_i - x_j)
// with kernel weights on B^T(x_i - x_j)/h. Points with fewer than p+2
// in-support neighbours are flagged and solved with ridge 1e-8 * trace.
inline LocalLinearFit local_linear_fit(const Dataset& data, Eigen::MatrixXd b, double h,
                                       int threads = 1) {
  if (!(h > 0.0)) throw config_error("local_linear_fit: bandwidth must be > 0");
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  detail::orthonormalize_columns(b);
  const Eigen::MatrixXd z = data.x * b;
  const double inv_h = 1.0 / h;

  LocalLinearFit fit;
  fit.bandwidth = h;
  fit.a_hat.resize(n);
  fit.b_hat.resize(n, p);
  fit.flagged.assign(static_cast<std::size_t>(n), 0);
  fit.support.assign(static_cast<std::size_t>(n), 0);

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t jj) {
    const Eigen::Index j = static_cast<Eigen::Index>(jj);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p + 1, p + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd v(p + 1);
    int support = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double k = detail::pair_kernel(z, i, j, inv_h);
      if (k == 0.0) continue;
      ++support;
      v(0) = 1.0;
      v.tail(p) = (data.x.row(i) - data.x.row(j)).transpose();
      m.selfadjointView<Eigen::Lower>().rankUpdate(v, k);
      rhs += (k * data.y(i)) * v;
    }
    m = Eigen::MatrixXd(m.selfadjointView<Eigen::Lower>());
    fit.support[jj] = support;
    const bool low_support = support < p + 2;
    if (low_support) fit.flagged[jj] = 1;
    Eigen::VectorXd coef;
    if (!low_support) {
      coef = m.ldlt().solve(rhs);
      const bool ok = coef.allFinite() && (m * coef - rhs).norm() <= 1e-6 * (rhs.norm() + 1.0);
      if (!ok) {
        fit.flagged[jj] = 1;
        coef.resize(0);
      }
    }
    if (coef.size() == 0) {
      Eigen::MatrixXd mr = m;
      const double ridge = 1e-8 * std::max(m.trace(), 1e-300);
      mr.diagonal().array() += ridge;
      coef = mr.ldlt().solve(rhs);
      if (!coef.allFinite()) coef = Eigen::VectorXd::Zero(p + 1);
    }
    fit.a_hat(j) = coef(0);
    fit.b_hat.row(j) = coef.tail(p);
  });

  for (char f : fit.flagged) fit.n_flagged += f;
  if (2 * fit.n_flagged > n)
    throw numerical_error("local_linear_fit: " + std::to_string(fit.n_flagged) + " of " +
                          std::to_string(n) + " local systems lack support");
  return fit;
}

}  // namespace nglr
