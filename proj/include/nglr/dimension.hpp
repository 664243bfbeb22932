#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nglr/common.hpp"
#include "nglr/dataset.hpp"
#include "nglr/smoother.hpp"

namespace nglr {

enum class SdrMethod { OPG, MAVE };
enum class DimensionSelector { RRE, BIC, Fixed };

struct ProjectionEstimate {
  Eigen::MatrixXd b_hat;         // p x q_hat, orthonormal columns
  Eigen::VectorXd eigenvalues;   // OPG spectrum, descending (empty if unavailable)
  int q_hat = 1;
  SdrMethod method = SdrMethod::OPG;
  DimensionSelector selector = DimensionSelector::Fixed;
  int iterations = 0;            // MAVE sweeps
  bool converged = true;
  double pilot_bandwidth = 0.0;  // OPG bandwidth actually used
};

struct OpgEstimate {
  Eigen::MatrixXd sigma;        // (1/n) sum b_j b_j^T
  Eigen::VectorXd eigenvalues;  // descending, clamped at 0 if in (-1e-8, 0)
  Eigen::MatrixXd eigenvectors; // columns ordered to match
  double bandwidth = 0.0;
  int flagged_rows = 0;
  int min_support = 0;          // smallest in-support neighbour count over points
};

// Outer-product-of-gradients estimate at a given bandwidth: full p-dimensional
// local linear fit, then the spectral decomposition of the averaged gradient
// outer product.
inline OpgEstimate opg_estimate(const Dataset& data, double h, int threads = 1) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (!(h > 0.0)) throw config_error("opg_estimate: bandwidth must be > 0");
  if (n <= 2 * (p + 1)) throw config_error("opg_estimate: need n > 2(p+1)");

  const LocalLinearFit fit =
      local_linear_fit(data, Eigen::MatrixXd::Identity(p, p), h, threads);
  OpgEstimate out;
  out.bandwidth = h;
  out.flagged_rows = fit.n_flagged;
  out.min_support = *std::min_element(fit.support.begin(), fit.support.end());
  out.sigma = (fit.b_hat.transpose() * fit.b_hat) / static_cast<double>(n);
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.sigma);
  if (es.info() != Eigen::Success) throw numerical_error("opg_estimate: eigendecomposition failed");
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    double lam = es.eigenvalues()(p - 1 - k);  // Eigen returns ascending
    if (lam < 0.0 && lam > -1e-8) lam = 0.0;
    out.eigenvalues(k) = lam;
    out.eigenvectors.col(k) = es.eigenvectors().col(p - 1 - k);
  }
  return out;
}

// Pilot OPG pass. The compact-support product kernel can leave local systems
// with too little support when p is large relative to n, in which case the
// gradient estimates are noise and the spectrum of Sigma-hat is useless. The
// starting bandwidth scale*n^{-1/(p+4)} is therefore inflated by 1.25x until
// every point has at least 2(p+1) in-support neighbours (capped).
inline OpgEstimate opg_pilot(const Dataset& data, double scale = 1.5, int threads = 1) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const int target = static_cast<int>(std::min<Eigen::Index>(2 * (p + 1), n));
  double h = scale * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(p) + 4.0));
  const int max_grow = 40;
  for (int step = 0;; ++step) {
    try {
      OpgEstimate est = opg_estimate(data, h, threads);
      if (est.min_support >= target || step >= max_grow) return est;
    } catch (const numerical_error&) {
      if (step >= max_grow) throw;
    }
    h *= 1.25;
  }
}

// Ridge-type ratio estimate of the structural dimension:
//   q_hat = argmin_{k=1..p-1} (lambda_{k+1}+c)/(lambda_k+c), c = 1/sqrt(nh).
inline int rre_select_q(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double h) {
  const Eigen::Index p = eigenvalues.size();
  if (p < 2) throw config_error("rre_select_q: need at least 2 eigenvalues");
  if (!(n > 0) || !(h > 0.0)) throw config_error("rre_select_q: n and h must be positive");
  Eigen::VectorXd lam = eigenvalues;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (lam(k) < -1e-8)
      throw std::invalid_argument("rre_select_q: eigenvalue " + std::to_string(lam(k)) +
                                  " below -1e-8");
    if (lam(k) < 0.0) lam(k) = 0.0;
    if (k > 0 && lam(k) > lam(k - 1) + 1e-12)
      throw std::invalid_argument("rre_select_q: eigenvalues not descending");
  }
  const double c = 1.0 / std::sqrt(static_cast<double>(n) * h);
  int best_k = 1;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k < p; ++k) {
    const double ratio = (lam(k) + c) / (lam(k - 1) + c);
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best_k = static_cast<int>(k);
    }
  }
  return best_k;
}

struct MaveResult {
  Eigen::MatrixXd b_hat;  // p x q, orthonormal
  int iterations = 0;
  bool converged = true;
  double objective = std::numeric_limits<double>::quiet_NaN();  // weighted RSS, kernel /h^q
  double bandwidth = 0.0;                                       // h actually used
};

// Grows h by 1.25x until the median projected point has at least `target`
// in-support neighbours (self included) under the product kernel. Median, not
// minimum: isolated tail points are ridge-guarded in the local fits, and
// chasing them would over-smooth everywhere else.
inline double inflate_bandwidth_for_support(const Eigen::MatrixXd& z, double h0, int target,
                                            int max_grow = 40) {
  const Eigen::Index n = z.rows();
  double h = h0;
  std::vector<int> counts(static_cast<std::size_t>(n));
  for (int step = 0; step < max_grow; ++step) {
    for (Eigen::Index j = 0; j < n; ++j) {
      int count = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (detail::pair_kernel(z, i, j, 1.0 / h) > 0.0) ++count;
      counts[static_cast<std::size_t>(j)] = count;
    }
    std::nth_element(counts.begin(), counts.begin() + n / 2, counts.end());
    if (counts[static_cast<std::size_t>(n / 2)] >= std::min<int>(target, static_cast<int>(n)))
      return h;
    h *= 1.25;
  }
  return h;
}

namespace detail {

// largest principal angle between the column spans of two orthonormal bases
inline double principal_angle(const Eigen::MatrixXd& b1, const Eigen::MatrixXd& b2) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b1.transpose() * b2);
  const double smin = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(smin);
}

struct MaveLocals {
  Eigen::VectorXd a;        // n intercepts
  Eigen::MatrixXd d;        // n x q slopes in the projected coordinates
  Eigen::MatrixXd weights;  // n x n, column j holds the normalized local weights at x_j
  double weighted_rss = 0.0;
};

// Inner step of MAVE: local linear fit in the projected coordinates with
// weights normalized per centre point, w_ij = K_ij / sum_i K_ij, so the
// objective sums local conditional-variance estimates and stays comparable
// across dimensions.
inline MaveLocals mave_locals(const Dataset& data, const Eigen::MatrixXd& b, double h,
                              int threads) {
  const Eigen::Index n = data.n();
  const Eigen::Index q = b.cols();
  const Eigen::MatrixXd z = data.x * b;
  const double inv_h = 1.0 / h;

  MaveLocals loc;
  loc.a.resize(n);
  loc.d.resize(n, q);
  loc.weights = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rss_per_point = Eigen::VectorXd::Zero(n);

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t jj) {
    const Eigen::Index j = static_cast<Eigen::Index>(jj);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double k = pair_kernel(z, i, j, inv_h);
      loc.weights(i, j) = k;
      mass += k;
    }
    if (mass <= 0.0) {
      loc.weights.col(j).setConstant(1.0 / static_cast<double>(n));
      mass = 1.0;
    } else {
      loc.weights.col(j) /= mass;
    }

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q + 1, q + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q + 1);
    Eigen::VectorXd v(q + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = loc.weights(i, j);
      if (w == 0.0) continue;
      v(0) = 1.0;
      v.tail(q) = (z.row(i) - z.row(j)).transpose();
      m.selfadjointView<Eigen::Lower>().rankUpdate(v, w);
      rhs += (w * data.y(i)) * v;
    }
    Eigen::MatrixXd mfull = Eigen::MatrixXd(m.selfadjointView<Eigen::Lower>());
    Eigen::VectorXd coef = mfull.ldlt().solve(rhs);
    if (!coef.allFinite() || (mfull * coef - rhs).norm() > 1e-6 * (rhs.norm() + 1.0)) {
      mfull.diagonal().array() += 1e-8 * std::max(mfull.trace(), 1e-300);
      coef = mfull.ldlt().solve(rhs);
      if (!coef.allFinite()) coef = Eigen::VectorXd::Zero(q + 1);
    }
    loc.a(j) = coef(0);
    loc.d.row(j) = coef.tail(q);
    double rss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = loc.weights(i, j);
      if (w == 0.0) continue;
      const double r = data.y(i) - coef(0) - coef.tail(q).dot((z.row(i) - z.row(j)).transpose());
      rss += r * r * w;
    }
    rss_per_point(j) = rss;
  });
  loc.weighted_rss = rss_per_point.sum();
  return loc;
}

}  // namespace detail

// Minimum average variance estimation. Alternates (a_j, d_j) local fits with
// the quadratic problem in vec(B), re-orthonormalizing after each sweep.
// Stops when the largest principal angle between successive subspaces falls
// below tol; a non-decreasing objective on 3 consecutive sweeps returns the
// best iterate with converged = false.
inline MaveResult mave_estimate(const Dataset& data, int q, double h,
                                const Eigen::MatrixXd& init, int max_iter = 50,
                                double tol = 1e-4, int threads = 1) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (q < 1 || q > p) throw config_error("mave_estimate: need 1 <= q <= p");
  if (!(h > 0.0)) throw config_error("mave_estimate: bandwidth must be > 0");
  if (init.rows() != p || init.cols() != q)
    throw config_error("mave_estimate: init must be p x q");

  Eigen::MatrixXd b = init;
  if (b.colPivHouseholderQr().rank() < q)
    throw config_error("mave_estimate: init columns are not independent");
  detail::orthonormalize_columns(b, 0.0);  // always orthonormalize the start

  MaveResult best;
  best.b_hat = b;
  best.bandwidth = h;
  best.converged = false;
  double prev_objective = std::numeric_limits<double>::infinity();
  int non_decreasing = 0;

  for (int sweep = 0; sweep < max_iter; ++sweep) {
    const detail::MaveLocals loc = detail::mave_locals(data, b, h, threads);
    if (sweep == 0 || loc.weighted_rss < best.objective) {
      best.objective = loc.weighted_rss;
      best.b_hat = b;
      best.iterations = sweep;
    }
    if (loc.weighted_rss >= prev_objective - 1e-14 * (1.0 + prev_objective)) {
      if (++non_decreasing >= 3) {
        best.converged = false;
        best.iterations = sweep + 1;
        return best;
      }
    } else {
      non_decreasing = 0;
    }
    prev_objective = loc.weighted_rss;

    // quadratic step in vec(B): A = sum_j (d_j d_j^T) (x) G_j with
    // G_j = sum_i w_ij x_ij x_ij^T, rhs = sum_j d_j (x) g_j
    Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(p * q, p * q);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p * q);
    Eigen::MatrixXd gj(p, p);
    Eigen::VectorXd gv(p);
    Eigen::VectorXd xij(p);
    for (Eigen::Index j = 0; j < n; ++j) {
      gj.setZero();
      gv.setZero();
      bool any = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = loc.weights(i, j);
        if (w == 0.0) continue;
        any = true;
        xij = (data.x.row(i) - data.x.row(j)).transpose();
        gj.selfadjointView<Eigen::Lower>().rankUpdate(xij, w);
        gv += (w * (data.y(i) - loc.a(j))) * xij;
      }
      if (!any) continue;
      gj = Eigen::MatrixXd(gj.selfadjointView<Eigen::Lower>());
      const Eigen::VectorXd dj = loc.d.row(j).transpose();
      for (Eigen::Index c1 = 0; c1 < q; ++c1) {
        rhs.segment(c1 * p, p) += dj(c1) * gv;
        for (Eigen::Index c2 = 0; c2 <= c1; ++c2)
          a_mat.block(c1 * p, c2 * p, p, p) += (dj(c1) * dj(c2)) * gj;
      }
    }
    for (Eigen::Index c1 = 0; c1 < q; ++c1)
      for (Eigen::Index c2 = c1 + 1; c2 < q; ++c2)
        a_mat.block(c1 * p, c2 * p, p, p) = a_mat.block(c2 * p, c1 * p, p, p).transpose();

    a_mat.diagonal().array() += 1e-10 * std::max(a_mat.trace(), 1e-300);
    const Eigen::VectorXd vb = a_mat.ldlt().solve(rhs);
    Eigen::MatrixXd b_new = Eigen::Map<const Eigen::MatrixXd>(vb.data(), p, q);
    if (!b_new.allFinite() || b_new.colPivHouseholderQr().rank() < q) {
      best.converged = false;
      best.iterations = sweep + 1;
      return best;  // degenerate step; keep the best basis seen so far
    }
    detail::orthonormalize_columns(b_new, 0.0);

    const double angle = detail::principal_angle(b, b_new);
    b = b_new;
    if (angle < tol) {
      const detail::MaveLocals fin = detail::mave_locals(data, b, h, threads);
      MaveResult out;
      out.bandwidth = h;
      out.iterations = sweep + 1;
      out.converged = true;
      if (fin.weighted_rss <= best.objective * (1.0 + 1e-9)) {
        out.b_hat = b;
        out.objective = fin.weighted_rss;
      } else {
        out.b_hat = best.b_hat;  // converged to a worse basin; keep the best iterate
        out.objective = best.objective;
      }
      return out;
    }
  }
  best.converged = false;
  best.iterations = max_iter;
  return best;
}

// penalty term of the modified BIC: log(n) k / min(n h^k, sqrt n)
inline double bic_penalty(Eigen::Index n, double h, int k) {
  return std::log(static_cast<double>(n)) * k /
         std::min(static_cast<double>(n) * std::pow(h, k), std::sqrt(static_cast<double>(n)));
}

// Modified BIC over k = 1..p: run MAVE at dimension k with h_k from the
// bandwidth rule, then minimize log(RSS_k/n) + log(n) k / min(n h_k^k, sqrt n).
inline int bic_select_q(const Dataset& data, const OpgEstimate& pilot,
                        double bandwidth_scale = 1.5, int max_iter = 50, double tol = 1e-4,
                        int threads = 1) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (n < 2 * (p + 2)) throw config_error("bic_select_q: need n >= 2(p+2)");

  int best_k = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  std::string failures;
  for (int k = 1; k <= p; ++k) {
    try {
      const Eigen::MatrixXd init = pilot.eigenvectors.leftCols(k);
      const double h0 = bandwidth_scale *
                        std::pow(static_cast<double>(n), -1.0 / (4.0 + static_cast<double>(k)));
      const double hk = inflate_bandwidth_for_support(data.x * init, h0, 6 * (k + 1));
      const MaveResult mv = mave_estimate(data, k, hk, init, max_iter, tol, threads);
      const double rss_k = std::max(mv.objective, 1e-300);
      const double bic = std::log(rss_k / static_cast<double>(n)) + bic_penalty(n, hk, k);
      if (bic < best_bic) {
        best_bic = bic;
        best_k = k;
      }
    } catch (const std::exception& e) {
      failures += std::string(failures.empty() ? "" : "; ") + "k=" + std::to_string(k) + ": " +
                  e.what();
    }
  }
  if (best_k == 0)
    throw numerical_error("bic_select_q: MAVE failed at every dimension (" + failures + ")");
  return best_k;
}

}  // namespace nglr
