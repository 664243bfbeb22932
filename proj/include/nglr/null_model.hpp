#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include "nglr/common.hpp"
#include "nglr/dataset.hpp"
#include "nglr/rng.hpp"

namespace nglr {

enum class NullForm { Linear, ScaledExp, Custom };

// User-supplied single-index mean g(s, theta), s = beta^T x. Derivatives are
// optional; central finite differences are used where absent.
struct CustomMean {
  int theta_dim = 0;
  std::function<double(double, const Eigen::VectorXd&)> value;
  std::function<double(double, const Eigen::VectorXd&)> d_index;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> d_theta;
};

struct NullModelSpec {
  NullForm form = NullForm::Linear;
  int p = 0;
  bool intercept = false;  // Linear only: g = beta^T x + theta0
  CustomMean custom;       // Custom only

  int theta_dim() const {
    switch (form) {
      case NullForm::Linear:
        return intercept ? 1 : 0;
      case NullForm::ScaledExp:
        return 2;  // g = theta1 * exp(theta2 * beta^T x)
      case NullForm::Custom:
        return custom.theta_dim;
    }
    return 0;
  }
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-12;  // relative RSS decrease
  int restarts = 5;
  std::uint64_t seed = 0x5eedULL;
  double initial_damping = 1e-3;
};

struct NullModelFit {
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd residuals;  // e_i = y_i - g(beta^T x_i, theta)
  double rss0 = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Non-convergence after all restarts; carries the best iterate found.
class convergence_error : public numerical_error {
 public:
  convergence_error(const std::string& msg, NullModelFit best)
      : numerical_error(msg), best_fit(std::move(best)) {}
  NullModelFit best_fit;
};

inline Eigen::VectorXd predict_null(const NullModelSpec& spec, const Eigen::VectorXd& beta,
                                    const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd s = x * beta;
  switch (spec.form) {
    case NullForm::Linear: {
      Eigen::VectorXd g = s;
      if (spec.intercept) g.array() += theta(0);
      return g;
    }
    case NullForm::ScaledExp:
      return theta(0) * (theta(1) * s.array()).exp().matrix();
    case NullForm::Custom: {
      Eigen::VectorXd g(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i) g(i) = spec.custom.value(s(i), theta);
      return g;
    }
  }
  throw config_error("predict_null: unknown form");
}

namespace detail {

// Nonlinear forms are fitted over one packed parameter vector.
//   ScaledExp: params = (theta1, b[0..p)), g = theta1 * exp(b^T x); afterwards
//              b is split into theta2 = sign*|b| and a unit beta.
//   Custom:    params = (beta[0..p), theta[0..d)).
struct PackedModel {
  const NullModelSpec& spec;
  const Eigen::MatrixXd& x;

  int dim() const {
    return spec.form == NullForm::ScaledExp ? spec.p + 1 : spec.p + spec.custom.theta_dim;
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& params) const {
    if (spec.form == NullForm::ScaledExp) {
      const Eigen::VectorXd s = x * params.tail(spec.p);
      return params(0) * s.array().exp().matrix();
    }
    const Eigen::VectorXd beta = params.head(spec.p);
    const Eigen::VectorXd theta = params.tail(spec.custom.theta_dim);
    return predict_null(spec, beta, theta, x);
  }

  // Jacobian of g w.r.t. params, n x dim. Analytic for ScaledExp and for
  // Custom with supplied derivatives; otherwise central differences with
  // step 1e-6 * (1 + |param|).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& params) const {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd jac(n, dim());
    if (spec.form == NullForm::ScaledExp) {
      const Eigen::VectorXd s = x * params.tail(spec.p);
      const Eigen::ArrayXd es = s.array().exp();
      jac.col(0) = es.matrix();
      for (int l = 0; l < spec.p; ++l)
        jac.col(1 + l) = (params(0) * es * x.col(l).array()).matrix();
      return jac;
    }
    const bool analytic = static_cast<bool>(spec.custom.d_index) &&
                          (spec.custom.theta_dim == 0 || static_cast<bool>(spec.custom.d_theta));
    if (analytic) {
      const Eigen::VectorXd beta = params.head(spec.p);
      const Eigen::VectorXd theta = params.tail(spec.custom.theta_dim);
      const Eigen::VectorXd s = x * beta;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double gs = spec.custom.d_index(s(i), theta);
        for (int l = 0; l < spec.p; ++l) jac(i, l) = gs * x(i, l);
        if (spec.custom.theta_dim > 0) {
          const Eigen::VectorXd gt = spec.custom.d_theta(s(i), theta);
          for (int t = 0; t < spec.custom.theta_dim; ++t) jac(i, spec.p + t) = gt(t);
        }
      }
      return jac;
    }
    Eigen::VectorXd pp = params;
    for (int k = 0; k < dim(); ++k) {
      const double step = 1e-6 * (1.0 + std::fabs(params(k)));
      pp(k) = params(k) + step;
      const Eigen::VectorXd gp = predict(pp);
      pp(k) = params(k) - step;
      const Eigen::VectorXd gm = predict(pp);
      pp(k) = params(k);
      jac.col(k) = (gp - gm) / (2.0 * step);
    }
    return jac;
  }
};

struct LmOutcome {
  Eigen::VectorXd params;
  double rss = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

// Damped Gauss-Newton (Levenberg-Marquardt, diagonal scaling).
inline LmOutcome levenberg_marquardt(const PackedModel& model, const Eigen::VectorXd& y,
                                     Eigen::VectorXd params, const FitOptions& opt) {
  LmOutcome out;
  Eigen::VectorXd g = model.predict(params);
  double rss = (y - g).squaredNorm();
  double damping = opt.initial_damping;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    const Eigen::VectorXd r = y - g;
    const Eigen::MatrixXd jac = model.jacobian(params);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    if (jtr.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + rss)) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 25; ++attempt) {
      Eigen::MatrixXd a = jtj;
      for (int k = 0; k < a.rows(); ++k)
        a(k, k) += damping * std::max(jtj(k, k), 1e-12);
      const Eigen::VectorXd delta = a.ldlt().solve(jtr);
      if (!delta.allFinite()) {
        damping *= 10.0;
        continue;
      }
      const Eigen::VectorXd trial = params + delta;
      const Eigen::VectorXd gt = model.predict(trial);
      const double trial_rss = (y - gt).squaredNorm();
      if (std::isfinite(trial_rss) && trial_rss <= rss) {
        const double drop = rss - trial_rss;
        params = trial;
        g = gt;
        rss = trial_rss;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        if (drop <= opt.tolerance * (1.0 + rss) || delta.norm() < 1e-14) out.converged = true;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted || out.converged) break;
  }
  out.params = std::move(params);
  out.rss = rss;
  out.iterations = iter;
  return out;
}

inline NullModelFit fit_linear(const Dataset& data, const NullModelSpec& spec) {
  const Eigen::Index n = data.n();
  const Eigen::Index cols = spec.p + (spec.intercept ? 1 : 0);
  Eigen::MatrixXd design(n, cols);
  design.leftCols(spec.p) = data.x;
  if (spec.intercept) design.col(spec.p).setOnes();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols)
    throw numerical_error("fit_null_model: singular design (rank " +
                          std::to_string(qr.rank()) + " < " + std::to_string(cols) + ")");
  const Eigen::VectorXd coef = qr.solve(data.y);
  NullModelFit fit;
  fit.beta_hat = coef.head(spec.p);
  fit.theta_hat = spec.intercept ? Eigen::VectorXd::Constant(1, coef(spec.p)) : Eigen::VectorXd();
  fit.residuals = data.y - design * coef;
  fit.rss0 = fit.residuals.squaredNorm();
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

}  // namespace detail

// Least-squares fit of the hypothesised mean. Linear forms are solved by QR;
// nonlinear forms by Levenberg-Marquardt from a pilot start with random
// restarts drawn from a unit ball around the pilot.
inline NullModelFit fit_null_model(const Dataset& data, const NullModelSpec& spec,
                                   const FitOptions& opt = {}) {
  const Eigen::Index n = data.n();
  if (spec.p != data.p())
    throw config_error("fit_null_model: spec.p=" + std::to_string(spec.p) + " but data has p=" +
                       std::to_string(data.p()));
  if (n <= spec.p + spec.theta_dim())
    throw config_error("fit_null_model: need n > p + d");
  if (!data.x.allFinite() || !data.y.allFinite())
    throw data_error("fit_null_model: non-finite entries in data");

  if (spec.form == NullForm::Linear) return detail::fit_linear(data, spec);
  if (spec.form == NullForm::Custom && !spec.custom.value)
    throw config_error("fit_null_model: Custom form without mean function");

  const detail::PackedModel model{spec, data.x};

  // pilot: linear LS direction; for ScaledExp on positive responses a
  // log-scale regression gives (theta1, b) directly
  Eigen::VectorXd pilot = Eigen::VectorXd::Zero(model.dim());
  {
    Eigen::MatrixXd design(n, spec.p + 1);
    design.leftCols(spec.p) = data.x;
    design.col(spec.p).setOnes();
    const Eigen::VectorXd lin = design.colPivHouseholderQr().solve(data.y);
    if (spec.form == NullForm::ScaledExp) {
      if ((data.y.array() > 0.0).all()) {
        const Eigen::VectorXd logy = data.y.array().log().matrix();
        const Eigen::VectorXd ll = design.colPivHouseholderQr().solve(logy);
        pilot(0) = std::exp(ll(spec.p));
        pilot.tail(spec.p) = ll.head(spec.p);
      } else {
        pilot(0) = data.y.mean() != 0.0 ? data.y.mean() : 1.0;
        pilot.tail(spec.p) = lin.head(spec.p) / std::max(1.0, std::fabs(pilot(0)));
      }
    } else {
      pilot.head(spec.p) = lin.head(spec.p);
      // theta part left at zero unless the caller seeds it via restarts
    }
  }

  Rng rng(opt.seed, 0xf17ULL);
  detail::LmOutcome best;
  int total_iterations = 0;
  for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
    Eigen::VectorXd start = pilot;
    if (attempt > 0) {
      // uniform direction in the unit ball around the pilot
      Eigen::VectorXd u(model.dim());
      for (int k = 0; k < model.dim(); ++k) u(k) = rng.normal();
      u *= std::pow(rng.uniform01(), 1.0 / model.dim()) / u.norm();
      start += u;
    }
    const detail::LmOutcome res = detail::levenberg_marquardt(model, data.y, start, opt);
    total_iterations += res.iterations;
    if (res.rss < best.rss || (res.converged && !best.converged && res.rss <= best.rss * (1.0 + 1e-9)))
      best = res;
    if (best.converged) break;
  }

  NullModelFit fit;
  if (spec.form == NullForm::ScaledExp) {
    const Eigen::VectorXd b = best.params.tail(spec.p);
    const double norm = b.norm();
    fit.theta_hat.resize(2);
    fit.theta_hat(0) = best.params(0);
    if (norm > 0.0) {
      Eigen::VectorXd beta = b / norm;
      double sign = 1.0;
      for (Eigen::Index k = 0; k < beta.size(); ++k) {
        if (beta(k) != 0.0) {
          sign = beta(k) > 0.0 ? 1.0 : -1.0;
          break;
        }
      }
      fit.beta_hat = sign * beta;
      fit.theta_hat(1) = sign * norm;
    } else {
      fit.beta_hat = Eigen::VectorXd::Unit(spec.p, 0);
      fit.theta_hat(1) = 0.0;
    }
  } else {
    fit.beta_hat = best.params.head(spec.p);
    fit.theta_hat = best.params.tail(spec.custom.theta_dim);
  }
  fit.residuals = data.y - model.predict(best.params);
  fit.rss0 = best.rss;
  fit.converged = best.converged;
  fit.iterations = total_iterations;
  if (!best.converged)
    throw convergence_error("fit_null_model: optimizer did not converge after " +
                                std::to_string(opt.restarts) + " restarts",
                            fit);
  return fit;
}

}  // namespace nglr
