#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "nglr/baseline.hpp"
#include "nglr/common.hpp"
#include "nglr/dataset.hpp"
#include "nglr/glr_test.hpp"
#include "nglr/null_model.hpp"
#include "nglr/rng.hpp"

namespace nglr {

enum class DgpFamily { H11, H12, H13, H14, H21, H22, H31, H32 };
enum class ErrorLaw { Normal, StudentT5, Laplace };
enum class XCov { Identity, AR02 };

struct DgpSpec {
  DgpFamily family = DgpFamily::H11;
  int p = 8;
  double a = 0.0;           // departure amplitude; 0 recovers the null form
  ErrorLaw error = ErrorLaw::Normal;
  double sigma = 1.0;       // Normal only
  XCov x_cov = XCov::Identity;
};

inline const char* family_name(DgpFamily f) {
  switch (f) {
    case DgpFamily::H11: return "H11";
    case DgpFamily::H12: return "H12";
    case DgpFamily::H13: return "H13";
    case DgpFamily::H14: return "H14";
    case DgpFamily::H21: return "H21";
    case DgpFamily::H22: return "H22";
    case DgpFamily::H31: return "H31";
    case DgpFamily::H32: return "H32";
  }
  return "?";
}

inline std::string error_name(const DgpSpec& spec) {
  switch (spec.error) {
    case ErrorLaw::Normal: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "N(0,%g^2)", spec.sigma);
      return buf;
    }
    case ErrorLaw::StudentT5: return "t(5)";
    case ErrorLaw::Laplace: return "Laplace(0,1)";
  }
  return "?";
}

namespace detail {

inline void validate_dgp(const DgpSpec& spec) {
  if (spec.p < 4 || spec.p % 2 != 0)
    throw config_error(std::string("dgp ") + family_name(spec.family) +
                       ": p must be even and >= 4, got " + std::to_string(spec.p));
  if (spec.sigma <= 0.0) throw config_error("dgp: sigma must be > 0");
}

// index directions as printed in the model definitions
inline Eigen::VectorXd beta_ones(int p) {
  return Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
}

inline Eigen::VectorXd beta_front_ones(int p) {  // (1,...,1,0,0)/sqrt(p-2)
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  b.head(p - 2).setConstant(1.0 / std::sqrt(static_cast<double>(p - 2)));
  return b;
}

inline Eigen::VectorXd beta_back_half(int p) {  // (0,...,0,1,...,1)/sqrt(p/2)
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  b.tail(p / 2).setConstant(1.0 / std::sqrt(static_cast<double>(p) / 2.0));
  return b;
}

}  // namespace detail

// Regression mean of a family at a single covariate vector; the a = 0 case
// collapses to the corresponding null form by construction.
inline double dgp_mean(const DgpSpec& spec, const Eigen::VectorXd& x) {
  const int p = spec.p;
  switch (spec.family) {
    case DgpFamily::H11: {
      const double z = detail::beta_front_ones(p).dot(x);
      return z + spec.a * std::exp(-0.1 * z);
    }
    case DgpFamily::H12: {
      const double z = detail::beta_back_half(p).dot(x);
      return z + 1.25 * spec.a * std::pow(2.0, -z);
    }
    case DgpFamily::H13: {
      const double z = detail::beta_ones(p).dot(x);
      return z + spec.a * std::cos(0.6 * std::numbers::pi * z);
    }
    case DgpFamily::H14: {
      const double z = detail::beta_ones(p).dot(x);
      return 1.5 * std::exp(0.5 * z) + spec.a * std::cos(0.6 * std::numbers::pi * z);
    }
    case DgpFamily::H21: {
      const double z1 = detail::beta_ones(p).dot(x);
      const double z2 = detail::beta_back_half(p).dot(x);
      return z1 + spec.a * z2 * z2;
    }
    case DgpFamily::H22: {
      const double z1 = detail::beta_ones(p).dot(x);
      const double z2 = detail::beta_back_half(p).dot(x);
      return z1 + spec.a * std::sqrt(std::fabs(z2));
    }
    case DgpFamily::H31: {
      const double z1 = detail::beta_back_half(p).dot(x);
      return z1 + spec.a * z1 * z1;
    }
    case DgpFamily::H32: {
      const double z1 = detail::beta_back_half(p).dot(x);
      const double z2 = detail::beta_ones(p).dot(x);
      return z1 + spec.a * z2 * z2 * z2;
    }
  }
  throw config_error("dgp_mean: unknown family");
}

// Draws X ~ N(0, Sigma), eps from the error law, y = m(x) + eps.
// Deterministic given (spec, n, seed) regardless of threading.
inline Dataset dgp_generate(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed) {
  detail::validate_dgp(spec);
  if (n < 1) throw config_error("dgp_generate: n must be >= 1");
  const int p = spec.p;

  Rng rng(seed, 0xd6bULL);
  Dataset d;
  d.x.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();

  if (spec.x_cov == XCov::AR02) {
    Eigen::MatrixXd sigma(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) sigma(i, j) = std::pow(0.2, std::abs(i - j));
    const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
    d.x = d.x * chol.transpose();
  }

  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eps = 0.0;
    switch (spec.error) {
      case ErrorLaw::Normal: eps = spec.sigma * rng.normal(); break;
      case ErrorLaw::StudentT5: eps = rng.student_t5(); break;
      case ErrorLaw::Laplace: eps = rng.laplace(); break;
    }
    d.y(i) = dgp_mean(spec, d.x.row(i).transpose()) + eps;
  }
  d.covariate_names.resize(p);
  for (int j = 0; j < p; ++j) d.covariate_names[j] = "x" + std::to_string(j + 1);
  return d;
}

// The hypothesised (null) mean family matching each DGP.
inline NullModelSpec null_spec_for(const DgpSpec& spec) {
  NullModelSpec ns;
  ns.p = spec.p;
  ns.intercept = false;
  ns.form = (spec.family == DgpFamily::H14) ? NullForm::ScaledExp : NullForm::Linear;
  return ns;
}

// One configured test in a Monte Carlo comparison.
struct MethodConfig {
  enum class Kind { Glr, FzzAsymptotic, FzzBootstrap };
  std::string name;         // e.g. "rn-opg", "fzz-boot"
  Kind kind = Kind::Glr;
  TestConfig test;          // Glr only
  BootstrapConfig boot;     // FzzBootstrap only
  double alpha = 0.05;
};

// Parses a method token: {sn,rn}-{opg,mave} | fzz-asym | fzz-boot.
inline MethodConfig parse_method(const std::string& token, double alpha, int bootstrap_b,
                                 double bandwidth_scale, const std::string& selector = "rre",
                                 int fixed_q = 1) {
  MethodConfig m;
  m.name = token;
  m.alpha = alpha;
  if (token == "fzz-asym") {
    m.kind = MethodConfig::Kind::FzzAsymptotic;
    return m;
  }
  if (token == "fzz-boot") {
    m.kind = MethodConfig::Kind::FzzBootstrap;
    m.boot.b_resamples = bootstrap_b;
    return m;
  }
  const auto dash = token.find('-');
  if (dash == std::string::npos)
    throw config_error("unknown method token '" + token + "'");
  const std::string stat = token.substr(0, dash);
  const std::string est = token.substr(dash + 1);
  m.kind = MethodConfig::Kind::Glr;
  if (stat == "sn") m.test.variant = TestVariant::SnAdjusted;
  else if (stat == "rn") m.test.variant = TestVariant::RnAdjusted;
  else throw config_error("unknown statistic '" + stat + "' in method token '" + token + "'");
  if (est == "opg") m.test.method = SdrMethod::OPG;
  else if (est == "mave") m.test.method = SdrMethod::MAVE;
  else throw config_error("unknown estimator '" + est + "' in method token '" + token + "'");
  if (selector == "rre") m.test.selector = DimensionSelector::RRE;
  else if (selector == "bic") m.test.selector = DimensionSelector::BIC;
  else if (selector.rfind("fixed", 0) == 0) {
    m.test.selector = DimensionSelector::Fixed;
    m.test.fixed_q = fixed_q;
  } else {
    throw config_error("unknown selector '" + selector + "'");
  }
  m.test.alpha = alpha;
  m.test.bandwidth_scale = bandwidth_scale;
  return m;
}

struct ExperimentResult {
  DgpSpec spec;
  int n = 0;
  int reps = 0;
  std::vector<std::string> method_names;
  std::vector<int> reject_counts;   // per method
  std::vector<int> failure_counts;  // per method
  std::vector<double> rates;        // count/reps exactly
  std::vector<double> stderrs;      // sqrt(r(1-r)/reps)
  bool unreliable = false;          // > 5% failures for some method
  double wall_seconds = 0.0;
};

// Replication engine: per-replication seeds are derived from the master seed
// and the replication index, so results are identical for any thread count.
inline ExperimentResult run_experiment(const DgpSpec& spec, int n, int reps,
                                       const std::vector<MethodConfig>& methods,
                                       std::uint64_t seed, int threads = 1) {
  if (reps < 1) throw config_error("run_experiment: reps must be >= 1");
  if (methods.empty()) throw config_error("run_experiment: no methods configured");
  detail::validate_dgp(spec);

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t m = methods.size();
  const NullModelSpec null_spec = null_spec_for(spec);

  // 0 = accept, 1 = reject, 2 = failed
  std::vector<std::vector<char>> outcome(m, std::vector<char>(reps, 2));

  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    Dataset data;
    NullModelFit fit;
    bool rep_ok = true;
    try {
      data = dgp_generate(spec, n, derive_seed(seed, r, 1));
      fit = fit_null_model(data, null_spec);
    } catch (const std::exception&) {
      rep_ok = false;
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (!rep_ok) {
        outcome[k][r] = 2;
        continue;
      }
      try {
        const MethodConfig& mc = methods[k];
        bool reject = false;
        switch (mc.kind) {
          case MethodConfig::Kind::Glr: {
            TestConfig tc = mc.test;
            tc.threads = 1;  // replications are already parallel
            reject = run_test(data, null_spec, tc).reject;
            break;
          }
          case MethodConfig::Kind::FzzAsymptotic: {
            const double h = 1.5 * std::pow(static_cast<double>(n),
                                            -1.0 / (4.0 + static_cast<double>(spec.p)));
            reject = fzz_asymptotic(data, fit, h, mc.alpha).reject;
            break;
          }
          case MethodConfig::Kind::FzzBootstrap: {
            const double h = 1.5 * std::pow(static_cast<double>(n),
                                            -1.0 / (4.0 + static_cast<double>(spec.p)));
            BootstrapConfig bc = mc.boot;
            bc.seed = derive_seed(seed, r, 1000 + k);
            bc.threads = 1;
            reject = fzz_bootstrap(data, null_spec, fit, h, mc.alpha, bc).reject;
            break;
          }
        }
        outcome[k][r] = reject ? 1 : 0;
      } catch (const std::exception&) {
        outcome[k][r] = 2;
      }
    }
  });

  ExperimentResult res;
  res.spec = spec;
  res.n = n;
  res.reps = reps;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (std::size_t k = 0; k < m; ++k) {
    int rejects = 0, failures = 0;
    for (int r = 0; r < reps; ++r) {
      if (outcome[k][r] == 2) ++failures;
      else if (outcome[k][r] == 1) ++rejects;
    }
    const double rate = static_cast<double>(rejects) / static_cast<double>(reps);
    res.method_names.push_back(methods[k].name);
    res.reject_counts.push_back(rejects);
    res.failure_counts.push_back(failures);
    res.rates.push_back(rate);
    res.stderrs.push_back(std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps)));
    if (failures > 0.05 * reps) res.unreliable = true;
  }
  return res;
}

// Long-format results table: family,error,n,p,a,method,rate,stderr,failures.
inline void emit_table(const std::vector<ExperimentResult>& results, std::ostream& out) {
  if (results.empty()) throw config_error("emit_table: no results");
  out << "family,error,n,p,a,method,rate,stderr,failures\n";
  char buf[64];
  for (const auto& res : results) {
    for (std::size_t k = 0; k < res.method_names.size(); ++k) {
      out << family_name(res.spec.family) << ',' << error_name(res.spec) << ',' << res.n << ','
          << res.spec.p << ',';
      std::snprintf(buf, sizeof(buf), "%.10g", res.spec.a);
      out << buf << ',' << res.method_names[k] << ',';
      std::snprintf(buf, sizeof(buf), "%.10g", res.rates[k]);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.10g", res.stderrs[k]);
      out << buf << ',' << res.failure_counts[k] << '\n';
    }
  }
}

// Wide-format power-curve data per (family,error,n,p) group: one column of a
// values and one rate column per method.
inline void emit_power_curves(const std::vector<ExperimentResult>& results, std::ostream& out) {
  if (results.empty()) throw config_error("emit_power_curves: no results");
  using Key = std::tuple<std::string, std::string, int, int>;
  std::map<Key, std::vector<const ExperimentResult*>> groups;
  for (const auto& r : results)
    groups[{family_name(r.spec.family), error_name(r.spec), r.n, r.spec.p}].push_back(&r);
  char buf[64];
  for (const auto& [key, group] : groups) {
    out << "# family=" << std::get<0>(key) << " error=" << std::get<1>(key)
        << " n=" << std::get<2>(key) << " p=" << std::get<3>(key) << '\n';
    out << "a";
    for (const auto& name : group.front()->method_names) out << ',' << name;
    out << '\n';
    std::vector<const ExperimentResult*> sorted(group.begin(), group.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const ExperimentResult* a, const ExperimentResult* b) {
                return a->spec.a < b->spec.a;
              });
    for (const auto* r : sorted) {
      std::snprintf(buf, sizeof(buf), "%.10g", r->spec.a);
      out << buf;
      for (double rate : r->rates) {
        std::snprintf(buf, sizeof(buf), "%.10g", rate);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace nglr
