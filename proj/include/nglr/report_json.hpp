#pragma once

// JSON views of the result types. Kept out of the core headers so the library
// itself does not depend on the JSON vendor header.

#include <cmath>
#include <json.hpp>

#include "nglr/glr_test.hpp"
#include "nglr/kernel.hpp"
#include "nglr/null_model.hpp"
#include "nglr/simulation.hpp"

namespace nglr {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline nlohmann::json to_json(const KernelConstants& c) {
  return {
      {"schema_version", kReportSchemaVersion},
      {"k_at_zero", c.k_at_zero},
      {"int_k_squared", c.int_k_squared},
      {"int_two_k_minus_conv_squared", c.int_two_k_minus_conv_squared},
      {"quadrature_tolerance", c.quadrature_tolerance},
  };
}

inline nlohmann::json to_json(const NullModelFit& fit) {
  nlohmann::json j;
  j["beta_hat"] = std::vector<double>(fit.beta_hat.data(), fit.beta_hat.data() + fit.beta_hat.size());
  j["theta_hat"] =
      std::vector<double>(fit.theta_hat.data(), fit.theta_hat.data() + fit.theta_hat.size());
  j["rss0"] = fit.rss0;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  return j;
}

inline nlohmann::json to_json(const NuisanceEstimates& nu) {
  return {
      {"l1_hat", finite_or_null(nu.l1_hat)},
      {"l2_hat", finite_or_null(nu.l2_hat)},
      {"l3_hat", finite_or_null(nu.l3_hat)},
      {"eta0_sq_hat", finite_or_null(nu.eta0_sq_hat)},
      {"q1_hat", finite_or_null(nu.q1_hat)},
      {"v0_hat", finite_or_null(nu.v0_hat)},
      {"v1_hat", finite_or_null(nu.v1_hat)},
  };
}

inline nlohmann::json to_json(const TestReport& rep) {
  return {
      {"schema_version", kReportSchemaVersion},
      {"variant", variant_name(rep.variant)},
      {"raw_statistic", finite_or_null(rep.raw_statistic)},
      {"standardized", finite_or_null(rep.standardized)},
      {"adjusted", finite_or_null(rep.adjusted)},
      {"p_value", rep.p_value},
      {"reject", rep.reject},
      {"alpha", rep.alpha},
      {"q_hat", rep.q_hat},
      {"bandwidth", rep.bandwidth},
      {"nuisance", to_json(rep.nuisance)},
      {"dropped_rows", rep.dropped_rows},
      {"n_used", rep.n_used},
      {"method", rep.method == SdrMethod::OPG ? "OPG" : "MAVE"},
      {"selector", rep.selector == DimensionSelector::RRE
                       ? "RRE"
                       : (rep.selector == DimensionSelector::BIC ? "BIC" : "Fixed")},
  };
}

inline nlohmann::json to_json(const ExperimentResult& res) {
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t k = 0; k < res.method_names.size(); ++k) {
    methods.push_back({{"method", res.method_names[k]},
                       {"rejects", res.reject_counts[k]},
                       {"failures", res.failure_counts[k]},
                       {"rate", res.rates[k]},
                       {"stderr", res.stderrs[k]}});
  }
  return {
      {"schema_version", kReportSchemaVersion},
      {"family", family_name(res.spec.family)},
      {"error", error_name(res.spec)},
      {"p", res.spec.p},
      {"a", res.spec.a},
      {"n", res.n},
      {"reps", res.reps},
      {"unreliable", res.unreliable},
      {"wall_seconds", res.wall_seconds},
      {"methods", methods},
  };
}

}  // namespace nglr
