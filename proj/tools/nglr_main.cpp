// Command-line front end: kernel constants, Monte Carlo experiments, one-shot
// tests on generated or CSV data, and the real-data analysis pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nglr/nglr.hpp"
#include "nglr/report_json.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

nglr::DgpFamily parse_family(std::string name) {
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (name == "h11") return nglr::DgpFamily::H11;
  if (name == "h12") return nglr::DgpFamily::H12;
  if (name == "h13") return nglr::DgpFamily::H13;
  if (name == "h14") return nglr::DgpFamily::H14;
  if (name == "h21") return nglr::DgpFamily::H21;
  if (name == "h22") return nglr::DgpFamily::H22;
  if (name == "h31") return nglr::DgpFamily::H31;
  if (name == "h32") return nglr::DgpFamily::H32;
  throw nglr::config_error("unknown model family '" + name + "'");
}

nglr::ErrorLaw parse_error_law(std::string name) {
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (name == "normal" || name == "n") return nglr::ErrorLaw::Normal;
  if (name == "t5" || name == "t(5)" || name == "student") return nglr::ErrorLaw::StudentT5;
  if (name == "laplace") return nglr::ErrorLaw::Laplace;
  throw nglr::config_error("unknown error law '" + name + "'");
}

nglr::XCov parse_xcov(std::string name) {
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (name == "identity" || name == "i") return nglr::XCov::Identity;
  if (name == "ar02" || name == "sigma2") return nglr::XCov::AR02;
  throw nglr::config_error("unknown covariance '" + name + "'");
}

// "rre" | "bic" | "fixed:K"
std::pair<std::string, int> parse_selector(const std::string& token) {
  if (token.rfind("fixed:", 0) == 0) {
    const int k = std::stoi(token.substr(6));
    return {"fixed", k};
  }
  if (token == "rre" || token == "bic" || token == "fixed") return {token, 1};
  throw nglr::config_error("unknown selector '" + token + "' (expected rre, bic or fixed:K)");
}

struct CommonTestFlags {
  std::string stat = "rn-opg";
  std::string selector = "rre";
  double alpha = 0.05;
  double bandwidth_scale = 1.5;
  std::uint64_t seed = 1;
  int threads = 1;
  int bootstrap_b = 250;
  bool one_sided = false;
};

void add_common_flags(CLI::App* cmd, CommonTestFlags& f) {
  cmd->add_option("--stat", f.stat,
                  "test statistic: {sn,rn}-{opg,mave}, fzz-asym or fzz-boot");
  cmd->add_option("--selector", f.selector, "dimension selector: rre, bic or fixed:K");
  cmd->add_option("--alpha", f.alpha, "significance level");
  cmd->add_option("--bandwidth-scale", f.bandwidth_scale,
                  "c in the bandwidth rule h = c n^{-1/(4+q)}");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--threads", f.threads, "worker threads");
  cmd->add_option("--bootstrap-b", f.bootstrap_b, "bootstrap resamples");
  cmd->add_flag("--one-sided", f.one_sided, "one-sided rejection region");
}

nglr::MethodConfig method_from_flags(const CommonTestFlags& f, const std::string& token) {
  const auto [sel, k] = parse_selector(f.selector);
  nglr::MethodConfig m =
      nglr::parse_method(token, f.alpha, f.bootstrap_b, f.bandwidth_scale, sel, k);
  m.test.one_sided = f.one_sided;
  m.test.threads = f.threads;
  return m;
}

// Runs one configured method on a dataset and returns the report.
nglr::TestReport run_method(const nglr::Dataset& data, const nglr::NullModelSpec& null_spec,
                            const nglr::MethodConfig& m, std::uint64_t seed) {
  const nglr::NullModelFit fit = nglr::fit_null_model(data, null_spec);
  switch (m.kind) {
    case nglr::MethodConfig::Kind::Glr:
      return nglr::run_test(data, null_spec, m.test);
    case nglr::MethodConfig::Kind::FzzAsymptotic: {
      const double h = 1.5 * std::pow(static_cast<double>(data.n()),
                                      -1.0 / (4.0 + static_cast<double>(data.p())));
      return nglr::fzz_asymptotic(data, fit, h, m.alpha);
    }
    case nglr::MethodConfig::Kind::FzzBootstrap: {
      const double h = 1.5 * std::pow(static_cast<double>(data.n()),
                                      -1.0 / (4.0 + static_cast<double>(data.p())));
      nglr::BootstrapConfig bc = m.boot;
      bc.seed = nglr::derive_seed(seed, 0xb00ULL);
      return nglr::fzz_bootstrap(data, null_spec, fit, h, m.alpha, bc);
    }
  }
  throw nglr::config_error("unknown method kind");
}

struct ExperimentRequest {
  nglr::DgpSpec spec;
  std::vector<int> ns;
  std::vector<double> as;
  int reps = 100;
  std::vector<std::string> methods;
  std::string selector = "rre";
  int fixed_q = 1;
  double alpha = 0.05;
  double bandwidth_scale = 1.5;
  int bootstrap_b = 250;
  std::uint64_t seed = 1;
};

std::vector<nglr::ExperimentResult> run_requests(const std::vector<ExperimentRequest>& reqs,
                                                 int threads) {
  std::vector<nglr::ExperimentResult> results;
  for (const auto& req : reqs) {
    std::vector<nglr::MethodConfig> methods;
    for (const auto& token : req.methods)
      methods.push_back(nglr::parse_method(token, req.alpha, req.bootstrap_b,
                                           req.bandwidth_scale, req.selector, req.fixed_q));
    for (int n : req.ns) {
      for (double a : req.as) {
        nglr::DgpSpec spec = req.spec;
        spec.a = a;
        results.push_back(
            nglr::run_experiment(spec, n, req.reps, methods, req.seed, threads));
      }
    }
  }
  return results;
}

std::vector<ExperimentRequest> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw nglr::data_error("cannot open config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw nglr::config_error("config parse error in '" + path + "': " + e.what());
  }
  if (!doc.contains("experiments") || !doc["experiments"].is_array())
    throw nglr::config_error("config must contain an 'experiments' array");
  std::vector<ExperimentRequest> reqs;
  for (const auto& e : doc["experiments"]) {
    ExperimentRequest r;
    r.spec.family = parse_family(e.at("family").get<std::string>());
    r.spec.p = e.value("p", 8);
    if (e.contains("error")) r.spec.error = parse_error_law(e["error"].get<std::string>());
    r.spec.sigma = e.value("sigma", 1.0);
    if (e.contains("xcov")) r.spec.x_cov = parse_xcov(e["xcov"].get<std::string>());
    if (e.at("n").is_array()) r.ns = e["n"].get<std::vector<int>>();
    else r.ns = {e["n"].get<int>()};
    if (e.at("a").is_array()) r.as = e["a"].get<std::vector<double>>();
    else r.as = {e["a"].get<double>()};
    r.reps = e.value("reps", 100);
    r.methods = e.at("methods").get<std::vector<std::string>>();
    if (e.contains("selector")) {
      const auto [sel, k] = parse_selector(e["selector"].get<std::string>());
      r.selector = sel;
      r.fixed_q = k;
    }
    r.alpha = e.value("alpha", 0.05);
    r.bandwidth_scale = e.value("bandwidth_scale", 1.5);
    r.bootstrap_b = e.value("bootstrap_b", 250);
    r.seed = e.value("seed", 1);
    reqs.push_back(std::move(r));
  }
  return reqs;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw nglr::data_error("cannot open output file '" + out_path + "'");
  out << text;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Dimension-adaptive nonparametric GLR specification tests"};
  app.require_subcommand(1);

  // ---- constants ----
  auto* cmd_constants = app.add_subcommand("constants", "print the kernel constants as JSON");
  double tolerance = 1e-10;
  cmd_constants->add_option("--tolerance", tolerance, "quadrature tolerance");

  // ---- simulate ----
  auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo size/power experiments");
  std::string cfg_path, model = "h11", error_law = "normal", xcov = "identity";
  std::string n_list = "100", a_list = "0";
  std::string out_path, curves_path, format = "csv";
  double sigma = 1.0;
  int p = 8, reps = 100;
  CommonTestFlags sim_flags;
  cmd_sim->add_option("--config", cfg_path, "JSON experiment grid (overrides model flags)");
  cmd_sim->add_option("--model", model, "DGP family: h11..h14, h21, h22, h31, h32");
  cmd_sim->add_option("--p", p, "covariate dimension");
  cmd_sim->add_option("--n", n_list, "sample size(s), comma separated");
  cmd_sim->add_option("--a", a_list, "departure amplitude(s), comma separated");
  cmd_sim->add_option("--error", error_law, "error law: normal, t5, laplace");
  cmd_sim->add_option("--sigma", sigma, "normal error sd");
  cmd_sim->add_option("--xcov", xcov, "covariate covariance: identity or ar02");
  cmd_sim->add_option("--reps", reps, "replications");
  cmd_sim->add_option("--out", out_path, "output file ('-' for stdout)");
  cmd_sim->add_option("--curves", curves_path, "also write wide power-curve CSV here");
  cmd_sim->add_option("--format", format, "csv or json");
  add_common_flags(cmd_sim, sim_flags);

  // ---- test ----
  auto* cmd_test = app.add_subcommand("test", "run one specification test, print JSON report");
  std::string t_data, t_response = "y", t_covariates, t_model;
  bool t_standardize = false;
  double t_yj = std::numeric_limits<double>::quiet_NaN();
  int t_n = 100, t_p = 8;
  double t_a = 0.0;
  std::string t_error = "normal", t_xcov = "identity";
  double t_sigma = 1.0;
  std::string t_out;
  CommonTestFlags t_flags;
  cmd_test->add_option("--data", t_data, "CSV file (headered)");
  cmd_test->add_option("--response", t_response, "response column");
  cmd_test->add_option("--covariates", t_covariates, "covariate columns, comma separated");
  cmd_test->add_flag("--standardize", t_standardize, "standardize columns");
  cmd_test->add_option("--yeo-johnson", t_yj, "apply Yeo-Johnson with this lambda first");
  cmd_test->add_option("--model", t_model, "generate from this DGP instead of --data");
  cmd_test->add_option("--n", t_n, "sample size for --model");
  cmd_test->add_option("--p", t_p, "dimension for --model");
  cmd_test->add_option("--a", t_a, "departure amplitude for --model");
  cmd_test->add_option("--error", t_error, "error law for --model");
  cmd_test->add_option("--sigma", t_sigma, "normal error sd for --model");
  cmd_test->add_option("--xcov", t_xcov, "covariance for --model");
  cmd_test->add_option("--out", t_out, "write the JSON report here too");
  add_common_flags(cmd_test, t_flags);

  // ---- analyze ----
  auto* cmd_an = app.add_subcommand("analyze", "dataset analysis pipeline with summary");
  std::string a_data, a_response, a_covariates, a_out;
  bool a_standardize = false, a_yj_std = false;
  double a_yj = std::numeric_limits<double>::quiet_NaN();
  std::string a_stats = "rn-opg,rn-mave";
  CommonTestFlags a_flags;
  cmd_an->add_option("--data", a_data, "CSV file (headered)")->required();
  cmd_an->add_option("--response", a_response, "response column")->required();
  cmd_an->add_option("--covariates", a_covariates, "covariate columns, comma separated")
      ->required();
  cmd_an->add_flag("--standardize", a_standardize, "standardize all columns");
  cmd_an->add_option("--yeo-johnson", a_yj, "apply Yeo-Johnson with this lambda first");
  cmd_an->add_flag("--yj-then-standardize", a_yj_std,
                   "standardize after the Yeo-Johnson transform");
  cmd_an->add_option("--stats", a_stats, "method tokens, comma separated");
  cmd_an->add_option("--out", a_out, "write the JSON report here");
  add_common_flags(cmd_an, a_flags);

  CLI11_PARSE(app, argc, argv);

  if (*cmd_constants) {
    std::cout << nglr::to_json(nglr::kernel_constants(tolerance)).dump(2) << "\n";
    return 0;
  }

  if (*cmd_sim) {
    std::vector<ExperimentRequest> reqs;
    if (!cfg_path.empty()) {
      reqs = load_config(cfg_path);
    } else {
      ExperimentRequest r;
      r.spec.family = parse_family(model);
      r.spec.p = p;
      r.spec.error = parse_error_law(error_law);
      r.spec.sigma = sigma;
      r.spec.x_cov = parse_xcov(xcov);
      for (const auto& tok : split_list(n_list)) r.ns.push_back(std::stoi(tok));
      for (const auto& tok : split_list(a_list)) r.as.push_back(std::stod(tok));
      r.reps = reps;
      r.methods = split_list(sim_flags.stat);
      const auto [sel, k] = parse_selector(sim_flags.selector);
      r.selector = sel;
      r.fixed_q = k;
      r.alpha = sim_flags.alpha;
      r.bandwidth_scale = sim_flags.bandwidth_scale;
      r.bootstrap_b = sim_flags.bootstrap_b;
      r.seed = sim_flags.seed;
      reqs.push_back(std::move(r));
    }
    const auto results = run_requests(reqs, sim_flags.threads);
    std::string text;
    if (format == "json") {
      json arr = json::array();
      for (const auto& r : results) arr.push_back(nglr::to_json(r));
      text = arr.dump(2) + "\n";
    } else if (format == "csv") {
      std::ostringstream os;
      nglr::emit_table(results, os);
      text = os.str();
    } else {
      throw nglr::config_error("unknown format '" + format + "'");
    }
    write_output(text, out_path);
    if (!curves_path.empty()) {
      std::ostringstream os;
      nglr::emit_power_curves(results, os);
      write_output(os.str(), curves_path);
    }
    for (const auto& r : results)
      if (r.unreliable)
        throw nglr::experiment_error("experiment marked unreliable (> 5% failures)");
    return 0;
  }

  if (*cmd_test) {
    nglr::Dataset data;
    nglr::NullModelSpec null_spec;
    if (!t_model.empty()) {
      nglr::DgpSpec spec;
      spec.family = parse_family(t_model);
      spec.p = t_p;
      spec.a = t_a;
      spec.error = parse_error_law(t_error);
      spec.sigma = t_sigma;
      spec.x_cov = parse_xcov(t_xcov);
      data = nglr::dgp_generate(spec, t_n, t_flags.seed);
      null_spec = nglr::null_spec_for(spec);
    } else if (!t_data.empty()) {
      nglr::ColumnSchema schema;
      schema.response = t_response;
      schema.covariates = split_list(t_covariates);
      schema.standardize = t_standardize;
      if (std::isfinite(t_yj)) schema.yeo_johnson_lambda = t_yj;
      data = nglr::load_dataset(t_data, schema);
      null_spec.form = nglr::NullForm::Linear;
      null_spec.p = static_cast<int>(data.p());
      null_spec.intercept = false;
    } else {
      throw nglr::config_error("test: need either --data or --model");
    }
    const nglr::MethodConfig m = method_from_flags(t_flags, t_flags.stat);
    const nglr::TestReport rep = run_method(data, null_spec, m, t_flags.seed);
    const std::string text = nglr::to_json(rep).dump(2) + "\n";
    std::cout << text;
    if (!t_out.empty()) write_output(text, t_out);
    return 0;
  }

  if (*cmd_an) {
    nglr::ColumnSchema schema;
    schema.response = a_response;
    schema.covariates = split_list(a_covariates);
    schema.standardize = a_standardize;
    if (std::isfinite(a_yj)) schema.yeo_johnson_lambda = a_yj;
    schema.standardize_after_transform = a_yj_std;
    const nglr::Dataset data = nglr::load_dataset(a_data, schema);

    nglr::NullModelSpec null_spec;
    null_spec.form = nglr::NullForm::Linear;
    null_spec.p = static_cast<int>(data.p());
    null_spec.intercept = false;

    const nglr::NullModelFit fit = nglr::fit_null_model(data, null_spec);
    json reports = json::array();
    std::cout << "dataset: " << a_data << "  (n=" << data.n() << ", p=" << data.p() << ")\n";
    if (std::isfinite(a_yj)) std::cout << "transform: Yeo-Johnson lambda=" << a_yj << "\n";
    if (a_standardize) std::cout << "standardized columns\n";
    std::cout << "null fit: beta_hat = [" << fit.beta_hat.transpose() << "], rss0 = " << fit.rss0
              << "\n";
    for (const auto& token : split_list(a_stats)) {
      const nglr::MethodConfig m = method_from_flags(a_flags, token);
      const nglr::TestReport rep = run_method(data, null_spec, m, a_flags.seed);
      json j = nglr::to_json(rep);
      j["dataset"] = a_data;
      j["fit"] = nglr::to_json(fit);
      reports.push_back(j);
      std::cout << token << ": statistic = " << rep.adjusted << "  p = " << rep.p_value
                << "  q_hat = " << rep.q_hat << "  h = " << rep.bandwidth << "  -> "
                << (rep.reject ? "reject" : "do not reject") << " at alpha=" << rep.alpha
                << "\n";
    }
    if (!a_out.empty()) write_output(reports.dump(2) + "\n", a_out);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const nglr::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nglr::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const nglr::experiment_error& e) {
    std::cerr << "experiment error: " << e.what() << "\n";
    return 5;
  } catch (const nglr::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
