#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "nglr/dimension.hpp"
#include "nglr/rng.hpp"
#include "nglr/simulation.hpp"

using namespace nglr;

namespace {
double principal_angle_deg(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b);
  const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}
}  // namespace

TEST_CASE("rre on hand-enumerated spectra") {
  Eigen::VectorXd lam(4);
  lam << 4, 0, 0, 0;
  // c = 0.1 -> ratios (0.0244, 1, 1)
  CHECK(rre_select_q(lam, 100, 1.0) == 1);

  lam << 3, 2, 0, 0;
  // c = 0.01 -> ratios (0.6678, 0.00498, 1)
  CHECK(rre_select_q(lam, 10000, 1.0) == 2);

  lam << 0.7, 0.7, 0.7, 0.7;  // all ties -> smallest k
  CHECK(rre_select_q(lam, 100, 1.0) == 1);
}

TEST_CASE("rre equals brute-force enumeration") {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const int p = 2 + int(rng.uniform01() * 6);
    Eigen::VectorXd lam(p);
    for (int i = 0; i < p; ++i) lam(i) = std::fabs(rng.normal());
    std::sort(lam.data(), lam.data() + p, std::greater<double>());
    const double n = 50 + rng.uniform01() * 1000;
    const double h = 0.2 + rng.uniform01();
    const double c = 1.0 / std::sqrt(n * h);
    int best_k = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k < p; ++k) {
      const double ratio = (lam(k) + c) / (lam(k - 1) + c);
      if (ratio < best) {
        best = ratio;
        best_k = k;
      }
    }
    CHECK(rre_select_q(lam, Eigen::Index(n), h) == best_k);
  }
}

TEST_CASE("rre input validation") {
  Eigen::VectorXd lam(3);
  lam << 1.0, 0.5, -0.1;
  CHECK_THROWS_AS(rre_select_q(lam, 100, 1.0), std::invalid_argument);
  lam << 1.0, -1e-10, -5e-9;  // tiny negatives are clamped
  CHECK(rre_select_q(lam, 100, 1.0) == 1);
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK_THROWS_AS(rre_select_q(one, 100, 1.0), config_error);
}

TEST_CASE("opg finds a strong single index") {
  // 20-replication median alignment of the leading eigenvector
  std::vector<double> aligns;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 400, p = 4;
    Rng rng(100 + rep);
    Dataset d;
    d.x.resize(n, p);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
      d.y(i) = d.x(i, 0) + 0.1 * rng.normal();
    }
    const OpgEstimate est = opg_pilot(d);
    aligns.push_back(std::fabs(est.eigenvectors(0, 0)));
  }
  std::nth_element(aligns.begin(), aligns.begin() + 10, aligns.end());
  CHECK(aligns[10] > 0.95);
}

TEST_CASE("opg on constant response gives a null spectrum") {
  const int n = 60, p = 3;
  Rng rng(6);
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = 2.0;
  }
  const OpgEstimate est = opg_estimate(d, 1.5);
  CHECK(est.sigma.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(est.eigenvalues.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("opg spectrum well formed") {
  DgpSpec spec;
  spec.family = DgpFamily::H21;
  spec.p = 4;
  spec.a = 1.0;
  const Dataset d = dgp_generate(spec, 150, 77);
  const OpgEstimate est = opg_pilot(d);
  CHECK((est.sigma - est.sigma.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int k = 0; k + 1 < 4; ++k) CHECK(est.eigenvalues(k) >= est.eigenvalues(k + 1));
  CHECK(est.eigenvalues.minCoeff() >= -1e-10);
  const Eigen::MatrixXd vtv = est.eigenvectors.transpose() * est.eigenvectors;
  CHECK((vtv - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mave recovers a quadratic single index") {
  const int n = 400, p = 4;
  Rng rng(8);
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = 0.6;
  beta(1) = 0.8;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    const double s = d.x.row(i).dot(beta);
    d.y(i) = s * s + 0.1 * rng.normal();
  }
  const OpgEstimate pilot = opg_pilot(d);
  const MaveResult mv =
      mave_estimate(d, 1, 1.5 * std::pow(double(n), -0.2), pilot.eigenvectors.leftCols(1));
  Eigen::MatrixXd truth(p, 1);
  truth.col(0) = beta;
  CHECK(principal_angle_deg(mv.b_hat, truth) < 10.0);
}

TEST_CASE("mave on noiseless linear data drives the objective to zero") {
  const int n = 120, p = 3;
  Rng rng(9);
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = d.x(i, 0) - 2.0 * d.x(i, 1);
  }
  const OpgEstimate pilot = opg_pilot(d);
  const MaveResult mv = mave_estimate(d, 1, 0.8, pilot.eigenvectors.leftCols(1));
  CHECK(mv.objective <= 1e-12 * n);
}

TEST_CASE("mave with q = p spans everything and matches the local criterion") {
  const int n = 80, p = 3;
  Rng rng(10);
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = std::sin(d.x(i, 0)) + 0.2 * rng.normal();
  }
  const MaveResult mv = mave_estimate(d, p, 1.2, Eigen::MatrixXd::Identity(p, p));
  CHECK(mv.converged);
  const Eigen::MatrixXd btb = mv.b_hat.transpose() * mv.b_hat;
  CHECK((btb - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() < 1e-8);
  // any orthonormal basis of R^p gives the same normalized local criterion
  const MaveResult other = mave_estimate(d, p, 1.2, -Eigen::MatrixXd::Identity(p, p));
  CHECK(mv.objective == Catch::Approx(other.objective).epsilon(1e-9));
}

TEST_CASE("mave input validation") {
  Dataset d;
  d.x = Eigen::MatrixXd::Random(30, 3);
  d.y = Eigen::VectorXd::Random(30);
  CHECK_THROWS_AS(mave_estimate(d, 0, 1.0, Eigen::MatrixXd::Identity(3, 1)), config_error);
  CHECK_THROWS_AS(mave_estimate(d, 4, 1.0, Eigen::MatrixXd::Identity(3, 3)), config_error);
  Eigen::MatrixXd dependent(3, 2);
  dependent.col(0) << 1, 0, 0;
  dependent.col(1) << 2, 0, 0;
  CHECK_THROWS_AS(mave_estimate(d, 2, 1.0, dependent), config_error);
}

TEST_CASE("bic penalty arithmetic as printed") {
  // log(n) k / min(n h^k, sqrt(n)) at n = 100: sqrt(n) = 10
  const double n_ = 100.0;
  for (double h : {0.3, 0.6, 1.1}) {
    for (int k = 1; k <= 4; ++k) {
      const double expected = std::log(n_) * k / std::min(n_ * std::pow(h, k), 10.0);
      CHECK(bic_penalty(100, h, k) == Catch::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("bic picks one dimension on noiseless linear data") {
  const int n = 80, p = 3;
  Rng rng(12);
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = 0.5 * d.x(i, 0) + d.x(i, 2);
  }
  const OpgEstimate pilot = opg_pilot(d);
  CHECK(bic_select_q(d, pilot) == 1);
}

TEST_CASE("bic detects the second index direction", "[slow]") {
  // smoke-scale version of the two-index consistency check; the acceptance
  // suite runs the full-size one
  int hits = 0;
  const int reps = 10;
  for (int r = 0; r < reps; ++r) {
    DgpSpec spec;
    spec.family = DgpFamily::H21;
    spec.p = 4;
    spec.a = 1.0;
    const Dataset d = dgp_generate(spec, 200, derive_seed(500, r, 1));
    const OpgEstimate pilot = opg_pilot(d);
    hits += bic_select_q(d, pilot) == 2;
  }
  CHECK(hits >= 7);
}

TEST_CASE("null linear model keeps q at one through the pilot") {
  int hits = 0;
  for (int r = 0; r < 20; ++r) {
    DgpSpec spec;
    spec.family = DgpFamily::H11;
    spec.p = 8;
    const Dataset d = dgp_generate(spec, 200, derive_seed(600, r, 1));
    const OpgEstimate pilot = opg_pilot(d);
    hits += rre_select_q(pilot.eigenvalues, d.n(), pilot.bandwidth) == 1;
  }
  CHECK(hits >= 18);
}
