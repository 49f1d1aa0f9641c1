#include <catch2/catch_amalgamated.hpp>

#include "matchitr/multinomial.hpp"
#include "matchitr/simulation.hpp"
#include "matchitr/standardize.hpp"

using namespace matchitr;
using Catch::Matchers::WithinAbs;

TEST_CASE("clip-renormalize contract") {
  SECTION("hand example: one component below the bound") {
    Eigen::VectorXd p(3);
    p << 0.005, 0.495, 0.5;
    const Eigen::VectorXd q = clip_renormalize(p, 0.01, 1.0);
    REQUIRE_THAT(q[0], WithinAbs(0.01, 1e-15));
    REQUIRE_THAT(q[1], WithinAbs(0.495 * 0.99 / 0.995, 1e-12));
    REQUIRE_THAT(q[2], WithinAbs(0.5 * 0.99 / 0.995, 1e-12));
    REQUIRE_THAT(q.sum(), WithinAbs(1.0, 1e-12));
  }
  SECTION("raw probability 0.001 is lifted to the bound") {
    Eigen::VectorXd p(4);
    p << 0.001, 0.333, 0.333, 0.333;
    const Eigen::VectorXd q = clip_renormalize(p, 0.01, 1.0);
    REQUIRE(q.minCoeff() >= 0.01 - 1e-15);
    REQUIRE_THAT(q.sum(), WithinAbs(1.0, 1e-12));
  }
  SECTION("idempotent on already-feasible vectors") {
    Eigen::VectorXd p(3);
    p << 0.2, 0.3, 0.5;
    const Eigen::VectorXd q = clip_renormalize(p, 0.01, 1.0);
    for (int i = 0; i < 3; ++i) REQUIRE_THAT(q[i], WithinAbs(p[i], 1e-15));
  }
  SECTION("multiple components pinned at once") {
    Eigen::VectorXd p(4);
    p << 0.001, 0.002, 0.003, 0.994;
    const Eigen::VectorXd q = clip_renormalize(p, 0.05, 1.0);
    REQUIRE(q.minCoeff() >= 0.05 - 1e-15);
    REQUIRE_THAT(q.sum(), WithinAbs(1.0, 1e-12));
  }
  SECTION("infeasible bounds are rejected") {
    Eigen::VectorXd p(4);
    p << 0.25, 0.25, 0.25, 0.25;
    REQUIRE_THROWS(clip_renormalize(p, 0.3, 1.0));
  }
}

TEST_CASE("multinomial recovery on generated data") {
  ScenarioConfig cfg = parse_scenario("LS");
  const Dataset d = generate_continuous(cfg, 20000, 99);
  const GpsModel m = fit_multinomial(d);

  SECTION("fit converged with a small gradient and monotone log-likelihood") {
    REQUIRE(m.grad_norm <= 1e-8);
    REQUIRE(m.ll_trace.size() >= 2);
    // monotone up to the line search's noise slack, which is relative to |ll|
    for (std::size_t i = 1; i < m.ll_trace.size(); ++i)
      REQUIRE(m.ll_trace[i] >= m.ll_trace[i - 1] - 1e-9 * (1.0 + std::abs(m.ll_trace[i - 1])));
  }

  SECTION("estimated probabilities track the truth") {
    double mae = 0.0;
    for (int i = 0; i < d.n(); ++i) {
      const Eigen::VectorXd x = d.covariates.row(i).transpose();
      const Eigen::VectorXd est = m.predict_raw(x);
      const Eigen::Vector4d truth = true_gps(cfg.gps, x);
      REQUIRE_THAT(est.sum(), WithinAbs(1.0, 1e-10));
      mae += (est - truth).cwiseAbs().sum() / 4.0;
    }
    mae /= d.n();
    REQUIRE(mae < 0.02);
  }

  SECTION("clipped prediction respects the bound and still sums to one") {
    for (int i = 0; i < 200; ++i) {
      const Eigen::VectorXd pr = m.predict(d.covariates.row(i).transpose());
      REQUIRE(pr.minCoeff() >= m.clip_lo - 1e-15);
      REQUIRE_THAT(pr.sum(), WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("two-arm fit matches a symmetric logistic design") {
  // balanced two-arm data with P(A=2|x) = logistic(2x - 1)
  Rng rng(17);
  Dataset d;
  const int n = 30000;
  d.k = 2;
  d.covariates.resize(n, 1);
  d.treatments.resize(n);
  d.outcomes.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    d.covariates(i, 0) = x;
    const double p2 = 1.0 / (1.0 + std::exp(-(2.0 * x - 1.0)));
    d.treatments[i] = rng.uniform() < p2 ? 2 : 1;
  }
  d.original_labels = {"1", "2"};
  const GpsModel m = fit_multinomial(d);
  // reference arm 1: coef row parameterizes arm 2; slope ~ 2, intercept ~ -1
  REQUIRE(m.coef.rows() == 1);
  REQUIRE_THAT(m.coef(0, 0), WithinAbs(-1.0, 0.1));
  REQUIRE_THAT(m.coef(0, 1), WithinAbs(2.0, 0.2));
}

TEST_CASE("degenerate inputs fail loudly") {
  Dataset d;
  d.k = 2;
  d.covariates.resize(4, 1);
  d.covariates << 0.0, 0.0, 0.0, 0.0;  // constant covariate: ridge keeps this solvable
  d.treatments = {1, 2, 1, 2};
  d.outcomes = {0, 0, 0, 0};
  d.original_labels = {"1", "2"};
  const GpsModel m = fit_multinomial(d);
  const Eigen::VectorXd pr = m.predict_raw(Eigen::VectorXd::Zero(1));
  REQUIRE_THAT(pr[0], WithinAbs(0.5, 1e-6));
}
