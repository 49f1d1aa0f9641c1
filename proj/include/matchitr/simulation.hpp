#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchitr/dataset.hpp"
#include "matchitr/random.hpp"

namespace matchitr {

enum class Boundary { Linear, Nonlinear };
enum class MainEffect { Simple, Complex };
enum class GpsSpec { Correct, Misspecified };
enum class OutcomeKind { Continuous, Survival };

// Simulation design: k = 4 arms, X ~ U(0,1)^6, treatment drawn from a
// softmax propensity, reward 2 I(A* = A) plus a main effect.
struct ScenarioConfig {
  static constexpr int k = 4;
  static constexpr int p = 6;
  Boundary boundary = Boundary::Linear;
  MainEffect effect = MainEffect::Simple;
  GpsSpec gps = GpsSpec::Correct;
  OutcomeKind outcome = OutcomeKind::Continuous;
  double tau = 9.1;            // end of study (survival designs)
  double censor_rate = 0.2;    // exponential censoring parameter (survival designs)
};

// Scenario codes: boundary (L/N) then main effect (S/C).
inline ScenarioConfig parse_scenario(const std::string& code) {
  ScenarioConfig c;
  if (code.size() != 2) throw std::invalid_argument("scenario must be one of LS, NS, LC, NC");
  if (code[0] == 'L') c.boundary = Boundary::Linear;
  else if (code[0] == 'N') c.boundary = Boundary::Nonlinear;
  else throw std::invalid_argument("scenario must be one of LS, NS, LC, NC");
  if (code[1] == 'S') c.effect = MainEffect::Simple;
  else if (code[1] == 'C') c.effect = MainEffect::Complex;
  else throw std::invalid_argument("scenario must be one of LS, NS, LC, NC");
  return c;
}

inline std::string scenario_code(const ScenarioConfig& c) {
  std::string s;
  s += (c.boundary == Boundary::Linear) ? 'L' : 'N';
  s += (c.effect == MainEffect::Simple) ? 'S' : 'C';
  return s;
}

// True optimal arm as a function of (x1, x2).
inline int true_optimal_arm(Boundary b, double x1, double x2) {
  if (b == Boundary::Linear) {
    if (x1 > 0.5 && x2 > 0.5) return 1;
    if (x1 <= 0.5 && x2 > 0.5) return 2;
    if (x1 <= 0.5 && x2 <= 0.5) return 3;
    return 4;
  }
  const double q = 0.5 * (x2 - 0.5) * (x2 - 0.5);
  if (q - x1 + 0.7 < 0.0) return 1;
  if (q + x1 <= 0.3) return 4;
  if (q + x1 <= 0.55) return 3;  // 0.3 < q + x1 <= 0.55
  return 2;
}

// True treatment-assignment probabilities. The correct specification is a
// softmax in X'beta_w; the misspecified one squares the linear scores first.
inline Eigen::Vector4d true_gps(GpsSpec spec, const Eigen::VectorXd& x) {
  static const double B_CORRECT[4][6] = {
      {1, 2, 1, 1, 1, 1}, {1, 1, 2, 1, 1, 1}, {1, 1, 1, 4, 1, 1}, {1, 1, -1, 1, 1, 5}};
  static const double B_MISSPEC[4][6] = {
      {1, 2, 1, 1, 1, 1}, {1, 1, 2, 1, 1, 1}, {1, 1, 1, 2, 1, 1}, {1, 1, 1, 1, 1, 2}};
  if (x.size() != 6) throw std::invalid_argument("true GPS needs 6 covariates");
  const auto& B = (spec == GpsSpec::Correct) ? B_CORRECT : B_MISSPEC;
  Eigen::Vector4d eta;
  for (int w = 0; w < 4; ++w) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += B[w][j] * x[j];
    eta[w] = (spec == GpsSpec::Correct) ? s : s * s;
  }
  const double m = eta.maxCoeff();
  Eigen::Vector4d pr = (eta.array() - m).exp();
  return pr / pr.sum();
}

inline double main_effect(MainEffect e, const Eigen::VectorXd& x) {
  if (e == MainEffect::Simple) return x[1];
  return x[0] * x[0] + std::exp(-x[2] - x[3]);
}

// Treatment-specific cumulative baseline hazards of the survival design.
//   arm 1: lambda0 = 1
//   arm 2: lambda0 = 0.5 t^{-1/2}
//   arm 3: lambda0 = e^{-0.3t} on (0,.25], e^{-0.075} on (.25,.75], e^{0.3(t-1)} after
//   arm 4: lambda0 = 2 + e^{0.5t} on (0,1], 2 + e^{-0.5(t-2)} after
inline double cumulative_baseline(int arm, double t) {
  if (t < 0.0) throw std::invalid_argument("negative time");
  switch (arm) {
    case 1:
      return t;
    case 2:
      return std::sqrt(t);
    case 3: {
      const double h025 = (1.0 - std::exp(-0.075)) / 0.3;
      if (t <= 0.25) return (1.0 - std::exp(-0.3 * t)) / 0.3;
      const double h075 = h025 + 0.5 * std::exp(-0.075);
      if (t <= 0.75) return h025 + (t - 0.25) * std::exp(-0.075);
      return h075 + (std::exp(0.3 * (t - 1.0)) - std::exp(-0.075)) / 0.3;
    }
    case 4: {
      if (t <= 1.0) return 2.0 * t + 2.0 * (std::exp(0.5 * t) - 1.0);
      return 2.0 * t - 2.0 + 4.0 * std::exp(0.5) - 2.0 * std::exp(-0.5 * (t - 2.0));
    }
    default:
      throw std::invalid_argument("arm out of range");
  }
}

// Inverse of the cumulative baseline. Arms 1-3 invert in closed form; arm 4
// uses bisection (tolerance 1e-10 on t) after doubling the bracket.
inline double invert_cumulative_baseline(int arm, double target) {
  if (target < 0.0) throw std::invalid_argument("negative cumulative hazard");
  switch (arm) {
    case 1:
      return target;
    case 2:
      return target * target;
    case 3: {
      const double h025 = (1.0 - std::exp(-0.075)) / 0.3;
      if (target <= h025) return -std::log(1.0 - 0.3 * target) / 0.3;
      const double h075 = h025 + 0.5 * std::exp(-0.075);
      if (target <= h075) return 0.25 + (target - h025) * std::exp(0.075);
      return 1.0 + std::log(std::exp(-0.075) + 0.3 * (target - h075)) / 0.3;
    }
    case 4: {
      double lo = 0.0, hi = 1.0;
      while (cumulative_baseline(4, hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("baseline inversion bracket blew up");
      }
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (cumulative_baseline(4, mid) < target) lo = mid;
        else hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    default:
      throw std::invalid_argument("arm out of range");
  }
}

// Continuous-outcome data. Per-subject draw order is fixed (6 covariates,
// treatment, then the complex-effect noise), so a seed pins the file exactly.
inline Dataset generate_continuous(const ScenarioConfig& cfg, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.k = ScenarioConfig::k;
  d.covariates.resize(n, ScenarioConfig::p);
  d.treatments.resize(n);
  d.outcomes.resize(n);
  d.optimal_arms.resize(n);
  for (int j = 0; j < ScenarioConfig::p; ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
  for (int a = 1; a <= d.k; ++a) d.original_labels.push_back(std::to_string(a));
  std::vector<double> w(d.k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ScenarioConfig::p; ++j) d.covariates(i, j) = rng.uniform();
    const Eigen::VectorXd x = d.covariates.row(i).transpose();
    const Eigen::Vector4d pr = true_gps(cfg.gps, x);
    for (int a = 0; a < d.k; ++a) w[a] = pr[a];
    const int a = rng.categorical(w) + 1;
    d.treatments[i] = a;
    const int astar = true_optimal_arm(cfg.boundary, x[0], x[1]);
    d.optimal_arms[i] = astar;
    double r = 2.0 * (astar == a ? 1.0 : 0.0) + main_effect(cfg.effect, x);
    if (cfg.effect == MainEffect::Complex) r += rng.uniform();
    d.outcomes[i] = r;
  }
  return d;
}

struct SurvivalGenDiagnostics {
  double censor_fraction = 0.0;      // fraction of records with event = 0
  double max_inverse_residual = 0.0; // max |Lambda0(T~) e^{-R} + log U|
};

// Right-censored survival data. The true survival time solves
// Lambda0(T~|A) e^{-R} = -log U; censoring is exponential, and subjects still
// at risk at tau are recorded as events at tau. When with_truth is set the
// outcome column carries the tau-restricted true survival time min(T~, tau)
// (test-set evaluation); training data leaves outcomes for imputation.
inline Dataset generate_survival(const ScenarioConfig& cfg, int n, std::uint64_t seed,
                                 SurvivalGenDiagnostics* diag = nullptr, bool with_truth = false) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.k = ScenarioConfig::k;
  d.covariates.resize(n, ScenarioConfig::p);
  d.treatments.resize(n);
  d.optimal_arms.resize(n);
  d.survival = SurvivalData{std::vector<double>(n), std::vector<int>(n)};
  if (with_truth) d.outcomes.resize(n);
  for (int j = 0; j < ScenarioConfig::p; ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
  for (int a = 1; a <= d.k; ++a) d.original_labels.push_back(std::to_string(a));
  std::vector<double> w(d.k);
  int censored = 0;
  double max_resid = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ScenarioConfig::p; ++j) d.covariates(i, j) = rng.uniform();
    const Eigen::VectorXd x = d.covariates.row(i).transpose();
    const Eigen::Vector4d pr = true_gps(cfg.gps, x);
    for (int a = 0; a < d.k; ++a) w[a] = pr[a];
    const int a = rng.categorical(w) + 1;
    d.treatments[i] = a;
    const int astar = true_optimal_arm(cfg.boundary, x[0], x[1]);
    d.optimal_arms[i] = astar;
    const double r = 2.0 * (astar == a ? 1.0 : 0.0) + main_effect(cfg.effect, x);
    const double u = rng.uniform_pos();
    const double target = -std::log(u) * std::exp(r);
    const double t_true = invert_cumulative_baseline(a, target);
    max_resid = std::max(
        max_resid, std::abs(cumulative_baseline(a, t_true) * std::exp(-r) + std::log(u)));
    const double c = rng.exponential(cfg.censor_rate);
    double t_obs;
    int ev;
    if (std::min(t_true, c) > cfg.tau) {
      t_obs = cfg.tau;  // still at risk at the end of study: event at tau
      ev = 1;
    } else if (t_true <= c) {
      t_obs = t_true;
      ev = 1;
    } else {
      t_obs = c;
      ev = 0;
      ++censored;
    }
    d.survival->time[i] = t_obs;
    d.survival->event[i] = ev;
    if (with_truth) d.outcomes[i] = std::min(t_true, cfg.tau);
  }
  if (diag) {
    diag->censor_fraction = double(censored) / double(n);
    diag->max_inverse_residual = max_resid;
  }
  return d;
}

}  // namespace matchitr
