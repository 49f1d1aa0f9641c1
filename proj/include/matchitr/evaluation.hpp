#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

#include "matchitr/dataset.hpp"
#include "matchitr/labeling.hpp"

namespace matchitr {

// A treatment rule: covariate vector (on the original scale) -> arm in 1..k.
struct Rule {
  int k = 0;
  std::function<int(const Eigen::VectorXd&)> assign;

  int operator()(const Eigen::VectorXd& x) const { return assign(x); }
};

// Inverse-probability-weighted empirical value
//   E_n[R I{A = D(X)} / pi(A|X)] / E_n[I{A = D(X)} / pi(A|X)].
// gps[i] holds the k propensities of subject i; all must be positive. Throws
// if the rule agrees with no observed treatment (the denominator would be 0).
inline double empirical_value(const Rule& rule, const Dataset& d,
                              const std::vector<Eigen::VectorXd>& gps) {
  if (!d.has_outcomes()) throw std::invalid_argument("empirical value needs outcomes");
  if (int(gps.size()) != d.n()) throw std::invalid_argument("gps length mismatch");
  double num = 0.0, den = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    if (int(gps[i].size()) != d.k) throw std::invalid_argument("gps vector has wrong length");
    const int a = d.treatments[i];
    if (!(gps[i][a - 1] > 0.0))
      throw std::invalid_argument("nonpositive propensity at row " + std::to_string(i + 1));
    if (rule(d.covariates.row(i).transpose()) == a) {
      const double w = 1.0 / gps[i][a - 1];
      num += d.outcomes[i] * w;
      den += w;
    }
  }
  if (den == 0.0)
    throw std::runtime_error("empirical value undefined: rule matches no observed treatment");
  return num / den;
}

// Fraction of subjects whose assigned arm differs from the known optimal arm.
inline double misclassification(const Rule& rule, const Dataset& d) {
  if (d.optimal_arms.empty())
    throw std::invalid_argument("misclassification needs the optimal arms");
  int wrong = 0;
  for (int i = 0; i < d.n(); ++i)
    if (rule(d.covariates.row(i).transpose()) != d.optimal_arms[i]) ++wrong;
  return double(wrong) / double(d.n());
}

// Matched-sample value of a rule: sum of instance weights whose label the
// rule reproduces on the instance's own features.
inline double matched_value(const Rule& rule, const std::vector<ClassificationInstance>& inst) {
  double v = 0.0;
  for (const auto& t : inst)
    if (rule(t.features) == t.label) v += t.weight;
  return v;
}

}  // namespace matchitr
