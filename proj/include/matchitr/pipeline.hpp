#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchitr/dataset.hpp"
#include "matchitr/evaluation.hpp"
#include "matchitr/labeling.hpp"
#include "matchitr/matching.hpp"
#include "matchitr/multinomial.hpp"
#include "matchitr/ramsvm.hpp"
#include "matchitr/standardize.hpp"
#include "matchitr/survival.hpp"

namespace matchitr {

// Estimation methods: the three matched-learning weightings and the
// IPW Multi-OL comparator.
enum class Method { MatchG1, MatchGw1, MatchGw2, MultiOl };

inline Method parse_method(const std::string& s) {
  if (s == "match-g1") return Method::MatchG1;
  if (s == "match-gw1") return Method::MatchGw1;
  if (s == "match-gw2") return Method::MatchGw2;
  if (s == "multi-ol") return Method::MultiOl;
  throw std::invalid_argument("unknown method '" + s + "'");
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::MatchG1: return "match-g1";
    case Method::MatchGw1: return "match-gw1";
    case Method::MatchGw2: return "match-gw2";
    case Method::MultiOl: return "multi-ol";
  }
  throw std::logic_error("unreachable");
}

inline WeightKind weight_kind_for(Method m) {
  switch (m) {
    case Method::MatchG1: return WeightKind::Constant;
    case Method::MatchGw1: return WeightKind::GapSum;
    case Method::MatchGw2: return WeightKind::Range;
    default: throw std::invalid_argument("multi-ol has no tuple weighting function");
  }
}

// 13 logarithmically spaced penalties from 1e-4 to 1e2.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  g.reserve(13);
  for (int i = 0; i < 13; ++i) g.push_back(std::pow(10.0, -4.0 + 0.5 * double(i)));
  return g;
}

struct PipelineConfig {
  Method method = Method::MatchGw1;
  MatchMetric metric = MatchMetric::Mahalanobis;
  int m = 1;
  double caliper = std::numeric_limits<double>::infinity();
  int tuple_cap = 64;
  KernelSpec kernel{};  // Gaussian, median-heuristic bandwidth
  double gamma = 0.5;
  double tol = 1e-6;
  int max_sweeps = 500;
  double gps_ridge = 1e-6;
  double clip_lo = 0.01;
  std::vector<double> lambda_grid = default_lambda_grid();
  int cv_folds = 3;
  int cv_max_redraws = 20;
  SurvivalForestConfig forest{};  // imputation settings for survival inputs
};

// Training state shared by tuning and final fits: standardized covariates,
// the estimated GPS, and the weighted classification instances of the method.
struct PreparedTraining {
  StandardizedDataset std_data;
  GpsModel gps;
  std::vector<ClassificationInstance> instances;
};

inline PreparedTraining prepare_training(const Dataset& train, const PipelineConfig& cfg,
                                         std::uint64_t tuple_seed) {
  if (!train.has_outcomes())
    throw std::invalid_argument("training data has no outcomes; impute survival data first");
  PreparedTraining prep{standardize_covariates(train), {}, {}};
  prep.gps = fit_multinomial(prep.std_data.data, cfg.gps_ridge, cfg.clip_lo);
  if (cfg.method == Method::MultiOl) {
    // One instance per subject, label = received treatment, weight = shifted
    // outcome over the clipped propensity of the received treatment.
    const Dataset& d = prep.std_data.data;
    double rmin = *std::min_element(d.outcomes.begin(), d.outcomes.end());
    const double shift = std::min(0.0, rmin);
    prep.instances.reserve(d.n());
    for (int i = 0; i < d.n(); ++i) {
      ClassificationInstance inst;
      inst.subject = i;
      inst.features = d.covariates.row(i).transpose();
      inst.label = d.treatments[i];
      const Eigen::VectorXd pr = prep.gps.predict(inst.features);
      inst.weight = (d.outcomes[i] - shift) / pr[d.treatments[i] - 1];
      prep.instances.push_back(std::move(inst));
    }
  } else {
    const MatchedSets ms =
        build_matched_sets(prep.std_data.data, cfg.metric, cfg.m,
                           cfg.metric == MatchMetric::Gps ? &prep.gps : nullptr, cfg.caliper);
    prep.instances =
        build_instances(prep.std_data.data, ms, weight_kind_for(cfg.method), cfg.tuple_cap, tuple_seed);
  }
  return prep;
}

// Solver options for a prepared instance set. The convergence tolerance is
// absolute in alpha; Multi-OL weights are orders of magnitude larger than the
// matched weights (no 1/n), so the tolerance scales with the largest box to
// keep convergence effort comparable across methods.
inline RamsvmOptions solver_options(const PipelineConfig& cfg,
                                    const std::vector<ClassificationInstance>& inst) {
  RamsvmOptions opt;
  opt.gamma = cfg.gamma;
  opt.max_sweeps = cfg.max_sweeps;
  double wmax = 0.0;
  for (const auto& t : inst) wmax = std::max(wmax, t.weight);
  opt.tol = cfg.tol * std::max(1.0, wmax * std::max(cfg.gamma, 1.0 - cfg.gamma));
  return opt;
}

struct FittedRule {
  Standardizer transform;
  GpsModel gps;
  RamsvmModel model;
  double lambda = 0.0;
  int k = 0;

  Rule rule() const {
    Rule r;
    r.k = k;
    const Standardizer tf = transform;
    const RamsvmModel mod = model;
    r.assign = [tf, mod](const Eigen::VectorXd& x) { return mod.predict(tf.apply_row(x)); };
    return r;
  }
};

// Fits the configured method at a fixed lambda on the full training data.
inline FittedRule fit_with_lambda(const Dataset& train, const PipelineConfig& cfg, double lambda,
                                  std::uint64_t tuple_seed) {
  PreparedTraining prep = prepare_training(train, cfg, tuple_seed);
  FittedRule out;
  out.transform = prep.std_data.transform;
  out.gps = prep.gps;
  out.k = train.k;
  out.lambda = lambda;
  out.model = ramsvm_fit(prep.instances, train.k, cfg.kernel, lambda, solver_options(cfg, prep.instances));
  return out;
}

struct CvResult {
  double best_lambda = 0.0;
  std::vector<double> mean_values;               // per grid entry, grid order
  std::vector<std::vector<double>> fold_values;  // [grid index][fold]
};

namespace detail {

inline Dataset subset_dataset(const Dataset& d, const std::vector<int>& rows) {
  Dataset out;
  out.k = d.k;
  out.covariate_names = d.covariate_names;
  out.original_labels = d.original_labels;
  out.covariates.resize(int(rows.size()), d.p());
  out.treatments.resize(rows.size());
  if (d.has_outcomes()) out.outcomes.resize(rows.size());
  if (!d.optimal_arms.empty()) out.optimal_arms.resize(rows.size());
  if (d.survival) out.survival = SurvivalData{std::vector<double>(rows.size()), std::vector<int>(rows.size())};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    out.covariates.row(int(r)) = d.covariates.row(i);
    out.treatments[r] = d.treatments[i];
    if (d.has_outcomes()) out.outcomes[r] = d.outcomes[i];
    if (!d.optimal_arms.empty()) out.optimal_arms[r] = d.optimal_arms[i];
    if (d.survival) {
      out.survival->time[r] = d.survival->time[i];
      out.survival->event[r] = d.survival->event[i];
    }
  }
  return out;
}

// Stratified-by-arm fold assignment; every fold (and its complement) must
// contain every arm. Redraws with fresh shuffles up to max_redraws times.
inline std::vector<int> assign_folds(const Dataset& d, int folds, std::uint64_t seed,
                                     int max_redraws) {
  std::vector<int> fold_of(d.n());
  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    Rng rng(derive_seed(seed, 7000 + std::uint64_t(attempt)));
    std::vector<std::vector<int>> arm_rows(d.k);
    for (int i = 0; i < d.n(); ++i) arm_rows[d.treatments[i] - 1].push_back(i);
    for (auto& rows : arm_rows) rng.shuffle(rows);
    for (int a = 0; a < d.k; ++a)
      for (std::size_t j = 0; j < arm_rows[a].size(); ++j)
        fold_of[arm_rows[a][j]] = int(j % std::size_t(folds));
    // Coverage: each fold and each complement needs all arms.
    std::vector<std::vector<int>> count(folds, std::vector<int>(d.k, 0));
    for (int i = 0; i < d.n(); ++i) ++count[fold_of[i]][d.treatments[i] - 1];
    bool ok = true;
    for (int f = 0; f < folds && ok; ++f)
      for (int a = 0; a < d.k && ok; ++a) {
        int total = 0;
        for (int g = 0; g < folds; ++g) total += count[g][a];
        if (count[f][a] == 0 || total - count[f][a] == 0) ok = false;
      }
    if (ok) return fold_of;
  }
  throw std::runtime_error("could not build stratified folds with all arms present after " +
                           std::to_string(max_redraws) + " redraws");
}

}  // namespace detail

// Three-fold (by default) cross-validated lambda selection: for each fold,
// matching, labeling, GPS estimation, and the solver see only the training
// folds; the held-out fold is scored by the IPW empirical value under the
// training-fold GPS. The winner maximizes the mean value, ties toward the
// larger lambda. Warm starts run along the grid from the largest lambda down.
inline CvResult cross_validate_lambda(const Dataset& train, const PipelineConfig& cfg,
                                      const std::vector<double>& lambda_grid, int folds,
                                      std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (lambda_grid.empty()) throw std::invalid_argument("empty lambda grid");
  if (train.n() < folds * train.k)
    throw std::invalid_argument("too few subjects for stratified " + std::to_string(folds) +
                                "-fold CV");
  const std::vector<int> fold_of = detail::assign_folds(train, folds, seed, cfg.cv_max_redraws);

  // Grid processed in descending order; results reported in the given order.
  std::vector<int> order(lambda_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return lambda_grid[a] > lambda_grid[b]; });

  CvResult res;
  res.fold_values.assign(lambda_grid.size(), std::vector<double>(folds, 0.0));

  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < train.n(); ++i)
      (fold_of[i] == f ? test_rows : train_rows).push_back(i);
    const Dataset sub = detail::subset_dataset(train, train_rows);
    const Dataset held = detail::subset_dataset(train, test_rows);
    PreparedTraining prep = prepare_training(sub, cfg, derive_seed(seed, 100 + std::uint64_t(f)));
    const RamsvmOptions opt = solver_options(cfg, prep.instances);

    // Held-out propensities under the training-fold GPS (clipped).
    std::vector<Eigen::VectorXd> held_gps(held.n());
    for (int i = 0; i < held.n(); ++i)
      held_gps[i] = prep.gps.predict(prep.std_data.transform.apply_row(held.covariates.row(i).transpose()));

    // One Gram per fold, shared across the lambda path.
    KernelSpec kernel = cfg.kernel;
    Eigen::MatrixXd gram;
    const Eigen::MatrixXd* gram_ptr = nullptr;
    if (kernel.type == KernelSpec::Type::Gaussian) {
      Eigen::MatrixXd feat(int(prep.instances.size()), train.p());
      for (std::size_t t = 0; t < prep.instances.size(); ++t)
        feat.row(int(t)) = prep.instances[t].features.transpose();
      if (kernel.bandwidth <= 0.0) kernel.bandwidth = median_pairwise_distance(feat);
      gram = gaussian_gram(feat, kernel.bandwidth);
      gram_ptr = &gram;
    }

    Eigen::MatrixXd warm;
    const Eigen::MatrixXd* warm_ptr = nullptr;
    for (int gi : order) {
      RamsvmModel model = ramsvm_fit(prep.instances, train.k, kernel, lambda_grid[gi], opt,
                                     gram_ptr, warm_ptr);
      warm = model.alpha;
      warm_ptr = &warm;
      Rule rule;
      rule.k = train.k;
      const Standardizer tf = prep.std_data.transform;
      rule.assign = [&tf, &model](const Eigen::VectorXd& x) { return model.predict(tf.apply_row(x)); };
      double value;
      try {
        value = empirical_value(rule, held, held_gps);
      } catch (const std::runtime_error&) {
        value = -std::numeric_limits<double>::infinity();  // rule matched nobody held out
      }
      res.fold_values[gi][f] = value;
    }
  }

  res.mean_values.resize(lambda_grid.size());
  for (std::size_t gi = 0; gi < lambda_grid.size(); ++gi) {
    double s = 0.0;
    for (int f = 0; f < folds; ++f) s += res.fold_values[gi][f];
    res.mean_values[gi] = s / double(folds);
  }
  double best = -std::numeric_limits<double>::infinity();
  int best_gi = -1;
  for (std::size_t gi = 0; gi < lambda_grid.size(); ++gi) {
    const double v = res.mean_values[gi];
    if (v > best || (v == best && best_gi >= 0 && lambda_grid[gi] > lambda_grid[best_gi])) {
      best = v;
      best_gi = int(gi);
    }
  }
  if (best_gi < 0 || !std::isfinite(best))
    throw std::runtime_error("cross-validation failed: no lambda produced a usable rule");
  res.best_lambda = lambda_grid[best_gi];
  return res;
}

// Tune lambda by CV, then refit on the full training data.
inline FittedRule fit_method(const Dataset& train, const PipelineConfig& cfg, std::uint64_t seed) {
  const CvResult cv = cross_validate_lambda(train, cfg, cfg.lambda_grid, cfg.cv_folds,
                                            derive_seed(seed, 11));
  return fit_with_lambda(train, cfg, cv.best_lambda, derive_seed(seed, 12));
}

// Multi-OL front door matching the comparator description: estimated GPS,
// IPW-weighted instances, same solver and tuning pipeline.
inline FittedRule fit_multi_ol(const Dataset& train, const PipelineConfig& base,
                               std::uint64_t seed) {
  PipelineConfig cfg = base;
  cfg.method = Method::MultiOl;
  return fit_method(train, cfg, seed);
}

}  // namespace matchitr
