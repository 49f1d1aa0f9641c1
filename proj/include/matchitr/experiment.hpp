#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchitr/pipeline.hpp"
#include "matchitr/simulation.hpp"

namespace matchitr {

struct ExperimentConfig {
  ScenarioConfig scenario;
  int n = 1000;
  int test_n = 20000;
  int replications = 20;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::MatchG1, Method::MatchGw1, Method::MatchGw2,
                              Method::MultiOl};
  PipelineConfig pipeline;
};

struct ResultRow {
  std::string scenario;
  std::string method;
  int replication = 0;  // 1-based
  double value = 0.0;
  double misclassification = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;
};

// Deterministic seed streams for one experiment. Public so that a file-based
// run (simulate / impute / tune / fit via the CLI) can reproduce the
// in-process experiment bit for bit.
namespace exp_seed {
inline std::uint64_t replication(std::uint64_t base, int rep) {  // rep is 1-based
  return derive_seed(base, 1000 + std::uint64_t(rep));
}
inline std::uint64_t train_gen(std::uint64_t rep_seed) { return derive_seed(rep_seed, 1); }
inline std::uint64_t test_gen(std::uint64_t rep_seed) { return derive_seed(rep_seed, 2); }
inline std::uint64_t forest(std::uint64_t rep_seed) { return derive_seed(rep_seed, 3); }
inline std::uint64_t method_stream(std::uint64_t rep_seed, Method m) {
  return derive_seed(rep_seed, 20 + std::uint64_t(int(m)));
}
// fit_method consumes its seed through these two streams.
inline std::uint64_t tuning(std::uint64_t method_seed) { return derive_seed(method_seed, 11); }
inline std::uint64_t final_fit(std::uint64_t method_seed) { return derive_seed(method_seed, 12); }
}  // namespace exp_seed

// Runs the replication study: per replication, fresh train/test draws, one
// shared imputation for survival designs, then every method tuned and fitted
// on the training data and scored on the test set with the true GPS. A
// failing (replication, method) pair is recorded and skipped.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) throw std::invalid_argument("need at least 1 replication");
  if (cfg.n < 2 || cfg.test_n < 1) throw std::invalid_argument("invalid n or test_n");
  ExperimentResult result;
  const std::string scen = scenario_code(cfg.scenario);
  for (int rep = 1; rep <= cfg.replications; ++rep) {
    const std::uint64_t rs = exp_seed::replication(cfg.seed, rep);
    Dataset train, test;
    try {
      if (cfg.scenario.outcome == OutcomeKind::Continuous) {
        train = generate_continuous(cfg.scenario, cfg.n, exp_seed::train_gen(rs));
        test = generate_continuous(cfg.scenario, cfg.test_n, exp_seed::test_gen(rs));
      } else {
        train = generate_survival(cfg.scenario, cfg.n, exp_seed::train_gen(rs));
        test = generate_survival(cfg.scenario, cfg.test_n, exp_seed::test_gen(rs), nullptr,
                                 /*with_truth=*/true);
        SurvivalForestConfig fc = cfg.pipeline.forest;
        fc.seed = exp_seed::forest(rs);
        const SurvivalForest forest = fit_survival_forest(train, fc);
        train = with_imputed_outcomes(train, mean_residual_impute(forest, train, cfg.scenario.tau));
      }
    } catch (const std::exception& e) {
      result.failures.push_back("replication " + std::to_string(rep) + ": " + e.what());
      continue;
    }
    std::vector<Eigen::VectorXd> test_gps(test.n());
    for (int i = 0; i < test.n(); ++i)
      test_gps[i] = true_gps(cfg.scenario.gps, test.covariates.row(i).transpose());
    for (Method m : cfg.methods) {
      try {
        PipelineConfig pc = cfg.pipeline;
        pc.method = m;
        const FittedRule fitted = fit_method(train, pc, exp_seed::method_stream(rs, m));
        const Rule rule = fitted.rule();
        ResultRow row;
        row.scenario = scen;
        row.method = method_name(m);
        row.replication = rep;
        row.value = empirical_value(rule, test, test_gps);
        row.misclassification = misclassification(rule, test);
        result.rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        result.failures.push_back("replication " + std::to_string(rep) + ", " + method_name(m) +
                                  ": " + e.what());
      }
    }
  }
  return result;
}

inline void write_results(const ExperimentResult& res, const std::string& path,
                          const std::vector<std::string>& comment_lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& c : comment_lines) out << "# " << c << "\n";
  for (const auto& f : res.failures) out << "# failure: " << f << "\n";
  out << "scenario,method,replication,value,misclassification\n";
  for (const auto& r : res.rows)
    out << r.scenario << ',' << r.method << ',' << r.replication << ','
        << detail::format_double(r.value) << ',' << detail::format_double(r.misclassification)
        << "\n";
}

}  // namespace matchitr
