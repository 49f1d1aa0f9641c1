// matchitr: estimate and evaluate individualized treatment rules for
// multi-arm observational data.
//
// Subcommands: simulate, impute, match, fit, evaluate, tune, experiment.
// Every output file begins with '#' comment lines echoing the resolved
// configuration and seed. Exit status: 0 success, 1 runtime failure,
// 2 usage error.

#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "matchitr/matchitr.hpp"

namespace {

using namespace matchitr;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One config-file-overridable setting: the JSON key, the CLI option that
// takes precedence over it, and how to pour a JSON value into the target.
struct ConfigBinding {
  std::string key;
  CLI::Option* opt = nullptr;
  std::function<void(const nlohmann::json&)> apply;
};

template <class T>
void bind_key(std::vector<ConfigBinding>& binds, CLI::Option* opt, const std::string& key,
              T& target) {
  binds.push_back({key, opt, [&target, key](const nlohmann::json& v) {
                     try {
                       target = v.get<T>();
                     } catch (const std::exception&) {
                       throw UsageError("config key '" + key + "' has the wrong type");
                     }
                   }});
}

void apply_config(const std::string& path, std::vector<ConfigBinding>& binds) {
  if (path.empty()) return;
  nlohmann::json cfg;
  try {
    cfg = load_json(path);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    ConfigBinding* hit = nullptr;
    for (auto& b : binds)
      if (b.key == it.key()) hit = &b;
    if (!hit) throw UsageError("unknown config key '" + it.key() + "'");
    if (hit->opt != nullptr && hit->opt->count() > 0) continue;  // flag wins
    hit->apply(it.value());
  }
}

std::string kv(const std::string& k, const std::string& v) { return k + " = " + v; }
std::string kv(const std::string& k, double v) { return k + " = " + detail::format_double(v); }
std::string kv(const std::string& k, int v) { return k + " = " + std::to_string(v); }
std::string kv(const std::string& k, std::uint64_t v) { return k + " = " + std::to_string(v); }

// ---------------------------------------------------------------------------
// Shared option groups

struct ScenarioOpts {
  std::string scenario = "LS";
  std::string gps = "correct";
  std::string outcome = "continuous";

  ScenarioConfig resolve() const {
    ScenarioConfig c = parse_scenario(scenario);
    if (gps == "correct") c.gps = GpsSpec::Correct;
    else if (gps == "misspecified") c.gps = GpsSpec::Misspecified;
    else throw UsageError("--gps must be correct or misspecified");
    if (outcome == "continuous") c.outcome = OutcomeKind::Continuous;
    else if (outcome == "survival") c.outcome = OutcomeKind::Survival;
    else throw UsageError("--outcome must be continuous or survival");
    return c;
  }
  void describe(std::vector<std::string>& h) const {
    h.push_back(kv("scenario", scenario));
    h.push_back(kv("gps", gps));
    h.push_back(kv("outcome", outcome));
  }
};

void add_scenario_opts(CLI::App* app, ScenarioOpts& s, std::vector<ConfigBinding>& binds) {
  auto* o1 = app->add_option("--scenario", s.scenario, "Scenario code: LS, NS, LC or NC")
                 ->check(CLI::IsMember({"LS", "NS", "LC", "NC"}));
  auto* o2 = app->add_option("--gps", s.gps, "Propensity model used by the generator")
                 ->check(CLI::IsMember({"correct", "misspecified"}));
  auto* o3 = app->add_option("--outcome", s.outcome, "Outcome kind")
                 ->check(CLI::IsMember({"continuous", "survival"}));
  bind_key(binds, o1, "scenario", s.scenario);
  bind_key(binds, o2, "gps", s.gps);
  bind_key(binds, o3, "outcome", s.outcome);
}

struct FitOpts {
  std::string method = "match-gw1";
  std::string metric = "mahalanobis";
  int m = 1;
  double caliper = std::numeric_limits<double>::infinity();
  int tuple_cap = 64;
  std::string kernel = "gaussian";
  double bandwidth = 0.0;
  double gamma = 0.5;
  double tol = 1e-6;
  int max_sweeps = 500;
  double clip = 0.01;
  double gps_ridge = 1e-6;
  std::vector<double> lambda_grid;  // empty -> default grid
  int folds = 3;

  PipelineConfig resolve() const {
    PipelineConfig pc;
    pc.method = parse_method(method);
    if (metric == "mahalanobis") pc.metric = MatchMetric::Mahalanobis;
    else if (metric == "gps") pc.metric = MatchMetric::Gps;
    else throw UsageError("--metric must be mahalanobis or gps");
    pc.m = m;
    pc.caliper = caliper;
    pc.tuple_cap = tuple_cap;
    pc.kernel = parse_kernel(kernel, bandwidth);
    pc.gamma = gamma;
    pc.tol = tol;
    pc.max_sweeps = max_sweeps;
    pc.clip_lo = clip;
    pc.gps_ridge = gps_ridge;
    if (!lambda_grid.empty()) pc.lambda_grid = lambda_grid;
    pc.cv_folds = folds;
    return pc;
  }
  void describe(std::vector<std::string>& h) const {
    h.push_back(kv("method", method));
    h.push_back(kv("metric", metric));
    h.push_back(kv("m", m));
    h.push_back(kv("caliper", caliper));
    h.push_back(kv("tuple_cap", tuple_cap));
    h.push_back(kv("kernel", kernel));
    h.push_back(kv("bandwidth", bandwidth));
    h.push_back(kv("gamma", gamma));
    h.push_back(kv("tol", tol));
    h.push_back(kv("max_sweeps", max_sweeps));
    h.push_back(kv("clip", clip));
    h.push_back(kv("gps_ridge", gps_ridge));
    std::string grid;
    for (double l : (lambda_grid.empty() ? default_lambda_grid() : lambda_grid))
      grid += (grid.empty() ? "" : " ") + detail::format_double(l);
    h.push_back(kv("lambda_grid", grid));
    h.push_back(kv("folds", folds));
  }
};

void add_fit_opts(CLI::App* app, FitOpts& f, std::vector<ConfigBinding>& binds,
                  bool with_method = true) {
  if (with_method) {
    auto* om = app->add_option("--method", f.method, "Rule estimator")
                   ->check(CLI::IsMember({"match-g1", "match-gw1", "match-gw2", "multi-ol"}));
    bind_key(binds, om, "method", f.method);
  }
  auto* o1 = app->add_option("--metric", f.metric, "Matching metric")
                 ->check(CLI::IsMember({"mahalanobis", "gps"}));
  auto* o2 = app->add_option("--m", f.m, "Matched-set size per arm")->check(CLI::PositiveNumber);
  auto* o3 = app->add_option("--caliper", f.caliper, "Drop matches farther than this distance");
  auto* o4 = app->add_option("--tuple-cap", f.tuple_cap, "Max matched tuples kept per subject")
                 ->check(CLI::PositiveNumber);
  auto* o5 = app->add_option("--kernel", f.kernel, "SVM kernel")
                 ->check(CLI::IsMember({"linear", "gaussian"}));
  auto* o6 = app->add_option("--bandwidth", f.bandwidth,
                             "Gaussian bandwidth (0 = median heuristic)");
  auto* o7 = app->add_option("--gamma", f.gamma, "Reinforced-loss mixing weight in [0,1]");
  auto* o8 = app->add_option("--tol", f.tol, "Solver convergence tolerance");
  auto* o9 = app->add_option("--max-sweeps", f.max_sweeps, "Solver sweep budget");
  auto* o10 = app->add_option("--clip", f.clip, "Lower clip bound for estimated propensities");
  auto* o11 = app->add_option("--gps-ridge", f.gps_ridge, "Ridge penalty for the GPS fit");
  auto* o12 = app->add_option("--lambda", f.lambda_grid,
                              "Regularization grid value (repeatable; default 10^-4..10^2)");
  auto* o13 = app->add_option("--folds", f.folds, "Cross-validation folds")
                  ->check(CLI::PositiveNumber);
  bind_key(binds, o1, "metric", f.metric);
  bind_key(binds, o2, "m", f.m);
  bind_key(binds, o3, "caliper", f.caliper);
  bind_key(binds, o4, "tuple_cap", f.tuple_cap);
  bind_key(binds, o5, "kernel", f.kernel);
  bind_key(binds, o6, "bandwidth", f.bandwidth);
  bind_key(binds, o7, "gamma", f.gamma);
  bind_key(binds, o8, "tol", f.tol);
  bind_key(binds, o9, "max_sweeps", f.max_sweeps);
  bind_key(binds, o10, "clip", f.clip);
  bind_key(binds, o11, "gps_ridge", f.gps_ridge);
  bind_key(binds, o12, "lambda_grid", f.lambda_grid);
  bind_key(binds, o13, "folds", f.folds);
}

struct ForestOpts {
  int trees = 200;
  int min_node = 15;
  int nsplit = 10;
  int mtry = 0;
  double tau = 9.1;

  SurvivalForestConfig resolve(std::uint64_t seed) const {
    SurvivalForestConfig fc;
    fc.n_trees = trees;
    fc.min_node = min_node;
    fc.nsplit = nsplit;
    fc.mtry = mtry;
    fc.seed = seed;
    return fc;
  }
  void describe(std::vector<std::string>& h) const {
    h.push_back(kv("trees", trees));
    h.push_back(kv("min_node", min_node));
    h.push_back(kv("nsplit", nsplit));
    h.push_back(kv("mtry", mtry));
    h.push_back(kv("tau", tau));
  }
};

void add_forest_opts(CLI::App* app, ForestOpts& f, std::vector<ConfigBinding>& binds) {
  auto* o1 = app->add_option("--trees", f.trees, "Survival-forest size")->check(CLI::PositiveNumber);
  auto* o2 = app->add_option("--min-node", f.min_node, "Minimum samples per child node")
                 ->check(CLI::PositiveNumber);
  auto* o3 = app->add_option("--nsplit", f.nsplit, "Random cut points per candidate variable")
                 ->check(CLI::PositiveNumber);
  auto* o4 = app->add_option("--mtry", f.mtry, "Candidate variables per node (0 = sqrt rule)");
  auto* o5 = app->add_option("--tau", f.tau, "End of study; imputed outcomes are capped here");
  bind_key(binds, o1, "trees", f.trees);
  bind_key(binds, o2, "min_node", f.min_node);
  bind_key(binds, o3, "nsplit", f.nsplit);
  bind_key(binds, o4, "mtry", f.mtry);
  bind_key(binds, o5, "tau", f.tau);
}

Dataset load_csv(const std::string& path) {
  return load_dataset(path, infer_schema(path));
}

// ---------------------------------------------------------------------------
// Subcommand state

struct SimulateCmd {
  ScenarioOpts scen;
  int n = 1000;
  bool with_truth = false;
  std::uint64_t seed = 1;
  std::string config, out;
  std::vector<ConfigBinding> binds;
};

struct ImputeCmd {
  ForestOpts forest;
  std::uint64_t seed = 1;
  std::string in, config, out;
  std::vector<ConfigBinding> binds;
};

struct MatchCmd {
  std::string metric = "mahalanobis";
  int m = 1;
  double caliper = std::numeric_limits<double>::infinity();
  double clip = 0.01;
  double gps_ridge = 1e-6;
  std::string in, config, out;
  std::vector<ConfigBinding> binds;
};

struct FitCmd {
  FitOpts fit;
  std::uint64_t seed = 1;
  std::string in, config, out;
  std::vector<ConfigBinding> binds;
};

struct EvaluateCmd {
  ScenarioOpts scen;
  std::string gps_source = "true";
  std::string in, model, config, out;
  std::vector<ConfigBinding> binds;
};

struct ExperimentCmd {
  ScenarioOpts scen;
  FitOpts fit;
  ForestOpts forest;
  std::vector<std::string> methods;
  int n = 1000;
  int test_n = 20000;
  int reps = 20;
  std::uint64_t seed = 1;
  std::string config, out;
  std::vector<ConfigBinding> binds;
};

// ---------------------------------------------------------------------------
// Runners

int run_simulate(SimulateCmd& c) {
  apply_config(c.config, c.binds);
  const ScenarioConfig sc = c.scen.resolve();
  std::vector<std::string> header{"matchitr simulate"};
  c.scen.describe(header);
  header.push_back(kv("n", c.n));
  header.push_back(kv("with_truth", std::string(c.with_truth ? "true" : "false")));
  header.push_back(kv("seed", c.seed));
  Dataset d;
  if (sc.outcome == OutcomeKind::Continuous) {
    d = generate_continuous(sc, c.n, c.seed);
  } else {
    SurvivalGenDiagnostics diag;
    d = generate_survival(sc, c.n, c.seed, &diag, c.with_truth);
    header.push_back(kv("censor_fraction", diag.censor_fraction));
  }
  save_dataset(d, c.out, header);
  return 0;
}

int run_impute(ImputeCmd& c) {
  apply_config(c.config, c.binds);
  Dataset d = load_csv(c.in);
  if (!d.survival) throw std::runtime_error("input has no time/event columns to impute from");
  SurvivalForestConfig fc = c.forest.resolve(c.seed);
  const SurvivalForest forest = fit_survival_forest(d, fc);
  const auto imp = mean_residual_impute(forest, d, c.forest.tau);
  int observed = 0, imputed = 0, capped = 0;
  for (const auto& r : imp) {
    if (r.source == ImputeSource::Observed) ++observed;
    else if (r.source == ImputeSource::Imputed) ++imputed;
    else ++capped;
  }
  Dataset out = with_imputed_outcomes(d, imp);
  std::vector<std::string> header{"matchitr impute"};
  header.push_back(kv("in", c.in));
  c.forest.describe(header);
  header.push_back(kv("seed", c.seed));
  header.push_back(kv("observed", observed));
  header.push_back(kv("imputed", imputed));
  header.push_back(kv("capped", capped));
  save_dataset(out, c.out, header);
  return 0;
}

int run_match(MatchCmd& c) {
  apply_config(c.config, c.binds);
  Dataset d = load_csv(c.in);
  const StandardizedDataset std_data = standardize_covariates(d);
  MatchMetric metric;
  if (c.metric == "mahalanobis") metric = MatchMetric::Mahalanobis;
  else if (c.metric == "gps") metric = MatchMetric::Gps;
  else throw UsageError("--metric must be mahalanobis or gps");
  GpsModel gps;
  if (metric == MatchMetric::Gps)
    gps = fit_multinomial(std_data.data, c.gps_ridge, c.clip);
  const MatchedSets ms = build_matched_sets(std_data.data, metric, c.m,
                                            metric == MatchMetric::Gps ? &gps : nullptr, c.caliper);
  std::vector<std::string> header{"matchitr match"};
  header.push_back(kv("in", c.in));
  header.push_back(kv("metric", c.metric));
  header.push_back(kv("m", c.m));
  header.push_back(kv("caliper", c.caliper));
  header.push_back(kv("clip", c.clip));
  header.push_back("covariates are standardized before matching");
  save_json(matched_sets_to_json(ms), c.out, header);
  return 0;
}

int run_fit(FitCmd& c) {
  apply_config(c.config, c.binds);
  Dataset d = load_csv(c.in);
  const PipelineConfig pc = c.fit.resolve();
  const FittedRule fitted = fit_method(d, pc, c.seed);
  std::vector<std::string> header{"matchitr fit"};
  header.push_back(kv("in", c.in));
  c.fit.describe(header);
  header.push_back(kv("seed", c.seed));
  header.push_back(kv("best_lambda", fitted.lambda));
  save_json(fitted_rule_to_json(fitted), c.out, header);
  return 0;
}

int run_tune(FitCmd& c) {
  apply_config(c.config, c.binds);
  Dataset d = load_csv(c.in);
  const PipelineConfig pc = c.fit.resolve();
  // Mirrors the tuning stream consumed inside `fit` for the same --seed.
  const CvResult cv =
      cross_validate_lambda(d, pc, pc.lambda_grid, pc.cv_folds, derive_seed(c.seed, 11));
  std::vector<std::string> header{"matchitr tune"};
  header.push_back(kv("in", c.in));
  c.fit.describe(header);
  header.push_back(kv("seed", c.seed));
  header.push_back(kv("best_lambda", cv.best_lambda));
  std::ofstream out(c.out);
  if (!out) throw std::runtime_error("cannot write '" + c.out + "'");
  for (const auto& h : header) out << "# " << h << "\n";
  out << "lambda,mean_value";
  const std::size_t folds = cv.fold_values.empty() ? 0 : cv.fold_values[0].size();
  for (std::size_t f = 0; f < folds; ++f) out << ",fold" << (f + 1);
  out << "\n";
  for (std::size_t g = 0; g < pc.lambda_grid.size(); ++g) {
    out << detail::format_double(pc.lambda_grid[g]) << ','
        << detail::format_double(cv.mean_values[g]);
    for (std::size_t f = 0; f < folds; ++f)
      out << ',' << detail::format_double(cv.fold_values[g][f]);
    out << "\n";
  }
  std::cout << "best_lambda = " << detail::format_double(cv.best_lambda) << "\n";
  return 0;
}

int run_evaluate(EvaluateCmd& c) {
  apply_config(c.config, c.binds);
  Dataset d = load_csv(c.in);
  const FittedRule fitted = fitted_rule_from_json(load_json(c.model));
  const Rule rule = fitted.rule();
  std::vector<Eigen::VectorXd> gps(d.n());
  if (c.gps_source == "true") {
    const ScenarioConfig sc = c.scen.resolve();
    for (int i = 0; i < d.n(); ++i)
      gps[i] = true_gps(sc.gps, d.covariates.row(i).transpose());
  } else if (c.gps_source == "estimated") {
    const StandardizedDataset std_data = standardize_covariates(d);
    const GpsModel m = fit_multinomial(std_data.data);
    for (int i = 0; i < d.n(); ++i)
      gps[i] = m.predict(std_data.data.covariates.row(i).transpose());
  } else {
    throw UsageError("--gps-source must be true or estimated");
  }
  const double value = empirical_value(rule, d, gps);
  std::vector<std::string> header{"matchitr evaluate"};
  header.push_back(kv("in", c.in));
  header.push_back(kv("model", c.model));
  header.push_back(kv("gps_source", c.gps_source));
  if (c.gps_source == "true") c.scen.describe(header);
  std::ostringstream report;
  report << "value = " << detail::format_double(value) << "\n";
  if (!d.optimal_arms.empty()) {
    report << "misclassification = " << detail::format_double(misclassification(rule, d)) << "\n";
  }
  std::cout << report.str();
  if (!c.out.empty()) {
    std::ofstream f(c.out);
    if (!f) throw std::runtime_error("cannot write '" + c.out + "'");
    for (const auto& h : header) f << "# " << h << "\n";
    f << report.str();
  }
  return 0;
}

int run_experiment_cmd(ExperimentCmd& c) {
  apply_config(c.config, c.binds);
  ExperimentConfig ec;
  ec.scenario = c.scen.resolve();
  ec.scenario.tau = c.forest.tau;
  ec.n = c.n;
  ec.test_n = c.test_n;
  ec.replications = c.reps;
  ec.seed = c.seed;
  ec.pipeline = c.fit.resolve();
  ec.pipeline.forest = c.forest.resolve(0);  // per-replication seeds are derived internally
  if (!c.methods.empty()) {
    ec.methods.clear();
    for (const auto& name : c.methods) ec.methods.push_back(parse_method(name));
  }
  const ExperimentResult res = run_experiment(ec);
  std::vector<std::string> header{"matchitr experiment"};
  c.scen.describe(header);
  std::string mnames;
  for (Method m : ec.methods) mnames += (mnames.empty() ? "" : " ") + method_name(m);
  header.push_back(kv("methods", mnames));
  header.push_back(kv("n", c.n));
  header.push_back(kv("test_n", c.test_n));
  header.push_back(kv("replications", c.reps));
  header.push_back(kv("seed", c.seed));
  c.fit.describe(header);
  if (ec.scenario.outcome == OutcomeKind::Survival) c.forest.describe(header);
  write_results(res, c.out, header);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individualized treatment rules via matching-weighted multicategory SVM"};
  app.require_subcommand(1);

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "Draw a synthetic dataset and write it as CSV");
  add_scenario_opts(s, sim.scen, sim.binds);
  auto* sn = s->add_option("--n", sim.n, "Sample size")->check(CLI::PositiveNumber);
  s->add_flag("--with-truth", sim.with_truth,
              "Survival draws carry the tau-restricted true outcome (test sets)");
  auto* ss = s->add_option("--seed", sim.seed, "Generator seed");
  s->add_option("--config", sim.config, "JSON config file (flags take precedence)");
  s->add_option("--out", sim.out, "Output CSV path")->required();
  bind_key(sim.binds, sn, "n", sim.n);
  bind_key(sim.binds, ss, "seed", sim.seed);

  ImputeCmd imp;
  auto* i = app.add_subcommand("impute",
                               "Complete censored survival outcomes by forest mean residual life");
  auto* ii = i->add_option("--in", imp.in, "Input CSV with time/event columns")->required();
  add_forest_opts(i, imp.forest, imp.binds);
  auto* is = i->add_option("--seed", imp.seed, "Forest seed");
  i->add_option("--config", imp.config, "JSON config file (flags take precedence)");
  i->add_option("--out", imp.out, "Output CSV path")->required();
  bind_key(imp.binds, ii, "in", imp.in);
  bind_key(imp.binds, is, "seed", imp.seed);

  MatchCmd mat;
  auto* mcmd = app.add_subcommand("match", "Build matched sets and write them as JSON");
  auto* mi = mcmd->add_option("--in", mat.in, "Input CSV")->required();
  auto* mm1 = mcmd->add_option("--metric", mat.metric, "Matching metric")
                  ->check(CLI::IsMember({"mahalanobis", "gps"}));
  auto* mm2 = mcmd->add_option("--m", mat.m, "Matched-set size per arm")->check(CLI::PositiveNumber);
  auto* mm3 = mcmd->add_option("--caliper", mat.caliper, "Drop matches farther than this distance");
  auto* mm4 = mcmd->add_option("--clip", mat.clip, "Lower clip bound for estimated propensities");
  auto* mm5 = mcmd->add_option("--gps-ridge", mat.gps_ridge, "Ridge penalty for the GPS fit");
  mcmd->add_option("--config", mat.config, "JSON config file (flags take precedence)");
  mcmd->add_option("--out", mat.out, "Output JSON path")->required();
  bind_key(mat.binds, mi, "in", mat.in);
  bind_key(mat.binds, mm1, "metric", mat.metric);
  bind_key(mat.binds, mm2, "m", mat.m);
  bind_key(mat.binds, mm3, "caliper", mat.caliper);
  bind_key(mat.binds, mm4, "clip", mat.clip);
  bind_key(mat.binds, mm5, "gps_ridge", mat.gps_ridge);

  FitCmd fit;
  auto* f = app.add_subcommand("fit", "Tune lambda by cross-validation and fit a treatment rule");
  auto* fi = f->add_option("--in", fit.in, "Training CSV (imputed outcomes for survival data)")
                 ->required();
  add_fit_opts(f, fit.fit, fit.binds);
  auto* fs = f->add_option("--seed", fit.seed, "Seed for tuple subsampling and fold assignment");
  f->add_option("--config", fit.config, "JSON config file (flags take precedence)");
  f->add_option("--out", fit.out, "Output model JSON path")->required();
  bind_key(fit.binds, fi, "in", fit.in);
  bind_key(fit.binds, fs, "seed", fit.seed);

  FitCmd tune;
  auto* t = app.add_subcommand("tune", "Report the cross-validation profile over the lambda grid");
  auto* ti = t->add_option("--in", tune.in, "Training CSV (imputed outcomes for survival data)")
                 ->required();
  add_fit_opts(t, tune.fit, tune.binds);
  auto* ts = t->add_option("--seed", tune.seed, "Seed for tuple subsampling and fold assignment");
  t->add_option("--config", tune.config, "JSON config file (flags take precedence)");
  t->add_option("--out", tune.out, "Output CSV path")->required();
  bind_key(tune.binds, ti, "in", tune.in);
  bind_key(tune.binds, ts, "seed", tune.seed);

  EvaluateCmd ev;
  auto* e = app.add_subcommand("evaluate", "Score a fitted rule on a dataset");
  auto* ei = e->add_option("--in", ev.in, "Evaluation CSV")->required();
  auto* em = e->add_option("--model", ev.model, "Fitted rule JSON from `fit`")->required();
  auto* eg = e->add_option("--gps-source", ev.gps_source,
                           "Propensities for the value estimate: true | estimated")
                 ->check(CLI::IsMember({"true", "estimated"}));
  add_scenario_opts(e, ev.scen, ev.binds);
  e->add_option("--config", ev.config, "JSON config file (flags take precedence)");
  e->add_option("--out", ev.out, "Optional report path");
  bind_key(ev.binds, ei, "in", ev.in);
  bind_key(ev.binds, em, "model", ev.model);
  bind_key(ev.binds, eg, "gps_source", ev.gps_source);

  ExperimentCmd ex;
  auto* x = app.add_subcommand("experiment", "Run the replication study and write a results table");
  add_scenario_opts(x, ex.scen, ex.binds);
  auto* xm = x->add_option("--method", ex.methods, "Method to include (repeatable; default all)")
                 ->check(CLI::IsMember({"match-g1", "match-gw1", "match-gw2", "multi-ol"}));
  auto* xn = x->add_option("--n", ex.n, "Training sample size")->check(CLI::PositiveNumber);
  auto* xt = x->add_option("--test-n", ex.test_n, "Test sample size")->check(CLI::PositiveNumber);
  auto* xr = x->add_option("--reps", ex.reps, "Replications")->check(CLI::PositiveNumber);
  auto* xs = x->add_option("--seed", ex.seed, "Experiment seed");
  add_fit_opts(x, ex.fit, ex.binds, /*with_method=*/false);
  add_forest_opts(x, ex.forest, ex.binds);
  x->add_option("--config", ex.config, "JSON config file (flags take precedence)");
  x->add_option("--out", ex.out, "Output results CSV path")->required();
  bind_key(ex.binds, xm, "methods", ex.methods);
  bind_key(ex.binds, xn, "n", ex.n);
  bind_key(ex.binds, xt, "test_n", ex.test_n);
  bind_key(ex.binds, xr, "reps", ex.reps);
  bind_key(ex.binds, xs, "seed", ex.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  try {
    if (s->parsed()) return run_simulate(sim);
    if (i->parsed()) return run_impute(imp);
    if (mcmd->parsed()) return run_match(mat);
    if (f->parsed()) return run_fit(fit);
    if (t->parsed()) return run_tune(tune);
    if (e->parsed()) return run_evaluate(ev);
    if (x->parsed()) return run_experiment_cmd(ex);
  } catch (const UsageError& u) {
    std::cerr << "error: " << u.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
