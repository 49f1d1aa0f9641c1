#include <catch2/catch_amalgamated.hpp>

#include "matchitr/ramsvm.hpp"
#include "matchitr/random.hpp"
#include "oracles.hpp"

using namespace matchitr;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("simplex code invariants for k = 2..10") {
  for (int k = 2; k <= 10; ++k) {
    const SimplexCode code = SimplexCode::make(k);
    REQUIRE(code.vertices.rows() == k);
    REQUIRE(code.vertices.cols() == k - 1);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(k - 1);
    for (int a = 0; a < k; ++a) {
      REQUIRE_THAT(code.vertices.row(a).norm(), WithinAbs(1.0, 1e-10));
      sum += code.vertices.row(a).transpose();
      for (int b = 0; b < a; ++b)
        REQUIRE_THAT(code.vertices.row(a).dot(code.vertices.row(b)),
                     WithinAbs(-1.0 / (k - 1), 1e-10));
    }
    REQUIRE(sum.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("reinforced loss hand values") {
  const SimplexCode code = SimplexCode::make(2);
  // k=2: V1 = (1), V2 = (-1). f = (0.5), y = 1, gamma = 0.5:
  //   own hinge: max(0, 1 - 0.5) = 0.5 weighted 0.5
  //   other hinge: max(0, 1 + (-0.5)) = 0.5 weighted 0.5  -> total 0.5
  Eigen::VectorXd f(1);
  f << 0.5;
  REQUIRE_THAT(reinforced_loss(f, 1, code, 0.5), WithinAbs(0.5, 1e-14));
  // y = 2: own hinge max(0, 1 - (-1)(0.5)) = 1.5, other max(0, 1 + 0.5) = 1.5 -> 1.5
  REQUIRE_THAT(reinforced_loss(f, 2, code, 0.5), WithinAbs(1.5, 1e-14));
  // gamma = 1 keeps only the own-vertex hinge
  REQUIRE_THAT(reinforced_loss(f, 1, code, 1.0), WithinAbs(0.5, 1e-14));
  REQUIRE_THAT(reinforced_loss(f, 2, code, 1.0), WithinAbs(1.5, 1e-14));
  // a confident correct score has zero loss at gamma = 0
  Eigen::VectorXd big(1);
  big << 2.0;
  REQUIRE(reinforced_loss(big, 1, code, 0.0) == 0.0);
}

namespace {

std::vector<ClassificationInstance> random_problem(Rng& rng, int n, int k, int p) {
  std::vector<ClassificationInstance> data{std::size_t(n)};
  for (int t = 0; t < n; ++t) {
    auto& inst = data[std::size_t(t)];
    inst.subject = t;
    inst.features.resize(p);
    for (int j = 0; j < p; ++j) inst.features[j] = rng.uniform(-1.0, 1.0);
    inst.label = t < k ? t + 1 : 1 + int(rng.below(std::uint64_t(k)));
    inst.weight = rng.uniform(0.2, 2.0);
  }
  return data;
}

Eigen::MatrixXd effective_gram(const std::vector<ClassificationInstance>& data,
                               const KernelSpec& kernel) {
  const int n = int(data.size());
  Eigen::MatrixXd F(n, data[0].features.size());
  for (int t = 0; t < n; ++t) F.row(t) = data[std::size_t(t)].features.transpose();
  if (kernel.type == KernelSpec::Type::Linear) {
    Eigen::MatrixXd Xt(n, F.cols() + 1);
    Xt << F, Eigen::VectorXd::Ones(n);
    return Xt * Xt.transpose();
  }
  return gaussian_gram(F, kernel.bandwidth) + Eigen::MatrixXd::Ones(n, n);
}

}  // namespace

TEST_CASE("coordinate descent agrees with an independent projected-gradient solver") {
  Rng rng(314159);
  const double gammas[] = {0.3, 0.5, 0.7};
  const double lambdas[] = {0.1, 1.0, 5.0};
  for (int rep = 0; rep < 16; ++rep) {
    const int k = 2 + int(rng.below(3));
    const int n = k + 3 + int(rng.below(std::uint64_t(28 - k - 3)));
    const int p = 1 + int(rng.below(4));
    const auto data = random_problem(rng, n, k, p);
    KernelSpec kernel;
    if (rep % 2 == 0) {
      kernel.type = KernelSpec::Type::Linear;
    } else {
      kernel.type = KernelSpec::Type::Gaussian;
      kernel.bandwidth = 1.0;
    }
    RamsvmOptions opt;
    opt.gamma = gammas[rep % 3];
    opt.tol = 1e-9;
    opt.max_sweeps = 20000;
    const double lambda = lambdas[rep % 3];

    CAPTURE(rep, k, n, p, lambda, opt.gamma);
    const RamsvmModel m = ramsvm_fit(data, k, kernel, lambda, opt);
    REQUIRE(m.converged);

    std::vector<int> y(data.size());
    std::vector<double> W(data.size());
    for (std::size_t t = 0; t < data.size(); ++t) {
      y[t] = data[t].label;
      W[t] = data[t].weight;
    }
    const auto pg = oracle::pg_dual_solve(effective_gram(data, kernel), y, W, k, lambda, opt.gamma);
    const double scale = std::max({1.0, std::fabs(pg.objective), std::fabs(m.dual_objective)});
    REQUIRE(std::fabs(m.dual_objective - pg.objective) / scale < 1e-4);

    // box constraints hold exactly
    for (std::size_t t = 0; t < data.size(); ++t)
      for (int l = 1; l <= k; ++l) {
        const double box = W[t] * (l == y[t] ? opt.gamma : 1.0 - opt.gamma);
        REQUIRE(m.alpha(int(t), l - 1) >= 0.0);
        REQUIRE(m.alpha(int(t), l - 1) <= box);
      }

    // recorded dual objective decreases monotonically over sweeps
    for (std::size_t s = 1; s < m.objective_trace.size(); ++s)
      REQUIRE(m.objective_trace[s] <=
              m.objective_trace[s - 1] + 1e-8 * (1.0 + std::fabs(m.objective_trace[s - 1])));
  }
}

TEST_CASE("two-arm decisions follow the sign of the decision value") {
  Rng rng(11);
  std::vector<ClassificationInstance> data;
  for (int t = 0; t < 40; ++t) {
    ClassificationInstance inst;
    inst.subject = t;
    inst.features.resize(1);
    inst.features[0] = rng.uniform(-1.0, 1.0);
    inst.label = inst.features[0] > 0.0 ? 1 : 2;
    inst.weight = 1.0;
    data.push_back(inst);
  }
  const RamsvmModel m =
      ramsvm_fit(data, 2, KernelSpec{KernelSpec::Type::Linear, 0.0}, 0.01);
  int correct = 0;
  for (const auto& inst : data) {
    const Eigen::VectorXd f = m.decision_function(inst.features);
    // k=2 vertices are +1 and -1: the argmax rule is the sign rule
    const int pred = f[0] >= 0.0 ? 1 : 2;
    REQUIRE(m.predict(inst.features) == pred);
    if (pred == inst.label) ++correct;
  }
  REQUIRE(correct >= 38);  // separable data, near-perfect training fit
}

TEST_CASE("gaussian kernel separates data a linear rule cannot") {
  Rng rng(23);
  std::vector<ClassificationInstance> data;
  for (int t = 0; t < 80; ++t) {
    ClassificationInstance inst;
    inst.subject = t;
    inst.features.resize(2);
    inst.features[0] = rng.uniform(-1.0, 1.0);
    inst.features[1] = rng.uniform(-1.0, 1.0);
    // XOR-style checkerboard
    inst.label = (inst.features[0] > 0.0) == (inst.features[1] > 0.0) ? 1 : 2;
    inst.weight = 1.0;
    data.push_back(inst);
  }
  KernelSpec gauss;
  gauss.type = KernelSpec::Type::Gaussian;
  gauss.bandwidth = 0.35;  // narrow enough to resolve the quadrants
  const RamsvmModel m = ramsvm_fit(data, 2, gauss, 1e-3);
  int correct = 0;
  for (const auto& inst : data)
    if (m.predict(inst.features) == inst.label) ++correct;
  REQUIRE(correct >= 76);

  const RamsvmModel lin =
      ramsvm_fit(data, 2, KernelSpec{KernelSpec::Type::Linear, 0.0}, 1e-3);
  int lin_correct = 0;
  for (const auto& inst : data)
    if (lin.predict(inst.features) == inst.label) ++lin_correct;
  REQUIRE(lin_correct < correct);  // checkerboard defeats the linear rule
}

TEST_CASE("median heuristic bandwidth") {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 1.0, 3.0;
  // pairwise distances {1, 2, 3}; the sorted middle element is 2
  REQUIRE(median_pairwise_distance(X) == 2.0);
  Eigen::MatrixXd one(1, 1);
  one << 5.0;
  REQUIRE(median_pairwise_distance(one) == 1.0);  // degenerate fallback
}

TEST_CASE("training-point decisions match the maintained margin state") {
  Rng rng(37);
  auto data = random_problem(rng, 25, 3, 2);
  KernelSpec gauss;
  gauss.type = KernelSpec::Type::Gaussian;
  gauss.bandwidth = 0.7;
  const RamsvmModel m = ramsvm_fit(data, 3, gauss, 0.5);
  // decision_function at a training point must reproduce the kernel expansion
  const Eigen::MatrixXd G = effective_gram(data, gauss);
  // recompute C from alpha
  const SimplexCode code = SimplexCode::make(3);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(int(data.size()), 2);
  for (std::size_t t = 0; t < data.size(); ++t)
    for (int l = 1; l <= 3; ++l) {
      const double sigma = l == data[t].label ? 1.0 : -1.0;
      C.row(int(t)) += sigma * m.alpha(int(t), l - 1) * code.vertices.row(l - 1);
    }
  for (std::size_t t = 0; t < data.size(); t += 5) {
    const Eigen::VectorXd expect = (G.row(int(t)) * C).transpose() / m.lambda;
    const Eigen::VectorXd got = m.decision_function(data[t].features);
    REQUIRE((expect - got).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("warm starts reach the cold-start objective") {
  Rng rng(53);
  auto data = random_problem(rng, 30, 4, 3);
  const KernelSpec lin{KernelSpec::Type::Linear, 0.0};
  RamsvmOptions opt;
  opt.tol = 1e-9;
  opt.max_sweeps = 5000;
  const RamsvmModel first = ramsvm_fit(data, 4, lin, 1.0, opt);
  const RamsvmModel cold = ramsvm_fit(data, 4, lin, 0.5, opt);
  const RamsvmModel warm = ramsvm_fit(data, 4, lin, 0.5, opt, nullptr, &first.alpha);
  REQUIRE_THAT(warm.dual_objective,
               WithinAbs(cold.dual_objective, 1e-5 * (1.0 + std::fabs(cold.dual_objective))));
  REQUIRE(warm.converged);
}

TEST_CASE("joint weight and lambda scaling leaves the rule unchanged") {
  Rng rng(71);
  auto data = random_problem(rng, 30, 3, 2);
  const KernelSpec lin{KernelSpec::Type::Linear, 0.0};
  RamsvmOptions opt;
  opt.tol = 1e-10;
  opt.max_sweeps = 10000;
  const RamsvmModel base = ramsvm_fit(data, 3, lin, 0.8, opt);
  auto scaled = data;
  const double c = 3.5;
  for (auto& inst : scaled) inst.weight *= c;
  RamsvmOptions opt2 = opt;
  opt2.tol = opt.tol * c;  // tolerance is absolute in alpha, which scales with c
  const RamsvmModel big = ramsvm_fit(scaled, 3, lin, 0.8 * c, opt2);
  for (const auto& inst : data) {
    const Eigen::VectorXd f1 = base.decision_function(inst.features);
    const Eigen::VectorXd f2 = big.decision_function(inst.features);
    REQUIRE((f1 - f2).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("single-label input is rejected with a diagnostic") {
  std::vector<ClassificationInstance> data(5);
  for (int t = 0; t < 5; ++t) {
    data[std::size_t(t)].features = Eigen::VectorXd::Constant(2, double(t));
    data[std::size_t(t)].label = 3;
    data[std::size_t(t)].weight = 1.0;
  }
  REQUIRE_THROWS_WITH(ramsvm_fit(data, 4, KernelSpec{KernelSpec::Type::Linear, 0.0}, 1.0),
                      ContainsSubstring("single-label data"));
}
