#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchitr/labeling.hpp"

namespace matchitr {

// Simplex coding of k classes into R^{k-1}: k unit vectors with pairwise
// inner products -1/(k-1) that sum to zero.
struct SimplexCode {
  int k = 0;
  Eigen::MatrixXd vertices;  // k x (k-1); row l-1 is V_l

  static SimplexCode make(int k) {
    if (k < 2) throw std::invalid_argument("simplex coding needs k >= 2");
    SimplexCode sc;
    sc.k = k;
    sc.vertices.resize(k, k - 1);
    sc.vertices.row(0).setConstant(1.0 / std::sqrt(double(k - 1)));
    const double off = -(1.0 + std::sqrt(double(k))) / std::pow(double(k - 1), 1.5);
    const double diag = std::sqrt(double(k) / double(k - 1));
    for (int l = 2; l <= k; ++l) {
      sc.vertices.row(l - 1).setConstant(off);
      sc.vertices(l - 1, l - 2) += diag;
    }
    return sc;
  }
};

// Reinforced multicategory hinge loss of a decision vector f in R^{k-1}
// against label y: (1-gamma) * sum_{l != y} [1 + <f,V_l>]_+
//                +    gamma  * [(k-1) - <f,V_y>]_+
inline double reinforced_loss(const Eigen::VectorXd& f, int y, const SimplexCode& code,
                              double gamma) {
  const int k = code.k;
  if (y < 1 || y > k) throw std::invalid_argument("label out of range");
  double loss = 0.0;
  for (int l = 1; l <= k; ++l) {
    const double ip = code.vertices.row(l - 1).dot(f);
    if (l == y)
      loss += gamma * std::max(0.0, double(k - 1) - ip);
    else
      loss += (1.0 - gamma) * std::max(0.0, 1.0 + ip);
  }
  return loss;
}

struct KernelSpec {
  enum class Type { Linear, Gaussian };
  Type type = Type::Gaussian;
  double bandwidth = 0.0;  // Gaussian only; <= 0 requests the median heuristic
};

inline KernelSpec parse_kernel(const std::string& s, double bandwidth = 0.0) {
  KernelSpec ks;
  ks.bandwidth = bandwidth;
  if (s == "linear") ks.type = KernelSpec::Type::Linear;
  else if (s == "gaussian") ks.type = KernelSpec::Type::Gaussian;
  else throw std::invalid_argument("unknown kernel '" + s + "'");
  return ks;
}

// Median of pairwise Euclidean distances (middle element of the sorted list);
// 1.0 when degenerate (no pairs or zero median).
inline double median_pairwise_distance(const Eigen::MatrixXd& X) {
  const int n = int(X.rows());
  std::vector<double> dist;
  dist.reserve(std::size_t(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) dist.push_back((X.row(i) - X.row(j)).norm());
  if (dist.empty()) return 1.0;
  std::sort(dist.begin(), dist.end());
  const double med = dist[dist.size() / 2];
  return med > 0.0 ? med : 1.0;
}

inline Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& X, double h) {
  if (h <= 0.0) throw std::invalid_argument("gaussian bandwidth must be positive");
  const int n = int(X.rows());
  Eigen::MatrixXd K(n, n);
  const double inv = 1.0 / (2.0 * h * h);
  for (int i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = std::exp(-(X.row(i) - X.row(j)).squaredNorm() * inv);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

// Fitted RAMSVM rule. Prediction is argmax_l <f(x), V_l> with ties to the
// lowest label. The intercept is penalized: linear kernels act on [x;1],
// kernel machines on K+1.
struct RamsvmModel {
  SimplexCode code;
  KernelSpec kernel;
  double lambda = 1.0;
  double gamma = 0.5;
  Eigen::MatrixXd beta;           // (p+1) x (k-1); linear kernel only
  Eigen::MatrixXd pred_features;  // U x p distinct training feature rows (kernel case)
  Eigen::MatrixXd pred_coef;      // U x (k-1) aggregated dual coefficients
  Eigen::MatrixXd alpha;          // N x k dual variables (warm-start state)
  bool converged = false;
  int sweeps = 0;
  double dual_objective = 0.0;
  std::vector<double> objective_trace;  // dual objective after each sweep

  Eigen::VectorXd decision_function(const Eigen::VectorXd& x) const {
    if (kernel.type == KernelSpec::Type::Linear) {
      Eigen::VectorXd xt(x.size() + 1);
      xt.head(x.size()) = x;
      xt[x.size()] = 1.0;
      return beta.transpose() * xt;
    }
    const double inv = 1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(code.k - 1);
    for (int u = 0; u < pred_features.rows(); ++u) {
      const double kv =
          std::exp(-(pred_features.row(u).transpose() - x).squaredNorm() * inv) + 1.0;
      f += kv * pred_coef.row(u).transpose();
    }
    return f / lambda;
  }

  int predict(const Eigen::VectorXd& x) const {
    return predict_from_decision(decision_function(x));
  }

  int predict_from_decision(const Eigen::VectorXd& f) const {
    const Eigen::VectorXd scores = code.vertices * f;
    int best = 1;
    for (int l = 2; l <= code.k; ++l)
      if (scores[l - 1] > scores[best - 1]) best = l;
    return best;
  }
};

struct RamsvmOptions {
  double gamma = 0.5;
  double tol = 1e-6;      // converged when the largest single-variable change < tol
  int max_sweeps = 500;
};

// Weighted RAMSVM via coordinate descent on the box-constrained dual
//   min_alpha (1/(2 lambda)) sum_q ||v_q||^2
//             - sum_t [ (k-1) alpha_{t,y_t} + sum_{l != y_t} alpha_{t,l} ],
//   0 <= alpha_{t,l} <= W_t (gamma if l = y_t else 1-gamma),
// with v_q = sum_{t,l} sigma_{t,l} alpha_{t,l} V_{l,q} phi(x_t) and sigma
// +1 on the label coordinate, -1 elsewhere. Each coordinate has the closed-
// form update  alpha <- clip(alpha + (lambda kappa - G)/K_tt, [0, box])  with
// G the fitted-margin term; K_tt is the effective kernel diagonal. Variables
// are visited in a fixed order, so the path is deterministic; the dual
// objective is recorded after every sweep and decreases monotonically.
//
// base_gram, if given, must be the Gaussian Gram matrix (without the +1) for
// the instance features at kernel.bandwidth > 0; this lets callers reuse one
// Gram across a lambda path. warm_alpha seeds the dual variables (clipped to
// the boxes), which is how warm starts across the lambda grid work.
inline RamsvmModel ramsvm_fit(const std::vector<ClassificationInstance>& data, int k,
                              KernelSpec kernel, double lambda, const RamsvmOptions& opt = {},
                              const Eigen::MatrixXd* base_gram = nullptr,
                              const Eigen::MatrixXd* warm_alpha = nullptr) {
  const int N = int(data.size());
  if (N == 0) throw std::invalid_argument("no classification instances to fit");
  if (lambda <= 0.0) throw std::invalid_argument("lambda must be positive");
  if (opt.gamma < 0.0 || opt.gamma > 1.0) throw std::invalid_argument("gamma must be in [0,1]");
  if (opt.tol <= 0.0) throw std::invalid_argument("tol must be positive");
  const int p = int(data[0].features.size());
  {
    int first = data[0].label;
    bool multi = false;
    for (const auto& inst : data) {
      if (inst.label < 1 || inst.label > k) throw std::invalid_argument("instance label out of range");
      if (inst.weight < 0.0) throw std::invalid_argument("instance weight must be >= 0");
      if (int(inst.features.size()) != p) throw std::invalid_argument("inconsistent feature lengths");
      if (inst.label != first) multi = true;
    }
    if (!multi)
      throw std::invalid_argument("single-label data: all instances share label " +
                                  std::to_string(first) + ", no rule can be fit");
  }

  RamsvmModel model;
  model.code = SimplexCode::make(k);
  model.kernel = kernel;
  model.lambda = lambda;
  model.gamma = opt.gamma;
  const Eigen::MatrixXd& V = model.code.vertices;

  Eigen::MatrixXd X(N, p);
  for (int t = 0; t < N; ++t) X.row(t) = data[t].features.transpose();

  const bool linear = kernel.type == KernelSpec::Type::Linear;
  Eigen::MatrixXd gram;  // Gaussian base Gram (no +1), owned if not supplied
  if (!linear) {
    if (base_gram != nullptr) {
      if (kernel.bandwidth <= 0.0)
        throw std::invalid_argument("a supplied Gram requires an explicit bandwidth");
      if (base_gram->rows() != N || base_gram->cols() != N)
        throw std::invalid_argument("supplied Gram has the wrong shape");
    } else {
      if (model.kernel.bandwidth <= 0.0) model.kernel.bandwidth = median_pairwise_distance(X);
      gram = gaussian_gram(X, model.kernel.bandwidth);
    }
  }
  const Eigen::MatrixXd& K = (base_gram != nullptr) ? *base_gram : gram;

  Eigen::MatrixXd Xa;  // [X 1], linear kernel only
  Eigen::VectorXd diag(N);
  if (linear) {
    Xa.resize(N, p + 1);
    Xa.leftCols(p) = X;
    Xa.col(p).setOnes();
    for (int t = 0; t < N; ++t) diag[t] = Xa.row(t).squaredNorm();
  } else {
    diag.setConstant(N, 2.0);  // K(x,x) = 1, plus the intercept's +1
  }

  // Box bounds and the linear-term coefficients kappa.
  Eigen::MatrixXd box(N, k);
  for (int t = 0; t < N; ++t)
    for (int l = 1; l <= k; ++l)
      box(t, l - 1) = data[t].weight * (l == data[t].label ? opt.gamma : 1.0 - opt.gamma);

  Eigen::MatrixXd& alpha = model.alpha;
  alpha = Eigen::MatrixXd::Zero(N, k);
  if (warm_alpha != nullptr) {
    if (warm_alpha->rows() != N || warm_alpha->cols() != k)
      throw std::invalid_argument("warm start has the wrong shape");
    alpha = warm_alpha->cwiseMin(box).cwiseMax(0.0);
  }

  // C(t,:) = sum_l sigma_{t,l} alpha_{t,l} V_l.
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, k - 1);
  for (int t = 0; t < N; ++t) {
    const int y = data[t].label;
    for (int l = 1; l <= k; ++l) {
      const double c = (l == y ? 1.0 : -1.0) * alpha(t, l - 1);
      if (c != 0.0) C.row(t) += c * V.row(l - 1);
    }
  }

  // Fitted margins. Linear kernels keep v_q = Xa^T C explicitly; Gaussian
  // kernels maintain F = K C and the column sums s = 1^T C separately, so the
  // effective-kernel margin <v_q, phi(x_t)> is F(t,q) + s_q (the +1 part of
  // K+1 contributes s) and a coordinate change is a rank-1 update on F.
  Eigen::MatrixXd Vmat, F;
  Eigen::RowVectorXd srow;
  if (linear) {
    Vmat = Xa.transpose() * C;
  } else {
    F = K * C;
    srow = C.colwise().sum();
  }

  auto objective = [&]() {
    double L = 0.0;
    for (int t = 0; t < N; ++t) {
      const int y = data[t].label;
      for (int l = 1; l <= k; ++l)
        L += (l == y ? double(k - 1) : 1.0) * alpha(t, l - 1);
    }
    const double Q = linear ? Vmat.squaredNorm()
                            : (C.array() * F.array()).sum() + srow.squaredNorm();
    return Q / (2.0 * lambda) - L;
  };

  model.objective_trace.clear();
  bool converged = false;
  int sweep = 0;
  Eigen::RowVectorXd margin(k - 1), dV(k - 1);
  for (; sweep < opt.max_sweeps && !converged; ++sweep) {
    double max_change = 0.0;
    for (int t = 0; t < N; ++t) {
      const int y = data[t].label;
      if (linear) margin.noalias() = Xa.row(t) * Vmat;
      else margin = F.row(t) + srow;
      for (int l = 1; l <= k; ++l) {
        const double A = box(t, l - 1);
        if (A == 0.0) continue;
        const double a_old = alpha(t, l - 1);
        const double sigma = (l == y) ? 1.0 : -1.0;
        const double kappa = (l == y) ? double(k - 1) : 1.0;
        const double G = sigma * V.row(l - 1).dot(margin);
        double a_new = a_old + (lambda * kappa - G) / diag[t];
        a_new = std::min(A, std::max(0.0, a_new));
        const double delta = a_new - a_old;
        if (delta == 0.0) continue;
        alpha(t, l - 1) = a_new;
        dV = (sigma * delta) * V.row(l - 1);
        C.row(t) += dV;
        if (linear) {
          Vmat.noalias() += Xa.row(t).transpose() * dV;
        } else {
          F.noalias() += K.col(t) * dV;
          srow += dV;
        }
        margin += diag[t] * dV;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    model.objective_trace.push_back(objective());
    if (max_change < opt.tol) converged = true;
  }
  model.converged = converged;
  model.sweeps = sweep;
  model.dual_objective = model.objective_trace.empty() ? objective() : model.objective_trace.back();

  if (linear) {
    model.beta = Vmat / lambda;
  } else {
    // Collapse duplicate feature rows (one subject contributes many tuples)
    // so prediction cost scales with distinct subjects, not instances.
    std::vector<int> order(N);
    for (int t = 0; t < N; ++t) order[t] = t;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return data[a].subject < data[b].subject; });
    std::vector<int> group_start;
    for (int idx = 0; idx < N; ++idx)
      if (idx == 0 || data[order[idx]].subject != data[order[idx - 1]].subject)
        group_start.push_back(idx);
    const int U = int(group_start.size());
    model.pred_features.resize(U, p);
    model.pred_coef = Eigen::MatrixXd::Zero(U, k - 1);
    for (int u = 0; u < U; ++u) {
      const int begin = group_start[u];
      const int end = (u + 1 < U) ? group_start[u + 1] : N;
      model.pred_features.row(u) = X.row(order[begin]);
      for (int idx = begin; idx < end; ++idx) model.pred_coef.row(u) += C.row(order[idx]);
    }
  }
  return model;
}

}  // namespace matchitr
