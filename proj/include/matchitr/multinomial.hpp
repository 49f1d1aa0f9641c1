#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "matchitr/dataset.hpp"

namespace matchitr {

// Clip probabilities into [lo, hi] and renormalize to sum 1 while keeping the
// clipped components exactly at their bound. Fixed point in at most k passes:
// components pinned at a bound are frozen, the rest are rescaled to absorb the
// slack, and any component newly pushed past a bound joins the frozen set.
inline Eigen::VectorXd clip_renormalize(Eigen::VectorXd p, double lo, double hi) {
  const int k = int(p.size());
  if (lo < 0.0 || hi > 1.0 || lo * k >= 1.0 || hi * k <= 1.0)
    throw std::invalid_argument("infeasible probability clip bounds");
  double s = p.sum();
  if (s <= 0.0) throw std::invalid_argument("cannot normalize nonpositive probability vector");
  p /= s;
  std::vector<int> state(k, 0);  // 0 free, -1 pinned at lo, +1 pinned at hi
  for (int pass = 0; pass < k + 1; ++pass) {
    double pinned_mass = 0.0, free_mass = 0.0;
    int free_count = 0;
    for (int j = 0; j < k; ++j) {
      if (state[j] == -1) pinned_mass += lo;
      else if (state[j] == +1) pinned_mass += hi;
      else { free_mass += p[j]; ++free_count; }
    }
    if (free_count == 0) break;
    const double target = 1.0 - pinned_mass;
    const double scale = target / free_mass;
    bool changed = false;
    for (int j = 0; j < k; ++j) {
      if (state[j] != 0) continue;
      const double v = p[j] * scale;
      if (v < lo) { state[j] = -1; changed = true; }
      else if (v > hi) { state[j] = +1; changed = true; }
    }
    if (!changed) {
      for (int j = 0; j < k; ++j)
        if (state[j] == 0) p[j] *= scale;
      break;
    }
  }
  for (int j = 0; j < k; ++j) {
    if (state[j] == -1) p[j] = lo;
    else if (state[j] == +1) p[j] = hi;
  }
  return p;
}

// Multinomial logistic model for the generalized propensity score, reference
// arm 1. Coefficient rows are arms 2..k over [intercept, x_1..x_p].
struct GpsModel {
  int k = 0;
  Eigen::MatrixXd coef;  // (k-1) x (p+1)
  double clip_lo = 0.01;
  double clip_hi = 1.0;
  int iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> ll_trace;  // penalized log-likelihood per Newton iteration

  Eigen::VectorXd linear_predictors(const Eigen::VectorXd& x) const {
    Eigen::VectorXd xt(x.size() + 1);
    xt[0] = 1.0;
    xt.tail(x.size()) = x;
    Eigen::VectorXd eta(k);
    eta[0] = 0.0;
    eta.tail(k - 1) = coef * xt;
    return eta;
  }

  // Softmax probabilities without clipping.
  Eigen::VectorXd predict_raw(const Eigen::VectorXd& x) const {
    Eigen::VectorXd eta = linear_predictors(x);
    const double m = eta.maxCoeff();
    Eigen::VectorXd p = (eta.array() - m).exp();
    return p / p.sum();
  }

  // Clipped-and-renormalized probabilities; every component in [clip_lo, clip_hi].
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const {
    return clip_renormalize(predict_raw(x), clip_lo, clip_hi);
  }
};

namespace detail {
inline GpsModel& finish_gps(GpsModel& m, const Eigen::VectorXd& theta, int q, int k) {
  m.coef = Eigen::Map<const Eigen::MatrixXd>(theta.data(), q, k - 1).transpose();
  return m;
}
}  // namespace detail

// Newton fit with step halving on the ridge-penalized log-likelihood
// (penalty on slopes only, never the intercepts). Converges when the
// penalized-gradient norm drops below tol.
inline GpsModel fit_multinomial(const Dataset& d, double ridge = 1e-6, double clip_lo = 0.01,
                                double clip_hi = 1.0, double tol = 1e-8, int max_iter = 100) {
  const int n = d.n(), p = d.p(), k = d.k;
  if (k < 2) throw std::invalid_argument("multinomial fit needs k >= 2");
  const int q = p + 1;             // intercept + slopes
  const int dim = (k - 1) * q;     // parameters for arms 2..k

  Eigen::MatrixXd X(n, q);
  X.col(0).setOnes();
  X.rightCols(p) = d.covariates;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  auto coef_view = [&](const Eigen::VectorXd& th) {
    return Eigen::Map<const Eigen::MatrixXd>(th.data(), q, k - 1).transpose();
  };

  // Penalized log-likelihood and per-subject probabilities.
  Eigen::MatrixXd P(n, k);
  auto eval_ll = [&](const Eigen::VectorXd& th) {
    Eigen::MatrixXd eta(n, k);
    eta.col(0).setZero();
    eta.rightCols(k - 1) = X * Eigen::Map<const Eigen::MatrixXd>(th.data(), q, k - 1);
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      const double m = eta.row(i).maxCoeff();
      const Eigen::ArrayXd e = (eta.row(i).array() - m).exp();
      const double z = e.sum();
      P.row(i) = (e / z).matrix();
      ll += eta(i, d.treatments[i] - 1) - m - std::log(z);
    }
    double pen = 0.0;
    for (int w = 0; w < k - 1; ++w)
      for (int j = 1; j < q; ++j) pen += th[w * q + j] * th[w * q + j];
    return ll - 0.5 * ridge * pen;
  };

  GpsModel model;
  model.k = k;
  model.clip_lo = clip_lo;
  model.clip_hi = clip_hi;

  double ll = eval_ll(theta);
  model.ll_trace.push_back(ll);
  for (int iter = 0; iter < max_iter; ++iter) {
    // Gradient of the penalized log-likelihood.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    for (int w = 0; w < k - 1; ++w) {
      Eigen::VectorXd r(n);
      for (int i = 0; i < n; ++i) r[i] = (d.treatments[i] == w + 2 ? 1.0 : 0.0) - P(i, w + 1);
      grad.segment(w * q, q) = X.transpose() * r;
      for (int j = 1; j < q; ++j) grad[w * q + j] -= ridge * theta[w * q + j];
    }
    model.grad_norm = grad.norm();
    model.iterations = iter;
    if (model.grad_norm < tol) return detail::finish_gps(model, theta, q, k);

    // Hessian of the negative penalized log-likelihood (block structure over arms).
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (int w = 0; w < k - 1; ++w) {
      for (int v = w; v < k - 1; ++v) {
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i)
          s[i] = P(i, w + 1) * ((w == v ? 1.0 : 0.0) - P(i, v + 1));
        const Eigen::MatrixXd block = X.transpose() * s.asDiagonal() * X;
        H.block(w * q, v * q, q, q) = block;
        if (v != w) H.block(v * q, w * q, q, q) = block.transpose();
      }
    }
    for (int w = 0; w < k - 1; ++w)
      for (int j = 1; j < q; ++j) H(w * q + j, w * q + j) += ridge;

    Eigen::VectorXd step = H.ldlt().solve(grad);
    if (!step.allFinite()) throw std::runtime_error("multinomial Newton step failed");

    // Step halving: accept the first step that does not decrease the
    // penalized log-likelihood. Near the optimum a full Newton step improves
    // the likelihood by less than its evaluation noise, so a small relative
    // slack keeps the line search from rejecting productive steps there.
    const double slack = 1e-10 * (1.0 + std::abs(ll));
    double t = 1.0;
    double ll_new = 0.0;
    Eigen::VectorXd theta_new;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      theta_new = theta + t * step;
      ll_new = eval_ll(theta_new);
      if (std::isfinite(ll_new) && ll_new >= ll - slack) { accepted = true; break; }
      t *= 0.5;
    }
    if (!accepted) {
      // No ascent possible: gradient is numerically zero relative to curvature.
      eval_ll(theta);  // restore P for the final model state
      return detail::finish_gps(model, theta, q, k);
    }
    theta = theta_new;
    ll = ll_new;
    model.ll_trace.push_back(ll);
  }
  throw std::runtime_error("multinomial fit did not converge: gradient norm " +
                           std::to_string(model.grad_norm) + " after " + std::to_string(max_iter) +
                           " iterations");
}

// Convenience: clipped GPS matrix (n x k) for a whole dataset.
inline Eigen::MatrixXd predict_gps(const GpsModel& m, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd P(X.rows(), m.k);
  for (int i = 0; i < X.rows(); ++i) P.row(i) = m.predict(X.row(i).transpose()).transpose();
  return P;
}

}  // namespace matchitr
