#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "matchitr/dataset.hpp"
#include "matchitr/multinomial.hpp"

namespace matchitr {

enum class MatchMetric { Mahalanobis, Gps };

inline double mahalanobis_distance(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                   const Eigen::MatrixXd& inv_cov) {
  const Eigen::VectorXd diff = x1 - x2;
  const double q = diff.dot(inv_cov * diff);
  return std::sqrt(std::max(q, 0.0));
}

// Inverse of the pooled sample covariance (denominator n-1). If the matrix is
// singular or badly conditioned (condition number > 1e10), a ridge of
// 1e-8 * trace/p is added first.
inline Eigen::MatrixXd pooled_inverse_covariance(const Eigen::MatrixXd& X) {
  const int n = int(X.rows()), p = int(X.cols());
  if (n < 2) throw std::invalid_argument("covariance needs at least 2 rows");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd C = X.rowwise() - mean;
  Eigen::MatrixXd S = (C.transpose() * C) / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  if (!(emin > 0.0) || emax / emin > 1e10) {
    const double ridge = 1e-8 * S.trace() / double(p);
    S += ridge * Eigen::MatrixXd::Identity(p, p);
  }
  return S.inverse();
}

// Matched sets M_i^(w): for each subject i and arm w, the indices matched to i
// in arm w. The own-arm set is {i}. Lists are sorted by (distance, index).
struct MatchedSets {
  int n = 0, k = 0, m = 0;
  MatchMetric metric = MatchMetric::Mahalanobis;
  std::vector<std::vector<std::vector<int>>> neighbors;     // [i][w-1] -> indices
  std::vector<std::vector<std::vector<double>>> distances;  // parallel to neighbors

  const std::vector<int>& set_for(int i, int w) const { return neighbors[i][w - 1]; }
};

// m-nearest-neighbor matching with replacement across all k arms. Metric is
// either Mahalanobis distance on the stored covariates or Euclidean distance
// between clipped GPS vectors (gps must be given in that case). Exact distance
// ties go to the lower subject index. A finite caliper drops candidates with
// distance strictly above it, which can leave matched sets smaller than m (or
// empty).
inline MatchedSets build_matched_sets(const Dataset& d, MatchMetric metric, int m,
                                      const GpsModel* gps = nullptr,
                                      double caliper = std::numeric_limits<double>::infinity()) {
  const int n = d.n(), k = d.k;
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (metric == MatchMetric::Gps && gps == nullptr)
    throw std::invalid_argument("GPS metric requires a fitted propensity model");

  std::vector<std::vector<int>> arm_index(k);
  for (int i = 0; i < n; ++i) arm_index[d.treatments[i] - 1].push_back(i);
  for (int a = 0; a < k; ++a)
    if (int(arm_index[a].size()) < m)
      throw std::invalid_argument("treatment arm " + std::to_string(a + 1) + " has " +
                                  std::to_string(arm_index[a].size()) + " subjects, fewer than m=" +
                                  std::to_string(m));

  Eigen::MatrixXd inv_cov;
  Eigen::MatrixXd probs;  // n x k clipped GPS, Gps metric only
  if (metric == MatchMetric::Mahalanobis) {
    inv_cov = pooled_inverse_covariance(d.covariates);
  } else {
    probs = predict_gps(*gps, d.covariates);
  }

  MatchedSets ms;
  ms.n = n;
  ms.k = k;
  ms.m = m;
  ms.metric = metric;
  ms.neighbors.assign(n, std::vector<std::vector<int>>(k));
  ms.distances.assign(n, std::vector<std::vector<double>>(k));

  std::vector<std::pair<double, int>> cand;
  for (int i = 0; i < n; ++i) {
    const int ai = d.treatments[i];
    for (int w = 1; w <= k; ++w) {
      if (w == ai) {
        ms.neighbors[i][w - 1] = {i};
        ms.distances[i][w - 1] = {0.0};
        continue;
      }
      cand.clear();
      for (int j : arm_index[w - 1]) {
        double dist;
        if (metric == MatchMetric::Mahalanobis)
          dist = mahalanobis_distance(d.covariates.row(i).transpose(),
                                      d.covariates.row(j).transpose(), inv_cov);
        else
          dist = (probs.row(i) - probs.row(j)).norm();
        if (dist <= caliper) cand.emplace_back(dist, j);
      }
      const int take = std::min<int>(m, int(cand.size()));
      std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
      auto& nb = ms.neighbors[i][w - 1];
      auto& ds = ms.distances[i][w - 1];
      nb.reserve(take);
      ds.reserve(take);
      for (int t = 0; t < take; ++t) {
        ds.push_back(cand[t].first);
        nb.push_back(cand[t].second);
      }
    }
  }
  return ms;
}

}  // namespace matchitr
