#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "matchitr/dataset.hpp"

namespace matchitr {

// Column-wise standardization (sample SD, denominator n-1). Constant columns
// are passed through untouched and flagged. Fit on training data, reuse on
// test data.
struct Standardizer {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  std::vector<std::uint8_t> constant;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    const int n = int(X.rows()), p = int(X.cols());
    if (n < 2) throw std::invalid_argument("standardization needs at least 2 rows");
    Standardizer s;
    s.center.resize(p);
    s.scale.resize(p);
    s.constant.assign(p, 0);
    for (int j = 0; j < p; ++j) {
      const double mean = X.col(j).mean();
      const double ss = (X.col(j).array() - mean).square().sum();
      const double sd = std::sqrt(ss / double(n - 1));
      if (sd > 0.0) {
        s.center[j] = mean;
        s.scale[j] = sd;
      } else {
        s.center[j] = 0.0;
        s.scale[j] = 1.0;
        s.constant[j] = 1;
      }
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    if (X.cols() != center.size()) throw std::invalid_argument("standardizer dimension mismatch");
    Eigen::MatrixXd Z = X;
    for (int j = 0; j < X.cols(); ++j)
      Z.col(j) = (X.col(j).array() - center[j]) / scale[j];
    return Z;
  }

  Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const {
    if (x.size() != center.size()) throw std::invalid_argument("standardizer dimension mismatch");
    return (x - center).cwiseQuotient(scale);
  }
};

struct StandardizedDataset {
  Dataset data;
  Standardizer transform;
};

inline StandardizedDataset standardize_covariates(const Dataset& d) {
  StandardizedDataset out{d, Standardizer::fit(d.covariates)};
  out.data.covariates = out.transform.apply(d.covariates);
  return out;
}

}  // namespace matchitr
