#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "matchitr/dataset.hpp"
#include "matchitr/random.hpp"

namespace matchitr {

struct SurvivalForestConfig {
  int n_trees = 200;
  int mtry = 0;      // 0 -> ceil(sqrt(p+1)); treatment counts as one candidate variable
  int min_node = 15; // children must keep >= min_node samples
  int nsplit = 10;   // random cut points per continuous candidate
  std::uint64_t seed = 0;
};

// A survival tree. Internal nodes split on a covariate threshold or on a
// subset of treatment arms; leaves carry a Nelson-Aalen cumulative hazard,
// stored sparsely as exp(-H) at the global-grid indices where H jumps.
struct SurvivalTree {
  struct Node {
    int var = -1;            // -1 leaf, 0..p-1 covariate, p treatment
    double threshold = 0.0;  // covariate split: x <= threshold goes left
    std::uint32_t mask = 0;  // treatment split: arm bit (a-1) set goes left
    int left = -1, right = -1;
    std::vector<int> jump_idx;     // ascending global-grid indices
    std::vector<double> jump_surv; // exp(-H) right of each jump
  };
  std::vector<Node> nodes;

  int leaf_for(const Eigen::VectorXd& x, int arm, int p) const {
    int cur = 0;
    while (nodes[cur].var >= 0) {
      const Node& nd = nodes[cur];
      const bool go_left = (nd.var == p) ? ((nd.mask >> (arm - 1)) & 1u) != 0
                                         : x[nd.var] <= nd.threshold;
      cur = go_left ? nd.left : nd.right;
    }
    return cur;
  }
};

struct SurvivalForest {
  int p = 0, k = 0;
  SurvivalForestConfig config;
  std::vector<double> grid;  // pooled distinct event times, ascending
  std::vector<SurvivalTree> trees;

  // Ensemble survival on the grid: S[g] = average over trees of exp(-H_b(t_g)).
  std::vector<double> survival_curve(const Eigen::VectorXd& x, int arm) const {
    const int G = int(grid.size());
    std::vector<double> acc(G, 0.0);
    for (const auto& tree : trees) {
      const auto& leaf = tree.nodes[tree.leaf_for(x, arm, p)];
      double cur = 1.0;
      std::size_t j = 0;
      for (int g = 0; g < G; ++g) {
        while (j < leaf.jump_idx.size() && leaf.jump_idx[j] <= g) cur = leaf.jump_surv[j++];
        acc[g] += cur;
      }
    }
    const double inv = 1.0 / double(trees.size());
    for (double& v : acc) v *= inv;
    return acc;
  }

  // Right-continuous step evaluation of a grid curve; 1 before the first
  // event time.
  double step_at(const std::vector<double>& curve, double t) const {
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const auto idx = it - grid.begin();
    return idx == 0 ? 1.0 : curve[std::size_t(idx) - 1];
  }
};

namespace detail {

struct NodeStats {
  std::vector<double> utimes;  // distinct event times in the node
  std::vector<int> ridx;       // per sample: #utimes <= T (at-risk prefix length)
  std::vector<int> eidx;       // per sample: index of its event time, or -1
  std::vector<double> dtot, ytot;
};

// Log-rank statistic |O-E|/sqrt(V) for the split that sends `in_left` samples
// left; returns 0 when the variance vanishes.
inline double logrank_stat(const NodeStats& st, const std::vector<int>& samples,
                           const std::vector<char>& in_left, std::vector<double>& dleft,
                           std::vector<int>& cnt) {
  const int U = int(st.utimes.size());
  std::fill(dleft.begin(), dleft.begin() + U, 0.0);
  std::fill(cnt.begin(), cnt.begin() + U + 1, 0);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (!in_left[s]) continue;
    ++cnt[st.ridx[s]];
    if (st.eidx[s] >= 0) dleft[st.eidx[s]] += 1.0;
  }
  double num = 0.0, var = 0.0;
  double yleft = 0.0;
  for (int j = U; j >= 1; --j) yleft += cnt[j];  // at risk at utimes[0]... accumulate below
  // yleft currently counts samples with ridx >= 1, i.e. at risk at utimes[0].
  for (int j = 0; j < U; ++j) {
    const double Y = st.ytot[j];
    if (Y > 0.0) {
      const double d = st.dtot[j];
      const double frac = yleft / Y;
      num += dleft[j] - frac * d;
      if (Y > 1.0) var += d * frac * (1.0 - frac) * (Y - d) / (Y - 1.0);
    }
    yleft -= cnt[j + 1];  // samples leaving the risk set after utimes[j]
  }
  if (var <= 0.0) return 0.0;
  return std::abs(num) / std::sqrt(var);
}

}  // namespace detail

// Random survival forest with log-rank splitting. Trees are grown on
// bootstrap samples; the treatment enters as a categorical split candidate
// (subset splits, first present arm pinned left). Leaf cumulative hazards are
// Nelson-Aalen estimates over the *full* training data routed to the leaf, so
// the bootstrap only drives the split search.
inline SurvivalForest fit_survival_forest(const Dataset& d, SurvivalForestConfig cfg = {}) {
  if (!d.survival) throw std::invalid_argument("survival forest needs time/event data");
  const int n = d.n(), p = d.p();
  const auto& time = d.survival->time;
  const auto& event = d.survival->event;
  if (cfg.n_trees < 1 || cfg.min_node < 1 || cfg.nsplit < 1)
    throw std::invalid_argument("invalid survival forest configuration");

  SurvivalForest forest;
  forest.p = p;
  forest.k = d.k;
  if (cfg.mtry <= 0) cfg.mtry = int(std::ceil(std::sqrt(double(p + 1))));
  cfg.mtry = std::min(cfg.mtry, p + 1);
  forest.config = cfg;

  for (int i = 0; i < n; ++i)
    if (event[i] == 1) forest.grid.push_back(time[i]);
  std::sort(forest.grid.begin(), forest.grid.end());
  forest.grid.erase(std::unique(forest.grid.begin(), forest.grid.end()), forest.grid.end());
  if (forest.grid.empty()) throw std::invalid_argument("no events in the data");
  const auto& grid = forest.grid;
  const int G = int(grid.size());

  // Scratch buffers sized for the worst case.
  std::vector<double> dleft(n, 0.0);
  std::vector<int> cnt(n + 1, 0);

  for (int b = 0; b < cfg.n_trees; ++b) {
    Rng rng(derive_seed(cfg.seed, std::uint64_t(b) + 1));
    std::vector<int> boot(n);
    for (int i = 0; i < n; ++i) boot[i] = int(rng.below(std::size_t(n)));

    SurvivalTree tree;
    // Iterative recursion with an explicit stack of (node id, samples).
    struct Work { int node; std::vector<int> samples; };
    tree.nodes.emplace_back();
    std::vector<Work> stack;
    stack.push_back({0, std::move(boot)});
    while (!stack.empty()) {
      Work w = std::move(stack.back());
      stack.pop_back();
      auto& samples = w.samples;
      const int sz = int(samples.size());

      int n_events = 0;
      for (int s : samples) n_events += event[s];
      bool make_leaf = sz < 2 * cfg.min_node || n_events == 0;

      int best_var = -1;
      double best_threshold = 0.0;
      std::uint32_t best_mask = 0;
      double best_stat = 0.0;
      std::vector<char> best_left;

      if (!make_leaf) {
        // Node-level risk/event tables on the node's own event-time grid.
        detail::NodeStats st;
        for (int s : samples)
          if (event[s] == 1) st.utimes.push_back(time[s]);
        std::sort(st.utimes.begin(), st.utimes.end());
        st.utimes.erase(std::unique(st.utimes.begin(), st.utimes.end()), st.utimes.end());
        const int U = int(st.utimes.size());
        st.ridx.resize(sz);
        st.eidx.resize(sz);
        st.dtot.assign(U, 0.0);
        st.ytot.assign(U, 0.0);
        std::vector<int> rcount(U + 1, 0);
        for (int s = 0; s < sz; ++s) {
          const int i = samples[s];
          const int r = int(std::upper_bound(st.utimes.begin(), st.utimes.end(), time[i]) -
                            st.utimes.begin());
          st.ridx[s] = r;
          ++rcount[r];
          if (event[i] == 1) {
            const int e = int(std::lower_bound(st.utimes.begin(), st.utimes.end(), time[i]) -
                              st.utimes.begin());
            st.eidx[s] = e;
            st.dtot[e] += 1.0;
          } else {
            st.eidx[s] = -1;
          }
        }
        double at_risk = 0.0;
        for (int j = U - 1; j >= 0; --j) {
          at_risk += rcount[j + 1];
          st.ytot[j] = at_risk;
        }

        // Candidate variables: mtry distinct draws from {covariates, treatment}.
        std::vector<int> vars(p + 1);
        for (int v = 0; v <= p; ++v) vars[v] = v;
        for (int j = 0; j < cfg.mtry; ++j)
          std::swap(vars[j], vars[j + int(rng.below(std::size_t(p + 1 - j)))]);
        vars.resize(cfg.mtry);
        std::sort(vars.begin(), vars.end());

        std::vector<char> in_left(sz);
        for (int v : vars) {
          if (v < p) {
            for (int s = 0; s < cfg.nsplit; ++s) {
              const double c = d.covariates(samples[int(rng.below(std::size_t(sz)))], v);
              int nl = 0;
              for (int t = 0; t < sz; ++t) {
                in_left[t] = d.covariates(samples[t], v) <= c;
                nl += in_left[t];
              }
              if (nl < cfg.min_node || sz - nl < cfg.min_node) continue;
              const double stat = detail::logrank_stat(st, samples, in_left, dleft, cnt);
              if (stat > best_stat) {
                best_stat = stat;
                best_var = v;
                best_threshold = c;
                best_left = in_left;
              }
            }
          } else {
            std::vector<int> present;
            for (int a = 1; a <= d.k; ++a) {
              bool found = false;
              for (int t = 0; t < sz && !found; ++t) found = d.treatments[samples[t]] == a;
              if (found) present.push_back(a);
            }
            const int L = int(present.size());
            if (L < 2) continue;
            const std::uint32_t codes = (std::uint32_t(1) << (L - 1)) - 1;  // exclude full set
            for (std::uint32_t c = 0; c < codes; ++c) {
              std::uint32_t mask = std::uint32_t(1) << (present[0] - 1);
              for (int j = 1; j < L; ++j)
                if ((c >> (j - 1)) & 1u) mask |= std::uint32_t(1) << (present[j] - 1);
              int nl = 0;
              for (int t = 0; t < sz; ++t) {
                in_left[t] = ((mask >> (d.treatments[samples[t]] - 1)) & 1u) != 0;
                nl += in_left[t];
              }
              if (nl < cfg.min_node || sz - nl < cfg.min_node) continue;
              const double stat = detail::logrank_stat(st, samples, in_left, dleft, cnt);
              if (stat > best_stat) {
                best_stat = stat;
                best_var = p;
                best_mask = mask;
                best_left = in_left;
              }
            }
          }
        }
        if (best_var < 0) make_leaf = true;
      }

      if (make_leaf) {
        tree.nodes[w.node].var = -1;
        continue;
      }
      std::vector<int> left_samples, right_samples;
      for (int t = 0; t < sz; ++t)
        (best_left[t] ? left_samples : right_samples).push_back(samples[t]);
      const int li = int(tree.nodes.size());
      tree.nodes.emplace_back();
      const int ri = int(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[w.node];
      nd.var = best_var;
      nd.threshold = best_threshold;
      nd.mask = best_mask;
      nd.left = li;
      nd.right = ri;
      stack.push_back({ri, std::move(right_samples)});
      stack.push_back({li, std::move(left_samples)});
    }

    // Leaf estimates from the full training data routed down the tree.
    std::vector<std::vector<int>> members(tree.nodes.size());
    for (int i = 0; i < n; ++i)
      members[tree.leaf_for(d.covariates.row(i).transpose(), d.treatments[i], p)].push_back(i);
    for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
      if (tree.nodes[nd].var >= 0) continue;
      std::vector<double> dg(G, 0.0);
      std::fill(cnt.begin(), cnt.begin() + G + 1, 0);
      for (int i : members[nd]) {
        const int r = int(std::upper_bound(grid.begin(), grid.end(), time[i]) - grid.begin());
        ++cnt[r];
        if (event[i] == 1) {
          const int e = int(std::lower_bound(grid.begin(), grid.end(), time[i]) - grid.begin());
          dg[e] += 1.0;
        }
      }
      double yg = 0.0;
      for (int j = G; j >= 1; --j) yg += cnt[j];
      double H = 0.0;
      auto& leaf = tree.nodes[nd];
      for (int g = 0; g < G; ++g) {
        if (dg[g] > 0.0 && yg > 0.0) {
          H += dg[g] / yg;
          leaf.jump_idx.push_back(g);
          leaf.jump_surv.push_back(std::exp(-H));
        }
        yg -= cnt[g + 1];
      }
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

enum class ImputeSource { Observed, Imputed, Capped };

struct ImputedOutcome {
  int subject = -1;
  double value = 0.0;
  ImputeSource source = ImputeSource::Observed;
};

// Mean-residual-life imputation of a single (x, arm, T, event) record:
// events keep T; censored records get T + int_T^tau S / S(T) with the
// integral taken by the trapezoidal rule over the event grid restricted to
// (T, tau) plus both endpoints, and the result clamped to <= tau. If S(T)
// has collapsed below 1e-10 the record keeps T and is tagged Capped.
inline double impute_one(const SurvivalForest& forest, const Eigen::VectorXd& x, int arm, double T,
                         int event, double tau, ImputeSource* source = nullptr) {
  if (event == 1) {
    if (source) *source = ImputeSource::Observed;
    return T;
  }
  if (T >= tau) {
    if (source) *source = ImputeSource::Imputed;
    return tau;
  }
  const std::vector<double> curve = forest.survival_curve(x, arm);
  const double sT = forest.step_at(curve, T);
  if (sT < 1e-10) {
    if (source) *source = ImputeSource::Capped;
    return T;
  }
  std::vector<double> knots{T};
  for (double t : forest.grid)
    if (t > T && t < tau) knots.push_back(t);
  knots.push_back(tau);
  double integral = 0.0;
  double prev_t = knots[0], prev_s = forest.step_at(curve, knots[0]);
  for (std::size_t j = 1; j < knots.size(); ++j) {
    const double s = forest.step_at(curve, knots[j]);
    integral += 0.5 * (knots[j] - prev_t) * (prev_s + s);
    prev_t = knots[j];
    prev_s = s;
  }
  if (source) *source = ImputeSource::Imputed;
  return std::min(T + integral / sT, tau);
}

inline std::vector<ImputedOutcome> mean_residual_impute(const SurvivalForest& forest,
                                                        const Dataset& d, double tau) {
  if (!d.survival) throw std::invalid_argument("imputation needs time/event data");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  std::vector<ImputedOutcome> out(d.n());
  for (int i = 0; i < d.n(); ++i) {
    out[i].subject = i;
    out[i].value = impute_one(forest, d.covariates.row(i).transpose(), d.treatments[i],
                              d.survival->time[i], d.survival->event[i], tau, &out[i].source);
  }
  return out;
}

inline Dataset with_imputed_outcomes(const Dataset& d, const std::vector<ImputedOutcome>& imp) {
  if (int(imp.size()) != d.n()) throw std::invalid_argument("imputation length mismatch");
  Dataset out = d;
  out.outcomes.resize(d.n());
  for (const auto& r : imp) out.outcomes[r.subject] = r.value;
  return out;
}

}  // namespace matchitr
