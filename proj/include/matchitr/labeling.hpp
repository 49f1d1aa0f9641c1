#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "matchitr/dataset.hpp"
#include "matchitr/matching.hpp"
#include "matchitr/random.hpp"

namespace matchitr {

// Weight placed on a matched tuple, as a function of the tuple's outcomes:
//   Constant: 1
//   GapSum:   sum_w (max_l R_l - R_w)
//   Range:    max_l R_l - min_l R_l
// GapSum and Range are exchangeable in the outcomes and vanish iff all tuple
// outcomes are equal; for k = 2 both reduce to |R_i - R_j| (GapSum = Range).
enum class WeightKind { Constant, GapSum, Range };

inline WeightKind parse_weight_kind(const std::string& s) {
  if (s == "constant" || s == "g1") return WeightKind::Constant;
  if (s == "gap-sum" || s == "gw1") return WeightKind::GapSum;
  if (s == "range" || s == "gw2") return WeightKind::Range;
  throw std::invalid_argument("unknown weighting function '" + s + "'");
}

inline double evaluate_weight(WeightKind kind, const std::vector<double>& outcomes) {
  if (outcomes.size() < 2) throw std::invalid_argument("tuple must cover at least 2 arms");
  if (kind == WeightKind::Constant) return 1.0;
  const auto [mn, mx] = std::minmax_element(outcomes.begin(), outcomes.end());
  if (kind == WeightKind::Range) return *mx - *mn;
  // Accumulate the gap sum in sorted order so the result is bit-identical
  // under any permutation of the arms (the function is exchangeable; a
  // value-dependent summation order keeps that true in floating point too).
  std::vector<double> sorted(outcomes);
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (double r : sorted) s += *mx - r;
  return s;
}

// One weighted multicategory classification instance derived from a matched
// tuple of subject i.
struct ClassificationInstance {
  int subject = -1;
  std::vector<int> tuple;      // tuple[w-1] = subject index supplying arm w's outcome
  Eigen::VectorXd features;    // covariates of subject i
  int label = 0;               // argmax arm of the tuple outcomes
  double weight = 0.0;
};

namespace detail {

// Label = arm with the largest tuple outcome; ties prefer the subject's own
// arm, then the lowest arm index.
inline int tuple_label(const std::vector<double>& r, int own_arm) {
  int best = 1;
  for (int w = 2; w <= int(r.size()); ++w)
    if (r[w - 1] > r[best - 1]) best = w;
  if (r[own_arm - 1] == r[best - 1]) return own_arm;
  return best;
}

}  // namespace detail

// Builds the weighted classification instances for every subject. Each tuple
// takes one index from each arm's matched set (the subject itself for its own
// arm). When a subject's tuple count exceeds tuple_cap, a seeded uniform
// subsample of tuple_cap distinct tuples is used and the weight normalization
// divides by the subsample size instead. Zero-weight instances are dropped.
// Subjects with an empty matched set (possible under a caliper) are skipped.
inline std::vector<ClassificationInstance> build_instances(const Dataset& d, const MatchedSets& ms,
                                                           WeightKind kind, int tuple_cap = 64,
                                                           std::uint64_t seed = 0) {
  const int n = d.n(), k = d.k;
  if (!d.has_outcomes()) throw std::invalid_argument("dataset has no outcomes; impute first");
  if (ms.n != n || ms.k != k) throw std::invalid_argument("matched sets do not match the dataset");
  if (tuple_cap < 1) throw std::invalid_argument("tuple_cap must be >= 1");

  std::vector<ClassificationInstance> out;
  std::vector<int> radix(k), idx(k);
  std::vector<double> r(k);
  for (int i = 0; i < n; ++i) {
    const int ai = d.treatments[i];
    bool skip = false;
    std::uint64_t total = 1;
    bool huge = false;
    for (int w = 1; w <= k; ++w) {
      const auto& set = ms.set_for(i, w);
      if (set.empty()) { skip = true; break; }
      radix[w - 1] = int(set.size());
      if (!huge) {
        total *= std::uint64_t(set.size());
        if (total > (std::uint64_t(1) << 50)) huge = true;
      }
    }
    if (skip) continue;

    const std::uint64_t cap = std::uint64_t(tuple_cap);
    std::vector<std::vector<int>> tuples;  // idx per arm, lexicographic order
    auto decode = [&](std::uint64_t code) {
      std::vector<int> v(k);
      for (int w = k; w >= 1; --w) {
        v[w - 1] = int(code % std::uint64_t(radix[w - 1]));
        code /= std::uint64_t(radix[w - 1]);
      }
      return v;
    };
    if (!huge && total <= cap) {
      for (std::uint64_t c = 0; c < total; ++c) tuples.push_back(decode(c));
    } else if (!huge && total <= 4 * cap) {
      // Subsample codes without replacement, then restore lexicographic order.
      Rng rng(derive_seed(seed, std::uint64_t(i)));
      std::vector<std::uint64_t> codes(total);
      for (std::uint64_t c = 0; c < total; ++c) codes[c] = c;
      for (std::uint64_t t = 0; t < cap; ++t)
        std::swap(codes[t], codes[t + rng.below(std::size_t(total - t))]);
      codes.resize(cap);
      std::sort(codes.begin(), codes.end());
      for (std::uint64_t c : codes) tuples.push_back(decode(c));
    } else {
      // Tuple space much larger than the cap: rejection-sample distinct tuples.
      Rng rng(derive_seed(seed, std::uint64_t(i)));
      std::set<std::vector<int>> chosen;
      while (chosen.size() < cap) {
        std::vector<int> v(k);
        for (int w = 1; w <= k; ++w) v[w - 1] = int(rng.below(std::size_t(radix[w - 1])));
        chosen.insert(std::move(v));
      }
      tuples.assign(chosen.begin(), chosen.end());
    }

    const double denom = double(n) * double(tuples.size());
    for (const auto& t : tuples) {
      for (int w = 1; w <= k; ++w) r[w - 1] = d.outcomes[ms.set_for(i, w)[t[w - 1]]];
      const double g = evaluate_weight(kind, r);
      if (g == 0.0) continue;
      ClassificationInstance inst;
      inst.subject = i;
      inst.tuple.resize(k);
      for (int w = 1; w <= k; ++w) inst.tuple[w - 1] = ms.set_for(i, w)[t[w - 1]];
      inst.features = d.covariates.row(i).transpose();
      inst.label = detail::tuple_label(r, ai);
      inst.weight = g / denom;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace matchitr
