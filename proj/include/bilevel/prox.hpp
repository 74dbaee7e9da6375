#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "bilevel/error.hpp"
#include "bilevel/types.hpp"

namespace bilevel {

/* Separable (plus group) nonsmooth term handled by exact proximal steps:
 *   WeightedL1:  sum_i w_i |y_i|
 *   SparseGroup: sum_m gw_m |y^(m)|_2 + l1 * |y|_1   (contiguous groups)
 */
struct SeparableSpec {
  enum class Kind { None, WeightedL1, SparseGroup };
  Kind kind = Kind::None;

  Vec l1_weights;  // WeightedL1

  std::vector<std::pair<int, int>> groups;  // SparseGroup: (start, size)
  Vec group_weights;
  double l1_uniform = 0;

  static SeparableSpec none() { return {}; }

  static SeparableSpec weighted_l1(Vec w) {
    require(w.minCoeff() >= 0, "weighted_l1: negative weight");
    SeparableSpec s;
    s.kind = Kind::WeightedL1;
    s.l1_weights = std::move(w);
    return s;
  }

  static SeparableSpec sparse_group(std::vector<std::pair<int, int>> groups,
                                    Vec gw, double l1) {
    require(static_cast<Eigen::Index>(groups.size()) == gw.size(),
            "sparse_group: weight count");
    require(l1 >= 0 && (gw.size() == 0 || gw.minCoeff() >= 0),
            "sparse_group: negative weight");
    SeparableSpec s;
    s.kind = Kind::SparseGroup;
    s.groups = std::move(groups);
    s.group_weights = std::move(gw);
    s.l1_uniform = l1;
    return s;
  }
};

inline double separable_value(const SeparableSpec& s, const Vec& y) {
  switch (s.kind) {
    case SeparableSpec::Kind::None:
      return 0;
    case SeparableSpec::Kind::WeightedL1:
      return s.l1_weights.dot(y.cwiseAbs());
    case SeparableSpec::Kind::SparseGroup: {
      double v = s.l1_uniform * y.lpNorm<1>();
      for (std::size_t m = 0; m < s.groups.size(); ++m)
        v += s.group_weights[m] *
             y.segment(s.groups[m].first, s.groups[m].second).norm();
      return v;
    }
  }
  return 0;
}

/* Minimal-norm subgradient selection: 0 at every kink. */
inline Vec separable_subgrad(const SeparableSpec& s, const Vec& y) {
  Vec g = Vec::Zero(y.size());
  auto sgn = [](double t) { return t > 0 ? 1.0 : (t < 0 ? -1.0 : 0.0); };
  switch (s.kind) {
    case SeparableSpec::Kind::None:
      break;
    case SeparableSpec::Kind::WeightedL1:
      for (int i = 0; i < y.size(); ++i) g[i] = s.l1_weights[i] * sgn(y[i]);
      break;
    case SeparableSpec::Kind::SparseGroup:
      for (int i = 0; i < y.size(); ++i) g[i] = s.l1_uniform * sgn(y[i]);
      for (std::size_t m = 0; m < s.groups.size(); ++m) {
        auto seg = y.segment(s.groups[m].first, s.groups[m].second);
        const double nn = seg.norm();
        if (nn > 0)
          g.segment(s.groups[m].first, s.groups[m].second) +=
              (s.group_weights[m] / nn) * seg;
      }
      break;
  }
  return g;
}

/* Exact proximal point of step*(separable + indicator of [lo, hi]).
 * WeightedL1 + box: soft-threshold then clamp (both separable, exact).
 * SparseGroup: soft-threshold by step*l1, per-group shrink
 * max(0, 1 - step*gw/|.|), then clamp; the clamp is exact when grouped
 * coordinates are unbounded, which is how group terms are used here.
 */
inline Vec prox_separable(const SeparableSpec& s, double step, const Vec& v,
                          const Vec& lo, const Vec& hi) {
  require(step >= 0, "prox_separable: negative step");
  auto soft = [](double t, double a) {
    return t > a ? t - a : (t < -a ? t + a : 0.0);
  };
  Vec w = v;
  switch (s.kind) {
    case SeparableSpec::Kind::None:
      break;
    case SeparableSpec::Kind::WeightedL1:
      require(s.l1_weights.size() == v.size(), "prox_separable: weight size");
      for (int i = 0; i < v.size(); ++i) w[i] = soft(v[i], step * s.l1_weights[i]);
      break;
    case SeparableSpec::Kind::SparseGroup: {
      for (int i = 0; i < v.size(); ++i) w[i] = soft(v[i], step * s.l1_uniform);
      for (std::size_t m = 0; m < s.groups.size(); ++m) {
        auto seg = w.segment(s.groups[m].first, s.groups[m].second);
        const double nn = seg.norm();
        const double cut = step * s.group_weights[m];
        seg *= nn > cut ? 1.0 - cut / nn : 0.0;
      }
      break;
    }
  }
  return w.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace bilevel
