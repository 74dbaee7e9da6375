#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "bilevel/convex_set.hpp"

namespace bilevel {

/* One structured family of subdifferential elements:
 *   base + sum_i theta_i e_i   with theta_i in [lo_i, hi_i]
 *        + sum_g u_g           with ||u_g||_2 <= radius_g on group coords.
 * Interval terms arise from l1 kinks, ball terms from group-norm kinks.
 */
struct SubgradientPieces {
  Vec base;
  struct Interval {
    int index;
    double lo, hi;
  };
  struct Ball {
    std::vector<int> indices;
    double radius;
  };
  std::vector<Interval> intervals;
  std::vector<Ball> balls;
};

struct ResidualOptions {
  double activity_tol = 1e-9;    // face classification, scaled by 1+|z|_inf
  double membership_tol = 1e-9;  // set membership check, same scaling
  int line_iters = 80;           // golden-section iterations per line search
  int grad_iters = 150;          // projected-gradient iterations (multipliers)
  int ball_iters = 400;          // projected-gradient iterations (ball terms)
};

struct ResidualOutcome {
  double value = 0;  // min over the structure of |base + selection + normal|
  Vec element;       // attained minimal vector
};

namespace detail {

enum class Face { Interior, AtLower, AtUpper, Fixed };

/* Signed distance from 0 to the reachable interval [t+lo, t+hi] (+) cone. */
inline double signed_residual(double t, double lo, double hi, Face f) {
  if (f == Face::Fixed) return 0.0;
  double A = t + lo, B = t + hi;
  if (f == Face::AtLower) A = -kInf;
  if (f == Face::AtUpper) B = kInf;
  if (A > 0) return A;
  if (B < 0) return B;
  return 0.0;
}

template <class F>
double golden_min(F&& f, double lo, double hi, int iters) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

/* Bracket and minimize a convex function on [lo_bound, +inf) or all of R. */
template <class F>
double line_min(F&& f, double scale, bool nonneg, int iters) {
  const double f0 = f(0.0);
  auto expand = [&](double dir) {
    double x = 0.0, fx = f0, step = scale;
    for (int g = 0; g < 120; ++g) {
      const double c = x + dir * step;
      const double fc = f(c);
      if (fc >= fx) return c;
      x = c;
      fx = fc;
      step *= 2;
    }
    return x + dir * step;
  };
  const double hi = expand(+1.0);
  const double lo = nonneg ? 0.0 : expand(-1.0);
  return golden_min(f, lo, hi, iters);
}

}  // namespace detail

/* Minimum-norm element of  pieces + N_set(z)  over the structured
 * selections and the normal-cone multipliers. The returned element is
 * always attained by a feasible selection, so `value` is a sound upper
 * bound on dist(0, subdifferential + N_set(z)) even at loose settings.
 */
inline ResidualOutcome min_normal_residual(const ConvexSet& set, const Vec& z,
                                           const SubgradientPieces& pieces,
                                           const ResidualOptions& opt = {}) {
  using detail::Face;
  const int n = set.dim();
  require(z.size() == n && pieces.base.size() == n,
          "min_normal_residual: dimension mismatch");
  const double scale = 1 + z.lpNorm<Eigen::Infinity>();
  require(set_violation(set, z) <= opt.membership_tol * scale,
          "min_normal_residual: point not in set");

  const double act = opt.activity_tol * scale;
  std::vector<Face> face(n, Face::Interior);
  if (set.kind != SetKind::WholeSpace) {
    for (int i = 0; i < n; ++i) {
      const bool atl = std::isfinite(set.lower[i]) && z[i] - set.lower[i] <= act;
      const bool atu = std::isfinite(set.upper[i]) && set.upper[i] - z[i] <= act;
      face[i] = atl && atu ? Face::Fixed
                : atl      ? Face::AtLower
                : atu      ? Face::AtUpper
                           : Face::Interior;
    }
  }

  Vec ilo = Vec::Zero(n), ihi = Vec::Zero(n);
  for (const auto& iv : pieces.intervals) {
    require(iv.index >= 0 && iv.index < n && iv.lo <= iv.hi,
            "min_normal_residual: bad interval");
    ilo[iv.index] += iv.lo;
    ihi[iv.index] += iv.hi;
  }
  for (const auto& b : pieces.balls)
    require(b.radius >= 0, "min_normal_residual: bad ball");
  std::vector<int> ball_coords;
  for (const auto& b : pieces.balls)
    for (int i : b.indices) {
      require(i >= 0 && i < n, "min_normal_residual: bad ball index");
      ball_coords.push_back(i);
    }

  // active coupling constraints z_i <= z_j contribute mu_i (e_i - e_j)
  std::vector<int> coupling;
  if (set.has_coupling())
    for (int i : set.coupled)
      if (z[set.bound_index] - z[i] <= act) coupling.push_back(i);
  const int j = set.bound_index;
  const bool hyper = set.has_hyperplane();
  const int nv = (hyper ? 1 : 0) + static_cast<int>(coupling.size());

  // evaluate residual^2 and the attained element for given multipliers
  Vec u_warm;  // ball selections kept warm across evaluations
  auto evaluate = [&](const Vec& v, Vec* elem_out) {
    Vec t = pieces.base;
    if (hyper) t += v[0] * set.normal;
    for (std::size_t k = 0; k < coupling.size(); ++k) {
      const double mu = v[(hyper ? 1 : 0) + static_cast<int>(k)];
      t[coupling[k]] += mu;
      t[j] -= mu;
    }
    Vec s(n);
    for (int i = 0; i < n; ++i)
      s[i] = detail::signed_residual(t[i], ilo[i], ihi[i], face[i]);
    if (!pieces.balls.empty()) {
      // minimize over the ball selections by projected gradient (L = 2)
      if (u_warm.size() != static_cast<Eigen::Index>(ball_coords.size()))
        u_warm = Vec::Zero(ball_coords.size());
      Vec u = u_warm;
      for (int it = 0; it < opt.ball_iters; ++it) {
        double change = 0;
        int off = 0;
        for (const auto& b : pieces.balls) {
          const int m = static_cast<int>(b.indices.size());
          Eigen::VectorXd g(m);
          for (int k = 0; k < m; ++k) {
            const int i = b.indices[k];
            g[k] = detail::signed_residual(t[i] + u[off + k], ilo[i], ihi[i],
                                           face[i]);
          }
          Eigen::VectorXd unew = u.segment(off, m) - g;
          const double nn = unew.norm();
          if (nn > b.radius) unew *= b.radius / nn;
          change = std::max(change,
                            (unew - u.segment(off, m)).lpNorm<Eigen::Infinity>());
          u.segment(off, m) = unew;
          off += m;
        }
        if (change < 1e-15 * scale) break;
      }
      u_warm = u;
      int off = 0;
      for (const auto& b : pieces.balls) {
        for (int k = 0; k < static_cast<int>(b.indices.size()); ++k) {
          const int i = b.indices[k];
          s[i] = detail::signed_residual(t[i] + u[off + k], ilo[i], ihi[i],
                                         face[i]);
        }
        off += static_cast<int>(b.indices.size());
      }
    }
    if (elem_out) *elem_out = s;
    return s.squaredNorm();
  };

  Vec v = Vec::Zero(nv);
  if (nv > 0) {
    // projected gradient on the multipliers with exact arc search;
    // f is convex piecewise quadratic, mu components stay nonnegative
    double fv = evaluate(v, nullptr);
    for (int it = 0; it < opt.grad_iters; ++it) {
      Vec s;
      evaluate(v, &s);
      Vec g = Vec::Zero(nv);
      if (hyper) g[0] = 2 * set.normal.dot(s);
      for (std::size_t k = 0; k < coupling.size(); ++k)
        g[(hyper ? 1 : 0) + static_cast<int>(k)] = 2 * (s[coupling[k]] - s[j]);
      if (g.lpNorm<Eigen::Infinity>() < 1e-16 * (1 + std::sqrt(fv))) break;
      auto along = [&](double tau) {
        Vec w = v - tau * g;
        for (int k = (hyper ? 1 : 0); k < nv; ++k) w[k] = std::max(w[k], 0.0);
        return evaluate(w, nullptr);
      };
      const double tau =
          detail::line_min(along, 1.0 / (1 + g.norm()), true, opt.line_iters);
      Vec w = v - tau * g;
      for (int k = (hyper ? 1 : 0); k < nv; ++k) w[k] = std::max(w[k], 0.0);
      const double fw = evaluate(w, nullptr);
      if (fw >= fv - 1e-18 * (1 + fv)) break;
      v = w;
      fv = fw;
    }
  }
  ResidualOutcome out;
  out.value = std::sqrt(evaluate(v, &out.element));
  return out;
}

/* dist(0, v + N_set(z)): no structured selections, just the normal cone. */
inline double normal_cone_residual(const ConvexSet& set, const Vec& z,
                                   const Vec& v,
                                   const ResidualOptions& opt = {}) {
  SubgradientPieces p;
  p.base = v;
  return min_normal_residual(set, z, p, opt).value;
}

}  // namespace bilevel
