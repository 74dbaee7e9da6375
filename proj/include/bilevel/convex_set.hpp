#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "bilevel/error.hpp"
#include "bilevel/types.hpp"

namespace bilevel {

enum class SetKind { WholeSpace, Box, BoxHyperplane };

/* Closed convex constraint set. Supported shapes:
 *   - whole space
 *   - box  {l <= z <= u}   (entries may be +-inf)
 *   - box ∩ {a^T z = b}
 * plus an optional coupling list: coordinates i constrained by
 * z_i <= z_j for a designated bounding coordinate j. The coupling is
 * what a dual-variable cap eta_i <= C needs when C is itself a
 * coordinate of z.
 */
struct ConvexSet {
  SetKind kind = SetKind::Box;
  Vec lower, upper;
  Vec normal;                // hyperplane normal a (BoxHyperplane only)
  double offset = 0.0;       // hyperplane offset b
  std::vector<int> coupled;  // indices i with z_i <= z_{bound_index}
  int bound_index = -1;

  int dim() const { return static_cast<int>(lower.size()); }
  bool has_hyperplane() const { return kind == SetKind::BoxHyperplane; }
  bool has_coupling() const { return bound_index >= 0; }

  static ConvexSet whole_space(int n) {
    ConvexSet s;
    s.kind = SetKind::WholeSpace;
    s.lower = Vec::Constant(n, -kInf);
    s.upper = Vec::Constant(n, kInf);
    return s;
  }

  static ConvexSet box(Vec lo, Vec hi) {
    require(lo.size() == hi.size(), "box: bound sizes differ");
    for (int i = 0; i < lo.size(); ++i) {
      require(!(std::isnan(lo[i]) || std::isnan(hi[i])), "box: NaN bound");
      require(lo[i] <= hi[i], "box: lower > upper");
    }
    ConvexSet s;
    s.kind = SetKind::Box;
    s.lower = std::move(lo);
    s.upper = std::move(hi);
    return s;
  }

  static ConvexSet box_hyperplane(Vec lo, Vec hi, Vec a, double b) {
    ConvexSet s = box(std::move(lo), std::move(hi));
    require(a.size() == s.lower.size(), "box_hyperplane: normal size");
    require(a.lpNorm<Eigen::Infinity>() > 0, "box_hyperplane: zero normal");
    s.kind = SetKind::BoxHyperplane;
    s.normal = std::move(a);
    s.offset = b;
    // range of a^T z over the box must bracket b, else the set is empty
    double hmin = 0, hmax = 0;
    for (int i = 0; i < s.dim(); ++i) {
      const double ai = s.normal[i];
      if (ai > 0) {
        hmin += ai * s.lower[i];
        hmax += ai * s.upper[i];
      } else if (ai < 0) {
        hmin += ai * s.upper[i];
        hmax += ai * s.lower[i];
      }
    }
    require(hmin <= b + 1e-12 * (1 + std::abs(b)) &&
                b - 1e-12 * (1 + std::abs(b)) <= hmax,
            "box_hyperplane: empty set");
    return s;
  }

  ConvexSet with_coupling(std::vector<int> idx, int bound) const {
    require(kind != SetKind::WholeSpace, "coupling requires box bounds");
    require(bound >= 0 && bound < dim(), "coupling: bad bound index");
    require(std::isfinite(lower[bound]) && std::isfinite(upper[bound]),
            "coupling: bound coordinate must be boxed");
    ConvexSet s = *this;
    for (int i : idx) {
      require(i >= 0 && i < dim() && i != bound, "coupling: bad index");
      // every section {z_i <= c}, c in [l_j, u_j], must stay nonempty
      require(lower[i] <= lower[bound] + 1e-12, "coupling: empty section");
    }
    if (has_hyperplane())
      require(normal[bound] == 0.0,
              "coupling: bound coordinate may not enter the hyperplane");
    s.coupled = std::move(idx);
    s.bound_index = bound;
    return s;
  }
};

/* Concatenate two sets; at most one of them may carry a hyperplane. */
inline ConvexSet product(const ConvexSet& A, const ConvexSet& B) {
  require(!(A.has_hyperplane() && B.has_hyperplane()),
          "product: two hyperplanes unsupported");
  const int n = A.dim(), m = B.dim();
  Vec lo(n + m), hi(n + m);
  lo << A.lower, B.lower;
  hi << A.upper, B.upper;
  ConvexSet s;
  if (A.has_hyperplane() || B.has_hyperplane()) {
    Vec a = Vec::Zero(n + m);
    double b = 0;
    if (A.has_hyperplane()) {
      a.head(n) = A.normal;
      b = A.offset;
    } else {
      a.tail(m) = B.normal;
      b = B.offset;
    }
    s = ConvexSet::box_hyperplane(std::move(lo), std::move(hi), std::move(a), b);
  } else if (A.kind == SetKind::WholeSpace && B.kind == SetKind::WholeSpace) {
    s = ConvexSet::whole_space(n + m);
  } else {
    s = ConvexSet::box(std::move(lo), std::move(hi));
  }
  std::vector<int> coupled;
  int bound = -1;
  auto absorb = [&](const ConvexSet& part, int shift) {
    if (!part.has_coupling()) return;
    require(bound < 0, "product: two coupling groups unsupported");
    bound = part.bound_index + shift;
    for (int i : part.coupled) coupled.push_back(i + shift);
  };
  absorb(A, 0);
  absorb(B, n);
  if (bound >= 0) s = s.with_coupling(std::move(coupled), bound);
  return s;
}

/* Largest constraint violation at z (0 inside the set). */
inline double set_violation(const ConvexSet& s, const Vec& z) {
  require(z.size() == s.dim(), "set_violation: dimension mismatch");
  double v = 0;
  for (int i = 0; i < s.dim(); ++i) {
    if (std::isfinite(s.lower[i])) v = std::max(v, s.lower[i] - z[i]);
    if (std::isfinite(s.upper[i])) v = std::max(v, z[i] - s.upper[i]);
  }
  if (s.has_hyperplane()) v = std::max(v, std::abs(s.normal.dot(z) - s.offset));
  if (s.has_coupling())
    for (int i : s.coupled) v = std::max(v, z[i] - z[s.bound_index]);
  return v;
}

inline bool contains(const ConvexSet& s, const Vec& z, double tol = 1e-9) {
  return set_violation(s, z) <= tol * (1 + z.lpNorm<Eigen::Infinity>());
}

namespace detail {

inline Vec clamp_to(const Vec& z, const Vec& lo, const Vec& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

/* Exact projection onto {l <= w <= u, a^T w = b} by sweeping the
 * breakpoints of the piecewise-linear dual residual
 *     h(nu) = a^T clamp(z - nu a, l, u) - b,
 * which is nonincreasing in nu. Returns (w, nu).
 */
inline std::pair<Vec, double> project_box_hyperplane(const Vec& z, const Vec& lo,
                                                     const Vec& hi, const Vec& a,
                                                     double b) {
  const int n = static_cast<int>(z.size());
  struct Event {
    double nu;
    double slope;  // change of free-mass sum(a_i^2) at this nu
  };
  std::vector<Event> events;
  events.reserve(2 * n);
  for (int i = 0; i < n; ++i) {
    if (a[i] == 0.0) continue;
    // nu-interval on which coordinate i is unclamped
    double s = (z[i] - (a[i] > 0 ? hi[i] : lo[i])) / a[i];
    double e = (z[i] - (a[i] > 0 ? lo[i] : hi[i])) / a[i];
    if (std::isfinite(s)) events.push_back({s, a[i] * a[i]});
    if (std::isfinite(e)) events.push_back({e, -a[i] * a[i]});
  }
  std::sort(events.begin(), events.end(),
            [](const Event& x, const Event& y) { return x.nu < y.nu; });

  // start left of every breakpoint and sweep
  double nu = events.empty() ? 0.0 : events.front().nu - 1.0;
  double h = a.dot(clamp_to(z - nu * a, lo, hi)) - b;
  double mass = 0;  // sum of a_i^2 over currently free coordinates
  for (int i = 0; i < n; ++i) {
    const double w = z[i] - nu * a[i];
    if (a[i] != 0.0 && w > lo[i] && w < hi[i]) mass += a[i] * a[i];
  }
  double nu_star = nu;
  bool found = (h <= 0);
  if (found && h < 0 && mass > 0) nu_star = nu + h / mass;
  if (!found) {
    std::size_t k = 0;
    while (k < events.size()) {
      // advance to the next distinct breakpoint
      const double nxt = events[k].nu;
      const double h_next = h - mass * (nxt - nu);
      if (h_next <= 0) {
        nu_star = mass > 0 ? nu + h / mass : nxt;
        found = true;
        break;
      }
      h = h_next;
      nu = nxt;
      while (k < events.size() && events[k].nu <= nxt) mass += events[k++].slope;
    }
    if (!found) {
      require(mass > 0, "project: hyperplane unreachable (empty set?)");
      nu_star = nu + h / mass;
    }
  }
  Vec w = clamp_to(z - nu_star * a, lo, hi);
  // polish: distribute the residual over strictly free coordinates
  double denom = 0;
  for (int i = 0; i < n; ++i)
    if (w[i] > lo[i] && w[i] < hi[i]) denom += a[i] * a[i];
  if (denom > 0) {
    const double r = (a.dot(w) - b) / denom;
    for (int i = 0; i < n; ++i)
      if (w[i] > lo[i] && w[i] < hi[i]) w[i] -= a[i] * r;
    w = clamp_to(w, lo, hi);
  }
  return {w, nu_star};
}

/* Inner step of the coupled projection: bound coordinate pinned to c,
 * coupled coordinates capped at c. Returns (w, nu).
 */
inline std::pair<Vec, double> project_coupled_section(const ConvexSet& s,
                                                      const Vec& z, double c) {
  Vec lo = s.lower, hi = s.upper;
  lo[s.bound_index] = hi[s.bound_index] = c;
  for (int i : s.coupled) hi[i] = std::min(hi[i], c);
  if (s.has_hyperplane()) return project_box_hyperplane(z, lo, hi, s.normal, s.offset);
  return {clamp_to(z, lo, hi), 0.0};
}

}  // namespace detail

/* Euclidean projection onto the set. */
inline Vec project(const ConvexSet& s, const Vec& z) {
  require(z.size() == s.dim(), "project: dimension mismatch");
  if (s.kind == SetKind::WholeSpace) return z;
  if (!s.has_coupling()) {
    if (!s.has_hyperplane()) return detail::clamp_to(z, s.lower, s.upper);
    return detail::project_box_hyperplane(z, s.lower, s.upper, s.normal, s.offset)
        .first;
  }

  // coupled case: try the uncoupled projection first
  ConvexSet plain = s;
  plain.coupled.clear();
  plain.bound_index = -1;
  Vec w = project(plain, z);
  const int j = s.bound_index;
  bool ok = true;
  for (int i : s.coupled)
    if (w[i] > w[j]) ok = false;
  if (ok) return w;

  // otherwise minimize the section distance over the bound coordinate c:
  // psi(c) = |section(c) - z|^2 is convex in c (joint convexity of the
  // squared distance over the convex graph {(w, c) : w_i <= c}), and the
  // (c - z_j)^2 term makes it strongly convex, so golden section suffices.
  auto psi = [&](double c) {
    Vec wc = detail::project_coupled_section(s, z, c).first;
    wc[j] = c;
    return (wc - z).squaredNorm();
  };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = s.lower[j], b = s.upper[j];
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = psi(x1), f2 = psi(x2);
  for (int it = 0; it < 120 && b - a > 1e-15 * (1 + std::abs(b)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = psi(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = psi(x2);
    }
  }
  const double c = f1 <= f2 ? x1 : x2;
  Vec wc = detail::project_coupled_section(s, z, c).first;
  wc[j] = c;
  return wc;
}

}  // namespace bilevel
