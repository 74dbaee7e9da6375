#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>

#include "bilevel/convex_set.hpp"
#include "bilevel/residual.hpp"
#include "bilevel/rng.hpp"

using namespace bilevel;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

/* Independent residual oracle for box(+hyperplane) sets: scans the
 * hyperplane multiplier on a refining grid and handles each coordinate
 * cone directly. Deliberately shares no code with the library. */
double residual_oracle(const ConvexSet& s, const Vec& z, const Vec& v,
                       double act = 1e-9) {
  auto coord_dist = [&](int i, double t) {
    const bool atl =
        std::isfinite(s.lower[i]) && z[i] - s.lower[i] <= act * (1 + std::abs(z[i]));
    const bool atu =
        std::isfinite(s.upper[i]) && s.upper[i] - z[i] <= act * (1 + std::abs(z[i]));
    if (atl && atu) return 0.0;
    if (atl) return std::max(-t, 0.0);  // n_i <= 0 available
    if (atu) return std::max(t, 0.0);   // n_i >= 0 available
    return std::abs(t);
  };
  auto value = [&](double nu) {
    double r2 = 0;
    for (int i = 0; i < s.dim(); ++i) {
      const double t = v[i] + (s.has_hyperplane() ? nu * s.normal[i] : 0.0);
      const double d = coord_dist(i, t);
      r2 += d * d;
    }
    return std::sqrt(r2);
  };
  if (!s.has_hyperplane()) return value(0.0);
  double best = std::numeric_limits<double>::infinity(), bestnu = 0;
  double center = 0, width = 100;
  for (int round = 0; round < 8; ++round) {
    for (int k = 0; k <= 4000; ++k) {
      const double nu = center - width + 2 * width * k / 4000.0;
      const double r = value(nu);
      if (r < best) {
        best = r;
        bestnu = nu;
      }
    }
    center = bestnu;
    width /= 200;
  }
  return best;
}

}  // namespace

TEST_CASE("box projection clamps componentwise", "[set]") {
  auto s = ConvexSet::box(vec3(0, 0, 0), vec3(1, 1, 1));
  Vec z = vec3(0.5, 2.0, -1.0);
  Vec w = project(s, z);
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 1.0);
  CHECK(w[2] == 0.0);
  // interior points are fixed points
  Vec zi = vec3(0.25, 0.75, 0.5);
  CHECK((project(s, zi) - zi).norm() == 0.0);
}

TEST_CASE("whole space projection is the identity", "[set]") {
  auto s = ConvexSet::whole_space(4);
  Vec z = Vec::Random(4);
  CHECK((project(s, z) - z).norm() == 0.0);
}

TEST_CASE("construction rejects malformed sets", "[set]") {
  CHECK_THROWS_AS(ConvexSet::box(vec3(1, 0, 0), vec3(0, 1, 1)), Error);
  // hyperplane out of reach of the box: a^T z over [0,1]^3 is [0,3]
  CHECK_THROWS_AS(
      ConvexSet::box_hyperplane(vec3(0, 0, 0), vec3(1, 1, 1), vec3(1, 1, 1), 5.0),
      Error);
  CHECK_THROWS_AS(
      ConvexSet::box_hyperplane(vec3(0, 0, 0), vec3(1, 1, 1), vec3(0, 0, 0), 0.0),
      Error);
}

TEST_CASE("box-hyperplane projection matches grid oracle", "[set][oracle]") {
  // box [0,2]^3 intersect {w1 - w2 + w3 = 0}, project z = (2,0,2)
  auto s = ConvexSet::box_hyperplane(vec3(0, 0, 0), vec3(2, 2, 2),
                                     vec3(1, -1, 1), 0.0);
  Vec z = vec3(2, 0, 2);
  Vec w = project(s, z);

  // analytic solution: unclamped multiplier step gives (2/3, 4/3, 2/3)
  CHECK(std::abs(w[0] - 2.0 / 3) < 1e-12);
  CHECK(std::abs(w[1] - 4.0 / 3) < 1e-12);
  CHECK(std::abs(w[2] - 2.0 / 3) < 1e-12);
  CHECK(std::abs(s.normal.dot(w) - s.offset) < 1e-12);

  // brute force over (w1, w2) with w3 = w2 - w1 pinned by the hyperplane
  double best = std::numeric_limits<double>::infinity();
  Vec wbest(3);
  const int N = 2000;
  for (int i = 0; i <= N; ++i)
    for (int k = 0; k <= N; ++k) {
      const double w1 = 2.0 * i / N, w2 = 2.0 * k / N, w3 = w2 - w1;
      if (w3 < 0 || w3 > 2) continue;
      const double d2 = (w1 - 2) * (w1 - 2) + w2 * w2 + (w3 - 2) * (w3 - 2);
      if (d2 < best) {
        best = d2;
        wbest = vec3(w1, w2, w3);
      }
    }
  CHECK((w - wbest).lpNorm<Eigen::Infinity>() < 2e-3);
  CHECK(std::abs((w - z).norm() - std::sqrt(best)) < 1e-5);
}

TEST_CASE("projection is idempotent and optimal", "[set][property]") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(5));
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = rng.uniform(-2, 0);
      hi[i] = lo[i] + rng.uniform(0.1, 3);
    }
    ConvexSet s;
    if (trial % 2 == 0) {
      s = ConvexSet::box(lo, hi);
    } else {
      Vec a(n);
      for (int i = 0; i < n; ++i) a[i] = rng.uniform(-1, 1);
      if (a.lpNorm<Eigen::Infinity>() < 0.1) a[0] = 1;
      // aim the offset inside the reachable range
      Vec mid = 0.5 * (lo + hi);
      s = ConvexSet::box_hyperplane(lo, hi, a, a.dot(mid));
    }
    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.uniform(-4, 4);
    Vec w = project(s, z);
    CHECK(set_violation(s, w) < 1e-10);
    CHECK((project(s, w) - w).lpNorm<Eigen::Infinity>() <= 1e-12);
    // optimality against random feasible competitors
    for (int k = 0; k < 20; ++k) {
      Vec c(n);
      for (int i = 0; i < n; ++i) c[i] = rng.uniform(lo[i], hi[i]);
      c = project(s, c);  // land exactly on the hyperplane if present
      CHECK((w - z).norm() <= (c - z).norm() + 1e-10);
    }
  }
}

TEST_CASE("coupled-set projection matches grid oracle", "[set][oracle]") {
  // coords (C, e1, e2): C in [0.1,2], e in [0,3]^2, e1 - e2 = 0, e_i <= C
  Vec lo = vec3(0.1, 0, 0), hi = vec3(2, 3, 3);
  auto s = ConvexSet::box_hyperplane(lo, hi, vec3(0, 1, -1), 0.0)
               .with_coupling({1, 2}, 0);

  auto check_against_grid = [&](const Vec& z) {
    Vec w = project(s, z);
    CHECK(set_violation(s, w) < 1e-9);
    double best = std::numeric_limits<double>::infinity();
    Vec wb(3);
    const int N = 1500;
    auto consider = [&](double C, double e) {
      if (e > C || e < 0 || e > 3) return;
      const double d2 = (C - z[0]) * (C - z[0]) + (e - z[1]) * (e - z[1]) +
                        (e - z[2]) * (e - z[2]);
      if (d2 < best) {
        best = d2;
        wb = vec3(C, e, e);
      }
    };
    for (int i = 0; i <= N; ++i) {
      const double C = 0.1 + 1.9 * i / N;
      for (int k = 0; k <= N; ++k) consider(C, 3.0 * k / N);
      consider(C, std::min(C, 3.0));  // e1 = e2 = e; include the cap exactly
    }
    CHECK((w - wb).lpNorm<Eigen::Infinity>() < 3e-3);
    CHECK((w - z).norm() <= std::sqrt(best) + 1e-6);
  };

  check_against_grid(vec3(0.2, 1.5, 1.5));   // cap pulls C upward
  check_against_grid(vec3(1.0, 0.2, 0.4));   // coupling inactive
  check_against_grid(vec3(-1.0, 2.5, 2.6));  // C at its lower bound
  check_against_grid(vec3(3.0, 2.9, 2.8));   // C at its upper bound

  // idempotence on the coupled set
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    Vec z = vec3(rng.uniform(-1, 3), rng.uniform(-1, 4), rng.uniform(-1, 4));
    Vec w = project(s, z);
    CHECK(set_violation(s, w) < 1e-9);
    CHECK((project(s, w) - w).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("normal cone residual on boxes", "[residual]") {
  Vec lo(1), hi(1);
  lo << 0;
  hi << 1;
  auto s = ConvexSet::box(lo, hi);
  Vec z(1), v(1);

  z << 0.5;  // interior: N = {0}
  v << -0.7;
  CHECK(normal_cone_residual(s, z, v) == Catch::Approx(0.7));

  z << 0.0;  // at lower: N = (-inf, 0]
  v << 1.0;
  CHECK(normal_cone_residual(s, z, v) == Catch::Approx(0.0).margin(1e-15));
  v << -1.0;
  CHECK(normal_cone_residual(s, z, v) == Catch::Approx(1.0));

  z << 1.0;  // at upper: N = [0, inf)
  v << -0.3;
  CHECK(normal_cone_residual(s, z, v) == Catch::Approx(0.0).margin(1e-15));
  v << 0.3;
  CHECK(normal_cone_residual(s, z, v) == Catch::Approx(0.3));

  // outside the set -> error
  z << 2.0;
  CHECK_THROWS_AS(normal_cone_residual(s, z, v), Error);
}

TEST_CASE("normal cone residual on box-hyperplane faces", "[residual][oracle]") {
  auto s = ConvexSet::box_hyperplane(vec3(0, 0, 0), vec3(2, 2, 2),
                                     vec3(1, -1, 1), 0.0);
  Rng rng(3);

  // face point: only the hyperplane active, N = span{a}; the residual is
  // the norm of v minus its projection onto a
  Vec z = vec3(2.0 / 3, 4.0 / 3, 2.0 / 3);
  for (int t = 0; t < 25; ++t) {
    Vec v = vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec a = s.normal;
    const double exact = (v - a * (a.dot(v) / a.squaredNorm())).norm();
    CHECK(normal_cone_residual(s, z, v) == Catch::Approx(exact).margin(1e-9));
    CHECK(residual_oracle(s, z, v) == Catch::Approx(exact).margin(1e-6));
  }

  // corner point: lower bounds and hyperplane all active
  z = vec3(0, 0, 0);
  for (int t = 0; t < 25; ++t) {
    Vec v = vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const double lib = normal_cone_residual(s, z, v);
    const double ora = residual_oracle(s, z, v);
    CHECK(lib == Catch::Approx(ora).margin(1e-6));
  }
}

TEST_CASE("structured pieces: intervals and balls", "[residual]") {
  auto s = ConvexSet::box(Vec::Constant(2, -1), Vec::Constant(2, 1));
  Vec z = Vec::Zero(2);

  SubgradientPieces p;
  p.base = Vec(2);
  p.base << 0.3, -0.2;
  p.intervals.push_back({0, -0.5, 0.5});
  auto out = min_normal_residual(s, z, p);
  CHECK(out.value == Catch::Approx(0.2).margin(1e-12));
  CHECK(out.element.norm() == Catch::Approx(out.value).margin(1e-12));

  SubgradientPieces q;
  q.base = p.base;
  q.balls.push_back({{0, 1}, 0.25});
  const double expect = p.base.norm() - 0.25;
  CHECK(min_normal_residual(s, z, q).value == Catch::Approx(expect).margin(1e-9));

  // interval + ball on overlapping coordinates against a brute-force grid
  SubgradientPieces r;
  r.base = p.base;
  r.intervals.push_back({0, -0.1, 0.1});
  r.balls.push_back({{0, 1}, 0.15});
  double best = std::numeric_limits<double>::infinity();
  const int N = 400;
  for (int i = 0; i <= N; ++i)
    for (int k = 0; k <= N; ++k) {
      const double th = -0.1 + 0.2 * i / N;
      const double ang = 2 * M_PI * k / N;
      for (int rad = 0; rad <= 40; ++rad) {
        const double rr = 0.15 * rad / 40;
        const double u0 = rr * std::cos(ang), u1 = rr * std::sin(ang);
        const double e0 = r.base[0] + th + u0, e1 = r.base[1] + u1;
        best = std::min(best, std::hypot(e0, e1));
      }
    }
  CHECK(min_normal_residual(s, z, r).value == Catch::Approx(best).margin(1e-4));
}

TEST_CASE("product sets concatenate and shift coupling", "[set]") {
  auto X = ConvexSet::box(Vec::Constant(2, 0.01), Vec::Constant(2, 10));
  Vec b(3);
  b << 1, -1, 1;
  auto Y = ConvexSet::box_hyperplane(Vec::Zero(3), Vec::Constant(3, 10), b, 0.0);
  auto C = product(X, Y).with_coupling({2, 3, 4}, 1);
  CHECK(C.dim() == 5);
  CHECK(C.bound_index == 1);
  CHECK(C.normal[0] == 0);
  CHECK(C.normal[2] == 1);

  Vec z(5);
  z << 5, 0.5, 0.2, 0.1, 0.1;  // b^T eta = 0.2 - 0.1 + 0.1 = 0.2, infeasible
  CHECK(set_violation(C, z) == Catch::Approx(0.2));
  Vec w = project(C, z);
  CHECK(set_violation(C, w) < 1e-9);

  CHECK_THROWS_AS(product(Y, Y), Error);  // two hyperplanes
}
