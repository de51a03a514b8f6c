#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "islab/bump.hpp"

using namespace islab;

namespace {

Vec vecn(std::initializer_list<double> vals) {
  Vec v(static_cast<int>(vals.size()));
  int i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("smoothstep endpoints, midpoint, and seam derivatives") {
  CHECK(smoothstep5(-2.0) == 0.0);
  CHECK(smoothstep5(0.0) == 0.0);
  CHECK(smoothstep5(1.0) == 1.0);
  CHECK(smoothstep5(7.0) == 1.0);
  CHECK(smoothstep5(0.5) == Catch::Approx(0.5).margin(1e-15));
  // C^2 at the seams: first and second central differences vanish
  const double h = 1e-5;
  for (double u0 : {0.0, 1.0}) {
    double d1 = (smoothstep5(u0 + h) - smoothstep5(u0 - h)) / (2 * h);
    double d2 = (smoothstep5(u0 + h) - 2 * smoothstep5(u0) + smoothstep5(u0 - h)) / (h * h);
    CHECK(std::abs(d1) < 1e-9);
    CHECK(std::abs(d2) < 1e-4);
  }
  // monotone on [0,1]
  double prev = 0;
  for (int i = 1; i <= 100; ++i) {
    double cur = smoothstep5(i / 100.0);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("cutoff surface has the five contract properties") {
  const double tau = 0.008, r = 0.25;
  BumpGamma g(tau, r);

  // zero on the entering edge and on the outer shell
  for (double s : {0.0, 0.3 * r, 0.5 * r, 0.9 * r, r})
    CHECK(g(-tau, s) == 0.0);
  for (double t : {-tau, -0.5 * tau, 0.0, 0.7 * tau, tau})
    CHECK(g(t, r) == 0.0);

  // identically one on [-tau/2, tau] x [0, r/2], boundary included
  for (double t : {-0.5 * tau, -0.25 * tau, 0.0, 0.5 * tau, tau})
    for (double s : {0.0, 0.2 * r, 0.5 * r})
      CHECK(g(t, s) == 1.0);

  // strictly inside (0,1) everywhere else in the open domain
  for (double t : {-0.95 * tau, -0.75 * tau, -0.6 * tau}) {
    for (double s : {0.0, 0.3 * r, 0.6 * r, 0.95 * r}) {
      double v = g(t, s);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  for (double t : {-0.3 * tau, 0.0, 0.9 * tau}) {
    for (double s : {0.55 * r, 0.75 * r, 0.99 * r}) {
      double v = g(t, s);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("cutoff reference values") {
  const double tau = 0.004, r = 0.1;
  BumpGamma g(tau, r);
  CHECK(g(-tau, 0.3 * r) == 0.0);
  CHECK(g(0.0, 0.0) == 1.0);
  // both factors sit at their smoothstep midpoint
  CHECK(g(-0.75 * tau, 0.75 * r) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("cutoff domain and parameter validation") {
  BumpGamma g(0.005, 0.2);
  CHECK_THROWS_AS(g(-0.006, 0.1), PreconditionError);
  CHECK_THROWS_AS(g(0.006, 0.1), PreconditionError);
  CHECK_THROWS_AS(g(0.0, -0.01), PreconditionError);
  CHECK_THROWS_AS(g(0.0, 0.21), PreconditionError);
  // the section width must leave room for the flow segment: 100*tau < 1-tau
  CHECK_THROWS_AS(BumpGamma(0.01, 0.2), PreconditionError);
  CHECK_NOTHROW(BumpGamma(0.0098, 0.2));
  CHECK_THROWS_AS(BumpGamma(0.0, 0.2), PreconditionError);
  CHECK_THROWS_AS(BumpGamma(0.005, 0.0), PreconditionError);
}

TEST_CASE("blend hits its pure regimes exactly") {
  BumpGamma g(0.008, 0.25);
  Vec x = vecn({1.0, 2.0});
  Vec y = vecn({-3.0, 5.0});

  // weight one: deep in the ball, past mid-section
  Vec deep = vecn({0.05, 0.05});
  CHECK((bump_mix(g, x, y, deep, 0.0) - x).norm() == 0.0);
  CHECK((bump_mix(g, x, y, deep, 0.008) - x).norm() == 0.0);

  // weight zero: at the section entrance, or out at the shell
  CHECK((bump_mix(g, x, y, deep, -0.008) - y).norm() == 0.0);
  Vec shell = vecn({0.25, 0.0});
  CHECK((bump_mix(g, x, y, shell, 0.0) - y).norm() == 0.0);
  Vec outside = vecn({0.4, 0.3});
  CHECK((bump_mix(g, x, y, outside, 0.0) - y).norm() == 0.0);
}

TEST_CASE("blend never beats the triangle split") {
  // |blend - z| <= |x - z| + |y - z| on random triples, including states
  // outside the shell and times clamped at the section edges
  BumpGamma g(0.006, 0.3);
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_real_distribution<double> time(-0.009, 0.009);
  for (int trial = 0; trial < 10000; ++trial) {
    Vec x = vecn({coord(rng), coord(rng), coord(rng)});
    Vec y = vecn({coord(rng), coord(rng), coord(rng)});
    Vec z = vecn({coord(rng), coord(rng), coord(rng)});
    Vec v = vecn({0.2 * coord(rng), 0.2 * coord(rng), 0.2 * coord(rng)});
    double s = time(rng);
    Vec mix = bump_mix(g, x, y, v, s);
    CHECK((mix - z).norm() <= (x - z).norm() + (y - z).norm() + 1e-12);
  }
}
