#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "islab/flow_engine.hpp"

using namespace islab;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// closed form for plane-shear: x' = 1, y' = -tanh(y)  =>  sinh y(t) = sinh(y0) e^{-t}
Vec shear_exact(double t, const Vec& p) {
  return vec2(p[0] + t, std::asinh(std::sinh(p[1]) * std::exp(-t)));
}

Mat shear_exact_jac(double t, const Vec& p) {
  double yt = std::asinh(std::sinh(p[1]) * std::exp(-t));
  Mat j = Mat::Identity(2, 2);
  j(1, 1) = std::cosh(p[1]) * std::exp(-t) / std::cosh(yt);
  return j;
}

// closed form for torus-ms on the y-strip (0, 1/2):
// y' = -sin(2 pi y)  =>  tan(pi y(t)) = tan(pi y0) e^{-2 pi t}
Vec torus_ms_exact(double t, const Vec& p) {
  double y = std::atan(std::tan(M_PI * p[1]) * std::exp(-2 * M_PI * t)) / M_PI;
  double x = p[0] + t - std::floor(p[0] + t);
  return vec2(x, y - std::floor(y));
}

}  // namespace

TEST_CASE("linear torus flow is exact translation") {
  FlowEngine eng(builtin_torus_irr());
  const double alpha = (std::sqrt(5.0) - 1.0) / 2.0;
  Vec p = vec2(0.2, 0.9);
  for (double t : {0.0, 0.001, 0.37, 1.0, 7.25, -2.5}) {
    Vec got = eng.flow(t, p);
    Vec want = canonicalize(eng.space(), vec2(0.2 + t, 0.9 + alpha * t));
    CHECK(distance(eng.space(), got, want) < 1e-11);
  }
}

TEST_CASE("shear flow matches its closed form") {
  FlowEngine eng(builtin_plane_shear());
  Vec p = vec2(-1.0, 0.8);
  for (double t : {0.1, 0.5, 1.0, 2.0, 3.0, -1.5}) {
    Vec got = eng.flow(t, p);
    Vec want = shear_exact(t, p);
    CHECK((got - want).norm() < 1e-9);
  }
  // off-grid times go through the dense-output interpolant
  for (double t : {0.0005, 0.12345, 1.0004999}) {
    CHECK((eng.flow(t, p) - shear_exact(t, p)).norm() < 1e-9);
  }
}

TEST_CASE("circle-pendulum flow on the torus matches its closed form") {
  FlowEngine eng(builtin_torus_ms());
  Vec p = vec2(0.4, 0.2);
  for (double t : {0.25, 1.0, 2.0}) {
    Vec got = eng.flow(t, p);
    Vec want = torus_ms_exact(t, p);
    CHECK(distance(eng.space(), got, want) < 1e-9);
  }
}

TEST_CASE("flow(0) returns the canonical representative") {
  FlowEngine eng(builtin_torus_ms());
  Vec p = vec2(1.2, -0.7);
  Vec got = eng.flow(0.0, p);
  CHECK(got[0] == Catch::Approx(0.2));
  CHECK(got[1] == Catch::Approx(0.3));
}

TEST_CASE("group property") {
  FlowEngine eng(builtin_torus_ms());
  Vec p = vec2(0.15, 0.35);
  SECTION("grid-aligned times compose exactly") {
    Vec a = eng.flow(1.25, p);
    Vec b = eng.flow(0.75, eng.flow(0.5, p));
    CHECK(distance(eng.space(), a, b) < 1e-12);
  }
  SECTION("fractional times compose to interpolation accuracy") {
    Vec a = eng.flow(1.11111, p);
    Vec b = eng.flow(0.70707, eng.flow(0.40404, p));
    CHECK(distance(eng.space(), a, b) < 1e-9);
  }
  SECTION("forward then backward returns home") {
    Vec back = eng.flow(-2.0, eng.flow(2.0, p));
    CHECK(distance(eng.space(), back, p) < 1e-10);
  }
}

TEST_CASE("variational jacobian matches the closed form") {
  FlowEngine eng(builtin_plane_shear());
  SECTION("on the straight orbit the derivative contracts by e^{-t}") {
    Vec p = vec2(0.0, 0.0);
    auto jet = eng.flow_with_jacobian(1.0, p);
    CHECK((jet.x - vec2(1.0, 0.0)).norm() < 1e-12);
    CHECK(std::abs(jet.jac(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(jet.jac(1, 1) - std::exp(-1.0)) < 1e-10);
    CHECK(std::abs(jet.jac(0, 1)) < 1e-12);
    CHECK(std::abs(jet.jac(1, 0)) < 1e-12);
  }
  SECTION("off the straight orbit") {
    Vec p = vec2(0.5, 0.9);
    for (double t : {0.5, 1.0, 2.5}) {
      auto jet = eng.flow_with_jacobian(t, p);
      CHECK((jet.jac - shear_exact_jac(t, p)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("variational jacobian is the derivative of the discrete map") {
  // internal differentiation: the returned matrix should match finite
  // differences of the integrator itself to FD accuracy, not just O(h^4)
  FlowEngine eng(builtin_torus_ms());
  Vec p = vec2(0.31, 0.17);
  double t = 0.7;
  auto jet = eng.flow_with_jacobian(t, p);
  const double d = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vec dp = Vec::Zero(2);
    dp[j] = d;
    Vec plus = eng.flow(t, p + dp);
    Vec minus = eng.flow(t, p - dp);
    for (int i = 0; i < 2; ++i) {
      double fd = wrap_half(plus[i] - minus[i]) / (2 * d);
      CHECK(jet.jac(i, j) == Catch::Approx(fd).margin(1e-7));
    }
  }
}

TEST_CASE("many-time queries agree with single-time queries") {
  FlowEngine eng(builtin_torus_ms());
  Vec p = vec2(0.05, 0.45);
  std::vector<double> ts{0.9, 0.1, 1.30001, -0.5, 0.0, 0.1};  // unsorted, mixed sign, dup
  auto many = eng.flow_many(p, ts);
  REQUIRE(many.size() == ts.size());
  for (size_t i = 0; i < ts.size(); ++i) {
    Vec one = eng.flow(ts[i], p);
    CHECK((many[i] - one).norm() < 1e-14);
  }
}

TEST_CASE("horizon guard") {
  FlowEngine eng(builtin_torus_irr(), 1e-3, 5.0);
  Vec p = vec2(0.5, 0.5);
  CHECK_NOTHROW(eng.flow(4.999, p));
  CHECK_THROWS_AS(eng.flow(5.001, p), HorizonError);
  CHECK_THROWS_AS(eng.flow(-6.0, p), HorizonError);
}

TEST_CASE("finite-time blowup is reported, not returned") {
  // x' = 1 + x^2 leaves every bounded set before t = pi/2 + eps
  auto eval = [](const Vec& x) {
    Vec v(2);
    v << 1.0 + x[0] * x[0], 1.0;
    return v;
  };
  VectorField field("blowup", euclidean_space(2), eval, nullptr, {{-1.0, 1.0}, {-1.0, 1.0}});
  FlowEngine eng(field);
  Vec p = vec2(0.0, 0.0);
  CHECK_NOTHROW(eng.flow(1.0, p));
  CHECK_THROWS_AS(eng.flow(2.0, p), NonFiniteError);
}

TEST_CASE("step must be positive") {
  CHECK_THROWS_AS(FlowEngine(builtin_torus_irr(), 0.0), ConfigError);
  CHECK_THROWS_AS(FlowEngine(builtin_torus_irr(), -1e-3), ConfigError);
}
