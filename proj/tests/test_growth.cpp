#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "islab/growth.hpp"

using namespace islab;

namespace {
Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("attracting torus orbit plateaus at the geometric limit") {
  FlowEngine eng(builtin_torus_ms());
  auto rep = estimate_growth(eng, vec2(0, 0), {5, 10, 20}, 3, 900);
  CHECK(rep.verdict == "bounded");
  CHECK(rep.limit_estimate ==
        Catch::Approx(1.0 / (1.0 - std::exp(-2 * M_PI))).margin(1e-3));
  CHECK(rep.rows.size() == 9);
}

TEST_CASE("translation flow grows linearly in the window size") {
  FlowEngine eng(builtin_torus_irr());
  auto rep = estimate_growth(eng, vec2(0.5, 0.5), {10, 20, 40}, 3, 901);
  CHECK(rep.verdict == "growing");
  CHECK(rep.slope == Catch::Approx(1.0).margin(0.1));
  // the constant-normal pattern is the adversarial one: sup = N exactly
  for (size_t i = 0; i < rep.N_list.size(); ++i)
    CHECK(rep.max_sup[i] == Catch::Approx(double(rep.N_list[i])).margin(1e-6));
}

TEST_CASE("shear flow plateaus at its geometric limit") {
  FlowEngine eng(builtin_plane_shear());
  auto rep = estimate_growth(eng, vec2(0, 0), {5, 10, 20}, 3, 902);
  CHECK(rep.verdict == "bounded");
  CHECK(rep.limit_estimate == Catch::Approx(1.0 / (1.0 - std::exp(-1.0))).margin(1e-3));
}

TEST_CASE("growth reports are deterministic per seed") {
  FlowEngine eng(builtin_torus_ms());
  auto a = estimate_growth(eng, vec2(0, 0), {4, 8}, 4, 1000);
  auto b = estimate_growth(eng, vec2(0, 0), {4, 8}, 4, 1000);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i)
    CHECK(a.rows[i].sup_norm == b.rows[i].sup_norm);
  auto c = estimate_growth(eng, vec2(0, 0), {4, 8}, 4, 1001);
  bool same = true;
  for (size_t i = 0; i < a.rows.size(); ++i)
    if (a.rows[i].sup_norm != c.rows[i].sup_norm) same = false;
  CHECK_FALSE(same);  // trials > 0 are seed-dependent
}

TEST_CASE("probe validates its plan") {
  FlowEngine eng(builtin_torus_ms());
  CHECK_THROWS_AS(estimate_growth(eng, vec2(0, 0), {}, 3, 0), PreconditionError);
  CHECK_THROWS_AS(estimate_growth(eng, vec2(0, 0), {5, 5}, 3, 0), PreconditionError);
  CHECK_THROWS_AS(estimate_growth(eng, vec2(0, 0), {5, 10}, 0, 0), PreconditionError);
}
