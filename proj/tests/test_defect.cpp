#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "islab/defect.hpp"

using namespace islab;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<Vec> random_kicks(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec> z(count);
  for (auto& zk : z) {
    zk = vec2(u(rng), u(rng));
    if (zk.norm() > 1.0) zk /= zk.norm() * 1.0000001;
  }
  return z;
}

MethodConfig shear_config(int kappa, double d, std::uint64_t seed) {
  MethodConfig cfg;
  cfg.d = d;
  cfg.r = 0.25;
  cfg.N = 4;
  cfg.kappa = kappa;
  cfg.base = vec2(0.0, 0.4);
  cfg.z = random_kicks(2 * cfg.N + 1, seed);
  return cfg;
}

const UbConstants& shear_ub() {
  static UbConstants ub = estimate_ub_constants(FlowEngine(builtin_plane_shear()));
  return ub;
}

}  // namespace

TEST_CASE("case classifier: worked examples") {
  const double tau = 1e-3;
  const int N = 4;
  // both endpoints clear of sections, short shift
  CHECK(classify_defect_case(2.0 + 1.5 * tau, tau, tau, N) == 1);
  // gap start, landing inside the next section
  CHECK(classify_defect_case(2.5, 0.5, tau, N) == 2);
  // both in gaps with a whole section between them
  CHECK(classify_defect_case(2.5, 1.0, tau, N) == 3);
  // an integer start point is inside; a 0.9 shift falls short of the next
  // section for any realistic width, a full unit lands in it
  CHECK(classify_defect_case(2.0, 0.9, tau, N) == 5);
  CHECK(classify_defect_case(2.0, 1.0, tau, N) == 6);
  // same-section pairs, including both boundary conventions
  CHECK(classify_defect_case(2.0 - tau, 2.0 * tau, tau, N) == 4);
  CHECK(classify_defect_case(2.0 - tau, 0.0, tau, N) == 4);
  // section edges belong to the section
  CHECK(classify_defect_case(2.0 + tau, 0.5 * tau, tau, N) == 5);
  CHECK(classify_defect_case(2.0 + 1.001 * tau, 0.5 * tau, tau, N) == 1);
  // past the last section everything is outside
  CHECK(classify_defect_case(2 * N + 0.5, 0.2, tau, N) == 3);
  CHECK(classify_defect_case(2 * N + 0.5, tau, tau, N) == 1);

  CHECK_THROWS_AS(classify_defect_case(2.0, -0.1, tau, N), PreconditionError);
  CHECK_THROWS_AS(classify_defect_case(2.0, 1.1, tau, N), PreconditionError);
  CHECK_THROWS_AS(classify_defect_case(0.5, 0.1, tau, N), PreconditionError);
  CHECK_THROWS_AS(classify_defect_case(2.0, 0.1, 0.0, N), PreconditionError);
}

TEST_CASE("case classifier agrees with brute-force interval logic") {
  const double tau = 8e-3;
  const int N = 3;
  auto inside = [&](double x) {
    for (int k = 1; k <= 2 * N; ++k)
      if (x >= k - tau - 1e-12 && x <= k + tau + 1e-12) return k;
    return 0;
  };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(1.0 - tau, 2 * N + 1.5);
  std::uniform_real_distribution<double> us(0.0, 1.0);
  for (int trial = 0; trial < 20000; ++trial) {
    double t = ut(rng);
    double s = us(rng);
    // sprinkle exact boundary hits among the random draws
    if (trial % 7 == 0) t = std::round(t) + (trial % 2 ? tau : -tau);
    if (trial % 11 == 0) s = 2 * tau;
    if (t < 1.0 - tau) t = 1.0 - tau;
    int got = classify_defect_case(t, s, tau, N);
    int a = inside(t), b = inside(t + s);
    int want;
    if (a == 0 && b == 0)
      want = s <= 2 * tau + 1e-12 ? 1 : 3;
    else if (a == 0)
      want = 2;
    else if (b == 0)
      want = 5;
    else
      want = a == b ? 4 : 6;
    REQUIRE(got == want);
  }
}

TEST_CASE("envelopes are ordered the way the chaining says") {
  const UbConstants& ub = shear_ub();
  for (int kappa : {0, 1}) {
    DefectEnvelope env = defect_envelopes(ub, 1e-2, 1e-3, kappa);
    CHECK(env.b[2] > 0);
    CHECK(env.b[3] >= env.b[2]);          // Q4 >= 1: chaining can only grow
    CHECK(env.b[4] >= env.b[2]);
    CHECK(env.b[5] >= env.b[4]);
    CHECK(env.b[6] >= env.b[2]);
    CHECK(env.worst == *std::max_element(env.b.begin() + 1, env.b.end()));
  }
  // frozen mode pays a full parking interval where the transported mode only
  // pays a quadratic remainder
  DefectEnvelope moving = defect_envelopes(ub, 1e-2, 1e-3, 1);
  DefectEnvelope frozen = defect_envelopes(ub, 1e-2, 1e-3, 0);
  CHECK(frozen.b[2] > moving.b[2]);
}

TEST_CASE("measured defect stays inside every case envelope") {
  FlowEngine eng(builtin_plane_shear());
  for (int kappa : {0, 1}) {
    DMethod m(eng, shear_config(kappa, 1e-2, 67));
    DefectGrid grid;
    DefectReport rep = measure_defect(m, grid, &shear_ub());

    CHECK(rep.d == 1e-2);
    CHECK(rep.N == 4);
    CHECK(rep.kappa == kappa);
    CHECK(rep.rows.size() > 1500);
    CHECK(rep.within_bounds);
    CHECK(rep.sup <= rep.bound);
    CHECK(rep.sup > 0);

    // where the method never meets a section it is the flow: zero up to
    // integrator group error
    std::set<int> seen;
    std::size_t mirrored = 0;
    for (const auto& row : rep.rows) {
      if (row.case_label == 1) CHECK(row.delta <= 1e-8);
      if (row.case_label > 0)
        seen.insert(row.case_label);
      else
        ++mirrored;
      CHECK(row.delta <= row.bound + 1e-12);
    }
    CHECK(seen == std::set<int>{1, 2, 3, 4, 5, 6});
    CHECK(mirrored > 0);
    CHECK(double(mirrored) / double(rep.rows.size()) > 0.04);
  }
}

TEST_CASE("the exact flow passes the tracking check at any scale") {
  FlowEngine eng(builtin_plane_shear());
  MethodCheckGrid grid;
  grid.t_lo = -3.0;
  grid.t_hi = 3.0;
  grid.t_count = 12;
  grid.s_count = 7;
  grid.points = {vec2(0.0, 0.4), vec2(-1.0, 1.1), vec2(0.7, -0.9)};
  auto psi = [&](double t, const Vec& x) { return eng.flow(t, x); };
  MethodCheckResult res = verify_dmethod(psi, eng, 1e-6, grid);
  CHECK(res.pass);
  CHECK(res.worst <= 1e-9);
  CHECK(res.reason.empty());
}

TEST_CASE("a built frozen-mode instance passes at its evaluated bound") {
  FlowEngine eng(builtin_plane_shear());
  DMethod m(eng, shear_config(0, 1e-2, 67));
  DefectReport rep = measure_defect(m, DefectGrid{}, &shear_ub());

  MethodCheckGrid grid;
  grid.t_lo = -1.0;
  grid.t_hi = 2 * m.N() + 1.5;
  grid.t_count = 15;
  grid.s_count = 7;
  grid.points = default_probe_points(m, 2);
  // theta is the identity-normalized evaluator (identity at time 0, sections
  // at 1..2N); psi is the same map on the shifted axis
  auto psi = [&](double t, const Vec& x) { return m.theta(t, x); };

  MethodCheckResult at_bound = verify_dmethod(psi, eng, rep.bound * 1.1, grid);
  CHECK(at_bound.pass);
  // the envelope is conservative: the start orbit also clears a snug scale
  MethodCheckResult snug = verify_dmethod(psi, eng, rep.sup * 1.5 + 1e-6, grid);
  CHECK(snug.pass);
}

TEST_CASE("frozen mode teleports off-orbit starts: the gap is visible") {
  // the defect analysis lives on the start orbit; a start point elsewhere in
  // the half ball is dragged to the anchored orbit at the first section, a
  // jump of order |v| that no O(d) scale covers
  FlowEngine eng(builtin_plane_shear());
  DMethod m(eng, shear_config(0, 1e-2, 67));
  DefectReport rep = measure_defect(m, DefectGrid{}, &shear_ub());

  MethodCheckGrid grid;
  grid.t_lo = 0.2;  // start in the pre-section flow leg...
  grid.t_hi = 0.9;
  grid.t_count = 12;
  grid.s_count = 5;  // ...so the pinned s = 1 shift crosses the first section
  grid.points = {m.base() + vec2(0.1, 0.0)};  // inside the half ball
  auto psi = [&](double t, const Vec& x) { return m.theta(t, x); };

  double snug = rep.sup * 1.5 + 1e-6;
  MethodCheckResult res = verify_dmethod(psi, eng, snug, grid);
  CHECK_FALSE(res.pass);
  CHECK(res.worst >= 0.05);
  CHECK(res.reason.find("defect") != std::string::npos);
}

TEST_CASE("tracking check rejects a jump discontinuity at time zero") {
  FlowEngine eng(builtin_plane_shear());
  const double d = 1e-2;
  auto psi = [&](double t, const Vec& x) -> Vec {
    Vec y = eng.flow(t, x);
    if (t > 0) y[0] += 2 * d;
    return y;
  };
  MethodCheckGrid grid;
  grid.t_lo = -2.0;
  grid.t_hi = 2.0;
  grid.points = {vec2(0.0, 0.4)};
  MethodCheckResult res = verify_dmethod(psi, eng, d, grid);
  CHECK_FALSE(res.pass);
  CHECK(res.worst >= 2 * d - 1e-9);
  CHECK(!res.reason.empty());
}

TEST_CASE("tracking check rejects a broken time-zero identity") {
  FlowEngine eng(builtin_plane_shear());
  auto psi = [&](double t, const Vec& x) -> Vec { return eng.flow(t, x) + vec2(1e-6, 0.0); };
  MethodCheckGrid grid;
  grid.points = {vec2(0.0, 0.4)};
  MethodCheckResult res = verify_dmethod(psi, eng, 1e-2, grid);
  CHECK_FALSE(res.pass);
  CHECK(res.reason.find("identity") != std::string::npos);

  CHECK_THROWS_AS(verify_dmethod(psi, eng, 0.0, grid), PreconditionError);
  grid.points.clear();
  CHECK_THROWS_AS(verify_dmethod(psi, eng, 1e-2, grid), PreconditionError);
}

TEST_CASE("probe points: the start point plus a ring just outside the ball") {
  FlowEngine eng(builtin_plane_shear());
  DMethod m(eng, shear_config(1, 1e-2, 67));
  auto pts = default_probe_points(m, 4);
  REQUIRE(pts.size() == 5);
  CHECK((pts[0] - m.base()).norm() == 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(distance(eng.space(), pts[i], m.base()) > m.r());
}

TEST_CASE("scaling fit recovers a planted law") {
  const UbConstants& ub = shear_ub();
  std::vector<double> ds = {1e-2, 5e-3, 2.5e-3};
  for (int kappa : {0, 1}) {
    std::vector<double> sups;
    for (double d : ds) {
      double tau = choose_section_width(d);
      double mod = kappa == 1 ? g1_modulus(ub, tau).value : tau;
      sups.push_back(3.0 * d + 7.0 * mod);
    }
    ScalingFit fit = fit_defect_scaling(ds, sups, kappa, ub);
    CHECK(fit.rel_residual <= 1e-6);
    CHECK(fit.k_lin == Catch::Approx(3.0).epsilon(1e-4));
    CHECK(fit.k_mod == Catch::Approx(7.0).epsilon(1e-2));
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK(sups[i] <= defect_scale_bound(fit, ds[i], kappa, ub) * (1 + 1e-12));
  }
  CHECK_THROWS_AS(fit_defect_scaling({1e-2}, {1.0}, 1, ub), PreconditionError);
}

TEST_CASE("defect ladders scale like the fitted law in both modes") {
  FlowEngine eng(builtin_plane_shear());
  std::vector<double> ds = {1e-2, 5e-3, 2.5e-3};
  DefectGrid grid;
  grid.per_section = 8;
  grid.per_gap = 4;
  grid.tail = 3;
  grid.s_count = 12;
  for (int kappa : {0, 1}) {
    std::vector<double> sups;
    for (double d : ds) {
      DMethod m(eng, shear_config(kappa, d, 71));  // same kicks across the ladder
      DefectReport rep = measure_defect(m, grid, &shear_ub());
      CHECK(rep.within_bounds);
      sups.push_back(rep.sup);
    }
    CHECK(sups[0] > sups[1]);  // smaller d, smaller defect
    CHECK(sups[1] > sups[2]);
    ScalingFit fit = fit_defect_scaling(ds, sups, kappa, shear_ub());
    CHECK(fit.k_lin >= 0);
    CHECK(fit.k_mod >= 0);
    CHECK(fit.rel_residual <= 0.10);
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK(sups[i] <= defect_scale_bound(fit, ds[i], kappa, shear_ub()) * (1 + 1e-12));
  }
}
