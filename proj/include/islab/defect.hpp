#pragma once

// Defect measurement for method evaluators: how far one unit of the method
// drifts from the true flow, classified by where the pair (t, t+s) sits
// relative to the blending sections.  Per-case envelopes are evaluated from
// the measured flow constants, and the small-d scaling law is fitted from a
// ladder of instances.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "islab/method.hpp"
#include "islab/ub.hpp"

namespace islab {

// Case labels for a forward pair (t, t+s), s in [0,1], on the method time
// axis, where the blending sections are the closed intervals [k-tau, k+tau],
// k = 1..2N:
//   1  both outside sections, s <= 2 tau  (the pair never meets a section)
//   2  t outside, t+s inside
//   3  both outside, s > 2 tau            (a whole section can sit between)
//   4  both inside the same section       (forces s <= 2 tau)
//   5  t inside, t+s outside
//   6  t and t+s in consecutive sections
// Boundary points count as inside (closed intervals, with 1e-12 slack so a
// time reassembled as (t+s)-s still lands on its boundary), and the s = 2 tau
// boundary goes with the short-pair cases 1 and 4.
inline int classify_defect_case(double t, double s, double tau, int N) {
  if (!(tau > 0) || N < 1)
    throw PreconditionError("classify_defect_case: need tau > 0 and N >= 1");
  if (s < 0.0 || s > 1.0)
    throw PreconditionError("classify_defect_case: s must lie in [0, 1]");
  if (t < 1.0 - tau - 1e-9)
    throw PreconditionError("classify_defect_case: t must not precede the first section");
  constexpr double kSlack = 1e-12;
  auto section_of = [&](double x) -> int {
    int k = static_cast<int>(std::lround(x));
    k = std::max(1, std::min(2 * N, k));
    return std::abs(x - k) <= tau + kSlack ? k : 0;
  };
  int a = section_of(t);
  int b = section_of(t + s);
  if (a == 0 && b == 0) return s <= 2.0 * tau + kSlack ? 1 : 3;
  if (a == 0) return 2;
  if (b == 0) return 5;
  return a == b ? 4 : 6;
}

// Worst-case defect per classifier case, evaluated from the measured flow
// constants.  These pad the sharp estimates: anything the transported-kick
// cancellation saves is left in as headroom, never subtracted.
struct DefectEnvelope {
  std::array<double, 7> b{};  // b[1..6]; b[0] unused
  double worst = 0;           // the overall evaluated bound
};

inline DefectEnvelope defect_envelopes(const UbConstants& ub, double d, double tau,
                                       int kappa) {
  DefectEnvelope env;
  double g_tau = g1_modulus(ub, tau).value;
  double g_wide = g1_modulus(ub, 2.0 * tau + d).value;
  // entering a section: the slide misses the flow by the first-order
  // remainder (transported mode) or by a full parking interval (frozen mode),
  // plus the carried and fresh kicks
  double b2 = (kappa == 1 ? g_tau : ub.Q3 * tau) + ub.Q1 * d + d;
  env.b[1] = 1e-8;  // zero in exact arithmetic; allowance for integrator group error
  env.b[2] = b2;
  env.b[3] = ub.Q4 * b2;
  env.b[4] = (1.0 + ub.Q4) * b2;
  env.b[5] = ub.Q4 * env.b[4];
  env.b[6] = b2 + ub.Q1 * ((1 - kappa) * 2.0 * ub.Q2 * tau + g_wide) + g_wide;
  env.worst = *std::max_element(env.b.begin() + 1, env.b.end());
  return env;
}

struct DefectGrid {
  int per_section = 10;       // t samples per section, edges and center included
  int per_gap = 6;            // t samples per gap between consecutive sections
  int tail = 4;               // t samples after the last section
  int s_count = 14;           // forward s samples; pinned values near 2 tau and 1
  double neg_fraction = 0.1;  // fraction of pairs re-run with the roles swapped
  std::uint64_t seed = 1;
};

struct DefectRow {
  double t = 0, s = 0;
  int case_label = 0;  // 1..6; negative = mirrored s < 0 spot check of |label|
  double delta = 0;
  double bound = 0;
};

struct DefectReport {
  double d = 0, tau = 0;
  int N = 0, kappa = 0;
  std::vector<DefectRow> rows;
  std::array<double, 7> case_sup{};    // suprema over forward rows, by case
  std::array<double, 7> case_bound{};  // evaluated envelopes, by case
  double sup = 0;             // global supremum over every row
  double bound = 0;           // overall evaluated bound
  std::size_t worst_row = 0;  // index of the row achieving the supremum
  bool within_bounds = true;  // every row satisfied delta <= its case bound
};

// Measure the defect of an instance along its own start orbit.  Times are on
// the method axis (sections at 1..2N); rows with s < 0 are the mirrored spot
// checks and compare against Q4 times the forward envelope.  Evaluation is
// split across threads; the instance is immutable, so this is safe.
inline DefectReport measure_defect(const DMethod& inst, const DefectGrid& grid,
                                   const UbConstants* ub = nullptr) {
  const FlowEngine& eng = inst.engine();
  UbConstants local;
  if (ub == nullptr) {
    local = estimate_ub_constants(eng);
    ub = &local;
  }
  const double tau = inst.tau();
  const int N = inst.N();

  DefectReport rep;
  rep.d = inst.d();
  rep.tau = tau;
  rep.N = N;
  rep.kappa = inst.kappa();
  DefectEnvelope env = defect_envelopes(*ub, inst.d(), tau, inst.kappa());
  rep.case_bound = env.b;
  rep.bound = env.worst;

  std::mt19937_64 rng(grid.seed);
  std::uniform_real_distribution<double> uj(0.05, 0.95);

  std::vector<double> ts;
  for (int k = 1; k <= 2 * N; ++k) {
    ts.push_back(k - tau);
    ts.push_back(static_cast<double>(k));
    ts.push_back(k + tau);
    for (int i = 3; i < grid.per_section; ++i)
      ts.push_back(k - tau + 2.0 * tau * uj(rng));
  }
  for (int k = 1; k < 2 * N; ++k)
    for (int i = 0; i < grid.per_gap; ++i)
      ts.push_back(k + tau + (1.0 - 2.0 * tau) * ((i + uj(rng)) / grid.per_gap));
  for (int i = 0; i < grid.tail; ++i)
    ts.push_back(2 * N + tau + 1.2 * ((i + uj(rng)) / grid.tail));

  // forward shifts: the short/long boundary at 2 tau, both edges of a
  // section span, and full-unit shifts that land in the next section
  std::vector<double> ss = {0.5 * tau,       2.0 * tau, 2.25 * tau, 3.0 * tau,
                            1.0 - 2.0 * tau, 1.0 - 0.5 * tau, 1.0};
  int extra = grid.s_count - static_cast<int>(ss.size());
  for (int i = 0; i < extra; ++i) ss.push_back((i + uj(rng)) / extra);

  std::bernoulli_distribution flip(grid.neg_fraction);
  for (double t : ts)
    for (double s : ss) {
      rep.rows.push_back({t, s, 0, 0.0, 0.0});
      if (flip(rng)) rep.rows.push_back({t + s, -s, 0, 0.0, 0.0});
    }

  auto eval_row = [&](DefectRow& row) {
    Vec after = inst.theta_base(row.t + row.s);
    Vec carried = eng.flow(row.s, inst.theta_base(row.t));
    row.delta = distance(eng.space(), after, carried);
    if (row.s >= 0.0) {
      row.case_label = classify_defect_case(row.t, row.s, tau, N);
      row.bound = env.b[row.case_label];
    } else {
      int mirror = classify_defect_case(row.t + row.s, -row.s, tau, N);
      row.case_label = -mirror;
      row.bound = ub->Q4 * env.b[mirror];
    }
  };

  unsigned workers = std::min(8u, std::max(1u, std::thread::hardware_concurrency()));
  if (workers > 1 && rep.rows.size() > 64) {
    std::vector<std::thread> pool;
    std::size_t chunk = (rep.rows.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t lo = w * chunk, hi = std::min(rep.rows.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) eval_row(rep.rows[i]);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (auto& row : rep.rows) eval_row(row);
  }

  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const DefectRow& row = rep.rows[i];
    if (row.delta > rep.sup) {
      rep.sup = row.delta;
      rep.worst_row = i;
    }
    if (row.case_label > 0)
      rep.case_sup[row.case_label] = std::max(rep.case_sup[row.case_label], row.delta);
    if (row.delta > row.bound + 1e-12) rep.within_bounds = false;
  }
  return rep;
}

// Direct check of the one-unit tracking property for an arbitrary evaluator
// psi (psi(0, x) = x expected).  Probes every listed point over a (t, s)
// grid and reports the first violation.
struct MethodCheckGrid {
  double t_lo = -6.0, t_hi = 6.0;
  int t_count = 25;
  int s_count = 9;         // shifts spread over [-1, 1]
  std::vector<Vec> points; // states to probe; must be nonempty
  std::uint64_t seed = 2;
};

struct MethodCheckResult {
  bool pass = true;
  double worst = 0;  // largest defect seen before stopping
  double at_t = 0, at_s = 0;
  int at_point = -1;
  std::string reason;  // empty when pass
};

inline MethodCheckResult verify_dmethod(const std::function<Vec(double, const Vec&)>& psi,
                                        const FlowEngine& engine, double d,
                                        const MethodCheckGrid& grid) {
  if (!(d > 0)) throw PreconditionError("verify_dmethod: d must be positive");
  if (grid.points.empty())
    throw PreconditionError("verify_dmethod: the grid needs at least one probe point");
  MethodCheckResult res;
  char msg[160];
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const Vec& x = grid.points[i];
    double err = distance(engine.space(), psi(0.0, x), x);
    if (err > 1e-9) {
      res.pass = false;
      res.worst = err;
      res.at_point = static_cast<int>(i);
      std::snprintf(msg, sizeof(msg),
                    "time-zero identity off by %.3g at point %zu", err, i);
      res.reason = msg;
      return res;
    }
  }
  std::mt19937_64 rng(grid.seed);
  std::uniform_real_distribution<double> uj(0.0, 1.0);
  std::vector<double> ts, ss;
  for (int i = 0; i < grid.t_count; ++i)
    ts.push_back(grid.t_lo + (grid.t_hi - grid.t_lo) * ((i + uj(rng)) / grid.t_count));
  ts.push_back(0.0);  // the identity seam is where cheap fakes break
  for (int i = 0; i < grid.s_count; ++i)
    ss.push_back(-1.0 + 2.0 * ((i + uj(rng)) / grid.s_count));
  ss.push_back(1.0);
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const Vec& x = grid.points[i];
    for (double t : ts)
      for (double s : ss) {
        double defect = distance(engine.space(), psi(t + s, x), engine.flow(s, psi(t, x)));
        res.worst = std::max(res.worst, defect);
        if (defect >= d) {
          res.pass = false;
          res.at_t = t;
          res.at_s = s;
          res.at_point = static_cast<int>(i);
          std::snprintf(msg, sizeof(msg),
                        "defect %.3g at (t = %.6g, s = %.6g, point %zu) reaches d = %.3g",
                        defect, t, s, i, d);
          res.reason = msg;
          return res;
        }
      }
  }
  return res;
}

// Probe points for checking a built instance: its own start point plus a
// ring just outside the blending ball, where the method is the plain flow.
inline std::vector<Vec> default_probe_points(const DMethod& m, int ring = 4) {
  std::vector<Vec> pts{m.base()};
  const int n = static_cast<int>(m.base().size());
  for (int i = 0; i < ring; ++i) {
    double ang = 2.0 * 3.14159265358979323846 * i / ring;
    Vec v = Vec::Zero(n);
    v[0] = std::cos(ang);
    v[1 % n] = std::sin(ang);
    pts.push_back(chart_exp(m.engine().space(), m.base(), 1.1 * m.r() * v));
  }
  return pts;
}

// Small-d scaling of the measured suprema: sup(d) ~ K_lin * d + K_mod * m(d),
// where the modulus term is g1(section width) in transported mode and the
// raw section width in frozen mode.  Nonnegative least squares on the ladder,
// then inflated so the law dominates every sample.
struct ScalingFit {
  double k_lin = 0, k_mod = 0;
  double rel_residual = 0;  // worst relative misfit before inflation
};

inline ScalingFit fit_defect_scaling(const std::vector<double>& d_values,
                                     const std::vector<double>& sups, int kappa,
                                     const UbConstants& ub) {
  if (d_values.size() != sups.size() || d_values.size() < 2)
    throw PreconditionError("fit_defect_scaling: need matching ladders of at least two runs");
  const std::size_t n = d_values.size();
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = d_values[i];
    double tau = choose_section_width(d_values[i]);
    b[i] = kappa == 1 ? g1_modulus(ub, tau).value : tau;
  }
  double saa = 0, sab = 0, sbb = 0, say = 0, sby = 0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += a[i] * a[i];
    sab += a[i] * b[i];
    sbb += b[i] * b[i];
    say += a[i] * sups[i];
    sby += b[i] * sups[i];
  }
  auto resid = [&](double p, double q) {
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double y = std::max(sups[i], 1e-300);
      worst = std::max(worst, std::abs(p * a[i] + q * b[i] - sups[i]) / y);
    }
    return worst;
  };
  double det = saa * sbb - sab * sab;
  double ka = 0, kb = 0;
  if (det > 1e-300) {
    ka = (say * sbb - sby * sab) / det;
    kb = (sby * saa - say * sab) / det;
  }
  if (ka < 0 || kb < 0) {  // clamp to the better single-regressor fit
    double ka1 = saa > 0 ? std::max(0.0, say / saa) : 0.0;
    double kb1 = sbb > 0 ? std::max(0.0, sby / sbb) : 0.0;
    if (resid(ka1, 0.0) <= resid(0.0, kb1)) {
      ka = ka1;
      kb = 0;
    } else {
      ka = 0;
      kb = kb1;
    }
  }
  ScalingFit fit{ka, kb, resid(ka, kb)};
  double inflate = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = ka * a[i] + kb * b[i];
    if (pred > 0)
      inflate = std::max(inflate, sups[i] / pred);
    else if (sups[i] > 0)
      fit.rel_residual = 1.0;  // nothing fitted at all; flag as total misfit
  }
  fit.k_lin *= inflate;
  fit.k_mod *= inflate;
  return fit;
}

// Evaluate the fitted law at a new scale.
inline double defect_scale_bound(const ScalingFit& fit, double d, int kappa,
                                 const UbConstants& ub) {
  double tau = choose_section_width(d);
  double mod = kappa == 1 ? g1_modulus(ub, tau).value : tau;
  return fit.k_lin * d + fit.k_mod * mod;
}

}  // namespace islab
