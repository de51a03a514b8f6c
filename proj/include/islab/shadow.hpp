#pragma once

// Shadowing of true orbits by method trajectories, and the replay of a shadow
// against the method's own anchor recursion.  A shadow is a start point close
// to a reference orbit together with a reparametrization whose slopes stay in
// a narrow band around one; replaying it samples the method at the
// reparametrized section times and checks that the recorded deviations
// satisfy, exactly, the affine one-step recursion the sections were built
// from.  The search for a shadow is a budgeted coordinate descent and may
// come back empty-handed; that outcome is reported, not thrown.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "islab/method.hpp"
#include "islab/reparam.hpp"

namespace islab {

// ---------------------------------------------------------------------------
// replay feasibility

// Widest reparametrization slope band for which every section shift
// beta(j) - j, j = 0..2N, is guaranteed to stay inside the blending plateau
// [-tau/2, tau/2]: band * 2N <= tau/2.
inline double replay_band_limit(const DMethod& inst) {
  return inst.tau() / (4.0 * inst.N());
}

// Largest |slope - 1| of beta over segments meeting [t_lo, t_hi].
inline double reparam_band(const Reparam& beta, double t_lo, double t_hi) {
  if (!(t_hi > t_lo)) throw PreconditionError("reparam_band: empty interval");
  double band = 0.0;
  const auto& kn = beta.knots();
  for (size_t i = 0; i + 1 < kn.size(); ++i) {
    if (kn[i + 1] <= t_lo || kn[i] >= t_hi) continue;
    band = std::max(band, std::abs(beta.slope(i) - 1.0));
  }
  // outside the knot range the terminal slopes continue
  if (kn.front() > t_lo) band = std::max(band, std::abs(beta.slope(0) - 1.0));
  if (kn.back() < t_hi)
    band = std::max(band, std::abs(beta.slope(beta.segment_count() - 1) - 1.0));
  return band;
}

// ---------------------------------------------------------------------------
// replay of a shadow through the section recursion

// Everything sampled at the section times of one shadow, indexed j = k + N,
// j = 0..2N.  Two deviations are recorded per section: W[j] is the state at
// the integer time j minus the anchor, while w[j] is the state at the
// reparametrized time beta(j) minus the anchor, scaled by 1/d.  They differ
// by the field-direction slide sigma[j] * X_hat; the recursion checks below
// are algebra over exactly these quantities.
struct ShadowReplayReport {
  double d = 0.0;
  double tau = 0.0;
  int N = 0;
  Vec shadow;                  // replayed start point
  Vec v;                       // its chart offset from the method base
  Reparam beta = Reparam({0.0, 1.0}, {0.0, 1.0});
  std::vector<double> sigma;   // sigma[j] = beta(j) - j
  std::vector<double> s;       // sigma / d
  std::vector<Vec> y;          // state at time beta(j)
  std::vector<Vec> W;          // state at time j, minus anchor j
  std::vector<Vec> w;          // (y[j] - anchor j) / d
  double band = 0.0;           // slope band of beta over [0, 2N]
  double band_limit = 0.0;     // replay_band_limit of the instance
  bool gamma_regime = false;   // all shifts inside the plateau, |v| <= r/2
  std::string regime_note;
  double k5 = 0.0;             // anchor drift ratio of the instance, see below
};

// Largest distance between the kicked anchors and the true orbit of the base
// point at integer times, in units of d.
inline double anchor_drift_ratio(const DMethod& inst) {
  const FlowEngine& eng = inst.engine();
  const Space& sp = eng.space();
  Vec q = inst.base();
  double worst = 0.0;
  for (int j = 1; j <= 2 * inst.N(); ++j) {
    q = eng.flow(1.0, q);
    worst = std::max(worst, distance(sp, inst.p_tilde(j - inst.N()), q));
  }
  return worst / inst.d();
}

// Samples one shadow (start point + reparametrization) through the moving
// instance.  The slope band of beta is checked against replay_band_limit up
// front: a wider band cannot keep every section shift inside the plateau, and
// the replay would silently leave the regime the recursion is exact in.
inline ShadowReplayReport replay_shadow(const DMethod& inst, const Vec& shadow,
                                        const Reparam& beta) {
  if (inst.kappa() != 1)
    throw PreconditionError("replay_shadow: needs a moving instance (kappa = 1)");
  const FlowEngine& eng = inst.engine();
  const Space& sp = eng.space();
  const int last = 2 * inst.N();
  if (beta.knots().front() > 0.0 || beta.knots().back() < static_cast<double>(last))
    throw PreconditionError("replay_shadow: beta must cover [0, 2N] with knots");

  ShadowReplayReport rep;
  rep.d = inst.d();
  rep.tau = inst.tau();
  rep.N = inst.N();
  rep.beta = beta;
  rep.shadow = canonicalize(sp, shadow);
  if (distance(sp, rep.shadow, inst.base()) >= inst.r())
    throw PreconditionError("replay_shadow: start point outside the method ball");
  rep.v = chart_log(sp, inst.base(), rep.shadow);

  rep.band = reparam_band(beta, 0.0, static_cast<double>(last));
  rep.band_limit = replay_band_limit(inst);
  if (rep.band > rep.band_limit * (1.0 + 1e-9)) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "replay_shadow: slope band %.3g exceeds tau/(4N) = %.3g; "
                  "section shifts could leave the plateau", rep.band,
                  rep.band_limit);
    throw PreconditionError(msg);
  }

  rep.sigma.resize(last + 1);
  rep.s.resize(last + 1);
  rep.y.resize(last + 1);
  rep.W.resize(last + 1);
  rep.w.resize(last + 1);
  auto sw = inst.start(rep.shadow);
  for (int j = 0; j <= last; ++j) {
    double u = beta(static_cast<double>(j));
    rep.sigma[j] = u - j;
    rep.s[j] = rep.sigma[j] / rep.d;
    rep.y[j] = inst.eval(u, sw);
    int k = j - inst.N();
    rep.W[j] = chart_log(sp, inst.p_hat(k), inst.eval(static_cast<double>(j), sw));
    rep.w[j] = chart_log(sp, inst.p_hat(k), rep.y[j]) / rep.d;
  }

  rep.gamma_regime = true;
  char note[160];
  if (rep.v.norm() > inst.r() / 2) {
    rep.gamma_regime = false;
    std::snprintf(note, sizeof note,
                  "start offset |v| = %.3g outside the radial plateau r/2 = %.3g",
                  rep.v.norm(), inst.r() / 2);
    rep.regime_note = note;
  } else if (std::abs(rep.sigma[0]) > 1e-12) {
    rep.gamma_regime = false;
    std::snprintf(note, sizeof note,
                  "reparametrization does not fix time zero: beta(0) = %.3g",
                  beta(0.0));
    rep.regime_note = note;
  } else {
    for (int j = 1; j <= last; ++j) {
      if (std::abs(rep.sigma[j]) > rep.tau / 2 * (1.0 + 1e-9)) {
        rep.gamma_regime = false;
        std::snprintf(note, sizeof note,
                      "section shift at k = %d: |beta(%d) - %d| = %.3g exceeds "
                      "tau/2 = %.3g", j - inst.N(), j, j,
                      std::abs(rep.sigma[j]), rep.tau / 2);
        rep.regime_note = note;
        break;
      }
    }
  }

  rep.k5 = anchor_drift_ratio(inst);
  return rep;
}

// ---------------------------------------------------------------------------
// recursion check

// Residuals of the one-step anchor recursion over a replay.  Let Y[j] be the
// unscaled deviation d * w[j].  Inside the plateau every section value is the
// anchor plus an affine image of the previous integer-time deviation, so
//
//   Y[j+1] = A_j * (Y[j] - sigma[j] X_hat[j] - d z[j]) + sigma[j+1] X_hat[j+1]
//            + d z[j+1]
//
// holds exactly (the j = 0 step carries no kick: the base anchor is never
// kicked).  `residual` is the largest violation of this identity; it is pure
// arithmetic over the report, so nudging one y[j] by eps moves it by about
// eps.  `residual_plain` drops the transported slide-and-kick term
// A_j * (sigma[j] X_hat[j] + d z[j]); that shorter form is exact only on the
// first step, and its size records how much the carry matters on this replay.
struct ReplayCheck {
  bool aborted = false;
  std::string diagnostic;
  double residual = std::numeric_limits<double>::infinity();
  double residual_plain = std::numeric_limits<double>::infinity();
};

inline ReplayCheck verify_replay(const DMethod& inst, const ShadowReplayReport& rep) {
  if (inst.kappa() != 1)
    throw PreconditionError("verify_replay: needs a moving instance (kappa = 1)");
  const int last = 2 * inst.N();
  if (rep.N != inst.N() || rep.d != inst.d() ||
      rep.y.size() != static_cast<size_t>(last + 1))
    throw PreconditionError("verify_replay: report does not match the instance");
  const Space& sp = inst.engine().space();

  ReplayCheck out;
  char msg[160];
  if (rep.v.norm() > inst.r() / 2 * (1.0 + 1e-9)) {
    out.aborted = true;
    std::snprintf(msg, sizeof msg,
                  "aborted: start offset |v| = %.3g outside the radial plateau "
                  "r/2 = %.3g", rep.v.norm(), inst.r() / 2);
    out.diagnostic = msg;
    return out;
  }
  if (std::abs(rep.sigma[0]) > 1e-12) {
    out.aborted = true;
    std::snprintf(msg, sizeof msg,
                  "aborted: time zero not fixed, sigma[0] = %.3g", rep.sigma[0]);
    out.diagnostic = msg;
    return out;
  }
  for (int j = 1; j <= last; ++j) {
    if (std::abs(rep.sigma[j]) > rep.tau / 2 * (1.0 + 1e-9)) {
      out.aborted = true;
      std::snprintf(msg, sizeof msg,
                    "aborted: section shift at k = %d is %.3g, past tau/2 = %.3g",
                    j - inst.N(), std::abs(rep.sigma[j]), rep.tau / 2);
      out.diagnostic = msg;
      return out;
    }
  }

  const auto& z = inst.config().z;
  double worst = 0.0, worst_plain = 0.0;
  for (int j = 0; j < last; ++j) {
    int k = j - inst.N();
    Vec Yj = chart_log(sp, inst.p_hat(k), rep.y[j]);
    Vec Yn = chart_log(sp, inst.p_hat(k + 1), rep.y[j + 1]);
    Vec slide = rep.sigma[j] * inst.X_hat(k);
    if (j >= 1) slide += rep.d * z[j];
    Vec step = inst.A_tilde(k) * (Yj - slide) + rep.sigma[j + 1] * inst.X_hat(k + 1) +
               rep.d * z[j + 1];
    Vec plain = inst.A_tilde(k) * Yj + rep.sigma[j + 1] * inst.X_hat(k + 1) +
                rep.d * z[j + 1];
    worst = std::max(worst, (Yn - step).norm());
    worst_plain = std::max(worst_plain, (Yn - plain).norm());
  }
  out.residual = worst;
  out.residual_plain = worst_plain;
  return out;
}

// ---------------------------------------------------------------------------
// anchor drift across a ladder of instances

// Drift ratios for the same kicks at several values of d.  The ratio should
// be flat in d: the fitted constant is the largest ratio, and the variation
// (max - min) / max says how far the rungs spread.
struct DriftLadder {
  std::vector<double> d;
  std::vector<double> ratio;
  double k5 = 0.0;
  double variation = 0.0;
};

inline DriftLadder anchor_drift_ladder(const FlowEngine& eng, MethodConfig proto,
                                       const std::vector<double>& ds,
                                       const UbConstants* ub = nullptr) {
  if (ds.empty()) throw PreconditionError("anchor_drift_ladder: empty ladder");
  DriftLadder out;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double d : ds) {
    proto.d = d;
    DMethod inst(eng, proto, ub);
    double rho = anchor_drift_ratio(inst);
    out.d.push_back(d);
    out.ratio.push_back(rho);
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
  }
  out.k5 = hi;
  out.variation = hi > 0.0 ? (hi - lo) / hi : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// shadow search

struct ShadowBudget {
  int rounds = 10;
  int samples_per_unit = 4;    // tracking grid density on the time axis
  int point_passes = 2;        // coordinate sweeps over the start point per round
  double point_step = 0.0;     // initial stencil half-width; 0 picks r/16
  bool clamp_gamma_band = false;  // keep every beta(j) within tau/2 of j
  double stop_margin = 0.98;   // stop once sup < margin * threshold
};

struct ShadowResult {
  bool found = false;
  Vec shadow;               // best start point
  Vec v;                    // its chart offset from the reference point
  Reparam beta = Reparam({0.0, 1.0}, {0.0, 1.0});
  double sup = std::numeric_limits<double>::infinity();
  double threshold = 0.0;   // acceptance level the search was run against
  int evals = 0;            // method trajectory evaluations spent
  std::string note;         // diagnosis when nothing acceptable was found
};

// Budgeted search for a start point and reparametrization tracking the true
// orbit of p through the instance: minimizes the largest sampled distance
// between flow(t, p) and the method state at time beta(t) over start points
// within 0.9 r of p and piecewise linear beta with unit knot spacing and
// slopes within [1 - threshold, 1 + threshold].  Coordinate descent:
// stencil-with-parabolic-refinement moves of the start point alternate with
// per-knot golden-section sweeps (a knot only affects the two adjacent
// segments, so those sweeps reuse the cached distances elsewhere).  Finding
// nothing below the threshold is an ordinary outcome and lands in `note`.
inline ShadowResult shadow_search(const DMethod& inst, const Vec& p, double threshold,
                                  const ShadowBudget& budget = {}) {
  if (!(threshold > 0.0) || threshold >= 0.5)
    throw PreconditionError("shadow_search: threshold must lie in (0, 0.5)");
  if (budget.rounds < 1 || budget.samples_per_unit < 2 || budget.point_passes < 1)
    throw PreconditionError("shadow_search: degenerate budget");
  const FlowEngine& eng = inst.engine();
  const Space& sp = eng.space();
  const int n = eng.dim();
  const int last = 2 * inst.N();
  const int spu = budget.samples_per_unit;

  // reference orbit on the sampling grid, chained once
  std::vector<double> ts;
  for (int j = 0; j < last; ++j)
    for (int q = 0; q < spu; ++q) ts.push_back(j + static_cast<double>(q) / spu);
  ts.push_back(static_cast<double>(last));
  std::vector<Vec> orbit(ts.size());
  orbit[0] = canonicalize(sp, p);
  for (size_t i = 1; i < ts.size(); ++i)
    orbit[i] = eng.flow(ts[i] - ts[i - 1], orbit[i - 1]);

  Vec vhat = Vec::Zero(n);
  std::vector<double> b(last + 1);
  for (int j = 0; j <= last; ++j) b[j] = j;
  auto beta_at = [&](double t) {
    int j = std::clamp(static_cast<int>(std::floor(t)), 0, last - 1);
    return b[j] + (b[j + 1] - b[j]) * (t - j);
  };

  int evals = 0;
  std::vector<double> dist(ts.size(), 0.0);
  // full objective pass; refreshes the per-sample distance cache
  auto eval_all = [&]() {
    Vec start = chart_exp(sp, orbit[0], vhat);
    auto sw = inst.start(start);
    double worst = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
      dist[i] = distance(sp, orbit[i], inst.eval(beta_at(ts[i]), sw));
      worst = std::max(worst, dist[i]);
      ++evals;
    }
    return worst;
  };

  double cur = eval_all();
  double best = cur;
  Vec best_v = vhat;
  std::vector<double> best_b = b;
  double step = budget.point_step > 0.0 ? budget.point_step : inst.r() / 16.0;
  const double vcap = 0.9 * inst.r();
  const double gold = 0.5 * (3.0 - std::sqrt(5.0));

  for (int round = 0; round < budget.rounds && best >= budget.stop_margin * threshold;
       ++round) {
    // start point: per-coordinate stencil with a parabolic vertex try
    for (int pass = 0; pass < budget.point_passes; ++pass) {
      bool moved = false;
      for (int i = 0; i < n; ++i) {
        double c0 = vhat[i];
        double f0 = cur;
        vhat[i] = c0 + step;
        if (vhat.norm() > vcap) vhat *= vcap / vhat.norm();
        double fp = eval_all();
        double cp = vhat[i];
        vhat[i] = c0 - step;
        if (vhat.norm() > vcap) vhat *= vcap / vhat.norm();
        double fm = eval_all();
        double cm = vhat[i];
        // vertex of the parabola through the three samples, kept inside them
        double denom = (fp - 2.0 * f0 + fm);
        double cbest = f0 <= fp && f0 <= fm ? c0 : (fp < fm ? cp : cm);
        double fbest = std::min(f0, std::min(fp, fm));
        if (denom > 1e-30) {
          double cv = c0 + 0.5 * step * (fm - fp) / denom;
          cv = std::clamp(cv, std::min(cm, cp), std::max(cm, cp));
          vhat[i] = cv;
          if (vhat.norm() > vcap) vhat *= vcap / vhat.norm();
          double fv = eval_all();
          if (fv < fbest) { fbest = fv; cbest = vhat[i]; }
        }
        vhat[i] = cbest;
        if (fbest < f0 - 1e-15) moved = true;
        cur = eval_all();
      }
      if (!moved) { step *= 0.5; break; }
    }
    if (cur < best) { best = cur; best_v = vhat; best_b = b; }
    if (best < budget.stop_margin * threshold) break;

    // knot sweep, one shared trajectory cache per sweep
    Vec start = chart_exp(sp, orbit[0], vhat);
    auto sw = inst.start(start);
    for (int j = 1; j <= last; ++j) {
      double lo = b[j - 1] + (1.0 - threshold);
      double hi = b[j - 1] + (1.0 + threshold);
      if (j < last) {
        lo = std::max(lo, b[j + 1] - (1.0 + threshold));
        hi = std::min(hi, b[j + 1] - (1.0 - threshold));
      }
      if (budget.clamp_gamma_band) {
        lo = std::max(lo, j - inst.tau() / 2);
        hi = std::min(hi, j + inst.tau() / 2);
      }
      if (!(hi > lo)) continue;
      size_t w0 = ts.size(), w1 = 0;
      for (size_t i = 0; i < ts.size(); ++i)
        if (ts[i] > j - 1 && ts[i] < j + 1) { w0 = std::min(w0, i); w1 = i; }
      double outside = 0.0;
      for (size_t i = 0; i < ts.size(); ++i)
        if (i < w0 || i > w1) outside = std::max(outside, dist[i]);
      auto window_max = [&](double bj) {
        double saved = b[j];
        b[j] = bj;
        double m = outside;
        for (size_t i = w0; i <= w1; ++i) {
          m = std::max(m, distance(sp, orbit[i], inst.eval(beta_at(ts[i]), sw)));
          ++evals;
        }
        b[j] = saved;
        return m;
      };
      double x1 = lo + gold * (hi - lo), x2 = hi - gold * (hi - lo);
      double f1 = window_max(x1), f2 = window_max(x2);
      for (int it = 0; it < 10; ++it) {
        if (f1 <= f2) { hi = x2; x2 = x1; f2 = f1; x1 = lo + gold * (hi - lo); f1 = window_max(x1); }
        else          { lo = x1; x1 = x2; f1 = f2; x2 = hi - gold * (hi - lo); f2 = window_max(x2); }
      }
      double cand = f1 <= f2 ? x1 : x2;
      double fcand = std::min(f1, f2);
      if (fcand < cur - 1e-15) {
        b[j] = cand;
        for (size_t i = w0; i <= w1; ++i) {
          dist[i] = distance(sp, orbit[i], inst.eval(beta_at(ts[i]), sw));
          ++evals;
        }
        cur = *std::max_element(dist.begin(), dist.end());
      }
      if (cur < best) { best = cur; best_v = vhat; best_b = b; }
      if (best < budget.stop_margin * threshold) break;
    }
  }

  ShadowResult out;
  out.sup = best;
  out.threshold = threshold;
  out.evals = evals;
  out.v = best_v;
  out.shadow = chart_exp(sp, orbit[0], best_v);
  std::vector<double> knots(last + 1);
  for (int j = 0; j <= last; ++j) knots[j] = j;
  out.beta = Reparam(knots, best_b);
  out.found = best <= threshold;
  if (!out.found) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "inconclusive: tracking sup %.4g stayed above the threshold "
                  "%.4g after %d rounds", best, threshold, budget.rounds);
    out.note = msg;
  }
  return out;
}

}  // namespace islab
