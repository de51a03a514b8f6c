#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "islab/flow_engine.hpp"

namespace islab {

// Where and how densely to sample when estimating the uniform-bound
// constants.  Everything is deterministic given this struct; the struct is
// kept inside the result so a report always records its own grid.
struct SampleSpec {
  Box box;                   // empty: use the field's declared sample domain
  int grid_per_axis = 9;     // state grid for Q1..Q4
  int time_samples = 21;     // s-grid on [-1, 1]
  int directions = 8;        // unit directions for pair/remainder probes
  double pair_scale = 1e-3;  // separation used for Lipschitz ratios
  int g1_grid_per_axis = 5;  // coarser state grid for the remainder table
  std::vector<double> g1_buckets;  // empty: log-spaced 1e-4 .. 2
};

// Sampled suprema for the uniform bounds: Q1 bounds the space derivative of
// the time-s maps (|s| <= 1), Q2 the field, Q3 the chord speed
// |Phi(u,x)-x|/|u|, Q4 the finite-pair Lipschitz ratio of the time-s maps.
// g1_samples is the empirical modulus for the first-order Taylor remainder
//   | Phi(h1, x + h2) - x - h1 X(x) - h2 |  <=  g1(|h1| + |h2|),
// made monotone by isotonic post-processing.
struct UbConstants {
  double Q1 = 0, Q2 = 0, Q3 = 0, Q4 = 0;
  std::vector<std::pair<double, double>> g1_samples;  // (s, worst remainder)
  SampleSpec spec_used;
};

struct G1Query {
  double value = 0;
  bool extrapolated = false;  // above the sampled range: last-slope continuation
};

namespace detail {

// minimal nondecreasing majorant (running max).  The table entries are
// sampled suprema, i.e. lower estimates of the true modulus, so an isotonic
// fit that averages violators could cut below a measured remainder; the
// majorant keeps every measurement and stays a lower estimate of the truth.
inline void isotonic_nondecreasing(std::vector<double>& y) {
  double run = 0;
  for (double& v : y) {
    run = std::max(run, v);
    v = run;
  }
}

inline std::vector<Vec> grid_points(const Box& box, int per_axis) {
  const int n = static_cast<int>(box.size());
  std::vector<Vec> pts;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      double lo = box[i].first, hi = box[i].second;
      x[i] = per_axis == 1 ? 0.5 * (lo + hi)
                           : lo + (hi - lo) * idx[i] / double(per_axis - 1);
    }
    pts.push_back(x);
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[i] < per_axis) break;
      idx[i] = 0;
    }
    if (i == n) break;
  }
  return pts;
}

// fixed, seed-independent set of unit directions (deterministic reports)
inline std::vector<Vec> unit_directions(int n, int m) {
  std::vector<Vec> dirs;
  if (n == 1) {
    Vec d(1);
    d << 1.0;
    dirs.push_back(d);
    d << -1.0;
    dirs.push_back(d);
    return dirs;
  }
  if (n == 2) {
    for (int j = 0; j < m; ++j) {
      double a = 2 * M_PI * j / m;
      Vec d(2);
      d << std::cos(a), std::sin(a);
      dirs.push_back(d);
    }
    return dirs;
  }
  std::mt19937_64 rng(0x5eedu);
  std::normal_distribution<double> gauss;
  for (int j = 0; j < m; ++j) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = gauss(rng);
    dirs.push_back(d / d.norm());
  }
  return dirs;
}

}  // namespace detail

inline G1Query g1_modulus(const UbConstants& ub, double s) {
  if (s < 0) throw PreconditionError("g1_modulus: argument must be >= 0");
  if (s == 0 || ub.g1_samples.empty()) return {0.0, false};
  const auto& tab = ub.g1_samples;
  if (s <= tab.front().first) {
    // below the first bucket: chord from the exact origin value g1(0) = 0
    return {tab.front().second * s / tab.front().first, false};
  }
  for (size_t i = 0; i + 1 < tab.size(); ++i) {
    if (s <= tab[i + 1].first) {
      double w = (s - tab[i].first) / (tab[i + 1].first - tab[i].first);
      return {tab[i].second + w * (tab[i + 1].second - tab[i].second), false};
    }
  }
  // beyond the table: continue with the terminal slope
  double slope = 0;
  if (tab.size() >= 2) {
    const auto& a = tab[tab.size() - 2];
    const auto& b = tab.back();
    slope = (b.second - a.second) / (b.first - a.first);
  }
  return {tab.back().second + slope * (s - tab.back().first), true};
}

inline UbConstants estimate_ub_constants(const FlowEngine& engine,
                                         SampleSpec spec = {}) {
  const auto& field = engine.field();
  const Space& space = engine.space();
  if (spec.box.empty()) spec.box = field.sample_domain();
  if (spec.box.empty() || spec.grid_per_axis < 1 || spec.time_samples < 2)
    throw PreconditionError("estimate_ub_constants: empty sample");
  if (spec.g1_buckets.empty()) {
    // log-spaced arguments from 1e-4 to 2
    const int nb = 17;
    for (int i = 0; i < nb; ++i)
      spec.g1_buckets.push_back(1e-4 * std::pow(2e4, i / double(nb - 1)));
  }

  UbConstants ub;
  auto pts = detail::grid_points(spec.box, spec.grid_per_axis);
  auto dirs = detail::unit_directions(space.dim, spec.directions);

  std::vector<double> times;
  for (int i = 0; i < spec.time_samples; ++i)
    times.push_back(-1.0 + 2.0 * i / (spec.time_samples - 1));

  for (const Vec& x : pts) {
    ub.Q2 = std::max(ub.Q2, field(x).norm());
    auto jets = engine.flow_jet_many(x, times);
    for (size_t i = 0; i < times.size(); ++i) {
      double s = times[i];
      ub.Q1 = std::max(ub.Q1, jets[i].jac.jacobiSvd().singularValues()(0));
      if (s != 0.0)
        ub.Q3 = std::max(ub.Q3, distance(space, jets[i].x, canonicalize(space, x)) /
                                    std::abs(s));
    }
    // finite-pair Lipschitz ratios of the time-s maps
    for (const Vec& dir : dirs) {
      Vec y = canonicalize(space, x + spec.pair_scale * dir);
      auto jets_y = engine.flow_many(y, times);
      for (size_t i = 0; i < times.size(); ++i) {
        double num = distance(space, jets[i].x, jets_y[i]);
        ub.Q4 = std::max(ub.Q4, num / spec.pair_scale);
      }
    }
  }

  // first-order Taylor remainder table.  On the torus a sample only carries
  // local meaning if the whole excursion stays inside the chart at the base
  // point; |h1| Q2 + |h2| bounds the displacement, so configurations with
  // that sum at or beyond the injectivity radius are skipped (a wrapped-
  // around endpoint can land near the base again and fake a huge remainder).
  // Large buckets may thin out or drop entirely.
  auto g1_pts = detail::grid_points(spec.box, spec.g1_grid_per_axis);
  const double r1 = space.injectivity_radius();
  const double splits[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (double s : spec.g1_buckets) {
    double worst = 0;
    bool any = false;
    for (const Vec& x : g1_pts) {
      Vec xc = canonicalize(space, x);
      Vec xval = field(xc);
      for (double f : splits) {
        for (int sign : {+1, -1}) {
          double h1 = sign * f * s;
          double h2len = (1.0 - f) * s;
          if (f == 0.0 && sign < 0) continue;
          if (std::abs(h1) * ub.Q2 + h2len >= r1) continue;
          for (const Vec& dir : dirs) {
            Vec base = chart_exp(space, xc, h2len * dir);
            Vec moved = engine.flow(h1, base);
            Vec w = chart_log(space, xc, moved);
            double rem = (w - h1 * xval - h2len * dir).norm();
            worst = std::max(worst, rem);
            any = true;
            if (h2len == 0.0) break;  // direction is irrelevant
          }
        }
        if (f == 1.0) break;  // split f=1 covered by the sign loop already
      }
    }
    if (any) ub.g1_samples.emplace_back(s, worst);
  }
  std::vector<double> vals;
  for (auto& kv : ub.g1_samples) vals.push_back(kv.second);
  detail::isotonic_nondecreasing(vals);
  for (size_t i = 0; i < vals.size(); ++i) ub.g1_samples[i].second = vals[i];

  ub.spec_used = spec;
  return ub;
}

}  // namespace islab
