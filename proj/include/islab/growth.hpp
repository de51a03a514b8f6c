#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "islab/solve.hpp"

namespace islab {

// How the minimal bounded-solution norm of the normal system responds to a
// widening window.  A plateau is the numerical face of uniform bounded
// solvability; linear growth in N is its failure mode.
struct GrowthRow {
  int N = 0;
  int trial = 0;  // 0 is the constant-normal pattern, >0 are random
  double sup_norm = 0;
};

struct GrowthReport {
  std::vector<GrowthRow> rows;
  std::vector<int> N_list;
  std::vector<double> max_sup;  // per N, max over trials
  std::string verdict;          // "bounded" | "growing" | "inconclusive"
  double slope = 0;             // least-squares slope of log(max_sup) vs log(N)
  double limit_estimate = 0;    // max_sup at the largest window
};

inline GrowthReport estimate_growth(const FlowEngine& engine, const Vec& p,
                                    const std::vector<int>& N_list, int trials,
                                    std::uint64_t seed) {
  if (N_list.empty()) throw PreconditionError("estimate_growth: empty N list");
  for (size_t i = 0; i + 1 < N_list.size(); ++i)
    if (N_list[i + 1] <= N_list[i])
      throw PreconditionError("estimate_growth: N list must be increasing");
  if (trials < 1) throw PreconditionError("estimate_growth: trials must be >= 1");

  GrowthReport rep;
  rep.N_list = N_list;
  for (int N : N_list) {
    auto frames = sample_orbit_frames(engine, p, N);
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
      InhomSeq b = t == 0 ? inhom_constant_normal(frames)
                          : inhom_random_normal(frames, seed + 1000003u * N + t);
      auto sol = solve_normal_system(frames, b);
      rep.rows.push_back({N, t, sol.sup_norm});
      worst = std::max(worst, sol.sup_norm);
    }
    rep.max_sup.push_back(worst);
  }
  rep.limit_estimate = rep.max_sup.back();

  // log-log slope over the whole ladder
  const size_t m = N_list.size();
  if (m >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < m; ++i) {
      double lx = std::log(double(N_list[i]));
      double ly = std::log(std::max(rep.max_sup[i], 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }

  if (m >= 2 && rep.max_sup.back() <= rep.max_sup[m - 2] * 1.01 &&
      rep.max_sup[m - 2] <= rep.max_sup.back() * 1.01) {
    rep.verdict = "bounded";
  } else if (rep.slope >= 0.9) {
    rep.verdict = "growing";
  } else {
    rep.verdict = "inconclusive";
  }
  return rep;
}

}  // namespace islab
