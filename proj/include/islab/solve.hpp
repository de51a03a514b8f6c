#pragma once

#include <Eigen/QR>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "islab/frames.hpp"

namespace islab {

// Bounded inhomogeneity along a frame window, one vector per k in [-N, N].
// Full-space entries drive the (x, s) system; normal entries lie in the
// normal space V_k at each frame.  The k = -N entry is stored for indexing
// symmetry but the recursions only consume k > -N.
struct InhomSeq {
  enum class Kind { full, normal };
  Kind kind = Kind::full;
  std::vector<Vec> entries;
};

struct BoundedSolveResult {
  std::vector<Vec> x;       // ambient solution vectors, k in [-N, N]
  std::vector<double> s;    // time shifts, k in [-N, N-1]; empty for normal solves
  double sup_norm = 0;      // max_k |x_k|, Euclidean
  double sup_norm_inf = 0;  // the same in the max norm, recorded for reference
  double residual = 0;      // worst constraint violation
  bool rank_ok = true;      // stacked constraints independent (full row rank)
  bool projected_inhomogeneity = false;  // normal solve had to project b_k
  std::string solver = "least-squares";
};

namespace detail {

inline void check_inhom(const InhomSeq& seq, InhomSeq::Kind kind, size_t count) {
  if (seq.kind != kind) throw PreconditionError("inhomogeneity has the wrong kind");
  if (seq.entries.size() != count)
    throw PreconditionError("inhomogeneity covers " + std::to_string(seq.entries.size()) +
                            " frames, window has " + std::to_string(count));
  for (const Vec& e : seq.entries)
    if (e.norm() > 1.0 + 1e-12)
      throw PreconditionError("inhomogeneity entry exceeds the unit bound: |entry| = " +
                              std::to_string(e.norm()));
}

inline void finish_norms(BoundedSolveResult& res) {
  for (const Vec& xk : res.x) {
    res.sup_norm = std::max(res.sup_norm, xk.norm());
    res.sup_norm_inf = std::max(res.sup_norm_inf, xk.cwiseAbs().maxCoeff());
  }
}

}  // namespace detail

// Minimal-quadratic-norm solution of v_{i+1} = B_i v_i + beta_{i+1} over the
// whole window, i = 0 .. 2N-1 (i = k + N).  The recursion always has
// solutions (propagate any v_0), so the quadratic-minimal one is the
// minimum-norm solution of the stacked underdetermined constraint system,
// which a complete orthogonal decomposition delivers directly.  Crucially
// the stacked matrix only ever holds single-step blocks B_i — eliminating
// variables by propagation instead would scale roundoff by the product of
// all expansion factors across the window, which is astronomical for
// hyperbolic frames.
inline BoundedSolveResult solve_normal_coords(const std::vector<Mat>& B,
                                              const std::vector<Vec>& beta) {
  if (beta.size() != B.size() + 1)
    throw PreconditionError("solve_normal_coords: need one inhomogeneity per frame");
  const int m = B.empty() ? static_cast<int>(beta.front().size())
                          : static_cast<int>(B.front().cols());
  const size_t count = beta.size();
  const size_t steps = count - 1;
  Mat C = Mat::Zero(steps * m, count * m);
  Vec h(steps * m);
  for (size_t i = 0; i < steps; ++i) {
    C.block(i * m, i * m, m, m) = -B[i];
    C.block(i * m, (i + 1) * m, m, m) = Mat::Identity(m, m);
    h.segment(i * m, m) = beta[i + 1];
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(C);
  Vec w = cod.solve(h);

  BoundedSolveResult res;
  res.rank_ok = cod.rank() == static_cast<Eigen::Index>(steps * m);
  res.x.resize(count);
  for (size_t i = 0; i < count; ++i) res.x[i] = w.segment(i * m, m);
  for (size_t i = 0; i < steps; ++i)
    res.residual = std::max(res.residual,
                            (res.x[i + 1] - B[i] * res.x[i] - beta[i + 1]).norm());
  detail::finish_norms(res);
  return res;
}

// Minimal-quadratic-norm solution of the full-window system
//   x_{k+1} = A_k x_k + X(p_{k+1}) s_k + z_{k+1},   k in [-N, N-1],
// minimizing sum |x_k|^2 + sum s_k^2.  All the x_k and s_k are unknowns of
// the stacked constraint system, which is underdetermined and always
// consistent, so the minimizer is its minimum-norm solution (complete
// orthogonal decomposition).  Same propagation-free layout as
// solve_normal_coords, for the same conditioning reason.
inline BoundedSolveResult solve_full_system(const std::vector<OrbitFrame>& frames,
                                            const InhomSeq& z) {
  const size_t count = frames.size();
  if (count < 2) throw PreconditionError("solve_full_system: window too small");
  detail::check_inhom(z, InhomSeq::Kind::full, count);
  const int n = static_cast<int>(frames.front().p.size());
  const int steps = static_cast<int>(count) - 1;  // number of s variables
  const int nw = static_cast<int>(count) * n + steps;  // x block, then s block

  Mat C = Mat::Zero(steps * n, nw);
  Vec h(steps * n);
  for (int i = 0; i < steps; ++i) {
    C.block(i * n, i * n, n, n) = -frames[i].A;
    C.block(i * n, (i + 1) * n, n, n) = Mat::Identity(n, n);
    C.block(i * n, static_cast<int>(count) * n + i, n, 1) = -frames[i + 1].X;
    h.segment(i * n, n) = z.entries[i + 1];
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(C);
  Vec w = cod.solve(h);

  BoundedSolveResult res;
  res.rank_ok = cod.rank() == steps * n;
  res.x.resize(count);
  for (size_t i = 0; i < count; ++i) res.x[i] = w.segment(i * n, n);
  res.s.assign(w.data() + count * n, w.data() + nw);
  for (int i = 0; i < steps; ++i)
    res.residual = std::max(
        res.residual, (res.x[i + 1] - frames[i].A * res.x[i] -
                       frames[i + 1].X * res.s[i] - z.entries[i + 1]).norm());
  detail::finish_norms(res);
  return res;
}

// Normal-system solve against frames: inhomogeneities are ambient vectors in
// the normal spaces; they are expressed in the E_k bases, solved in
// coordinates, and mapped back.  Entries that fail the in-V_k check by more
// than roundoff are projected and the result is flagged.
inline BoundedSolveResult solve_normal_system(const std::vector<OrbitFrame>& frames,
                                              const InhomSeq& b) {
  const size_t count = frames.size();
  if (count < 2) throw PreconditionError("solve_normal_system: window too small");
  detail::check_inhom(b, InhomSeq::Kind::normal, count);

  bool projected = false;
  std::vector<Vec> beta(count);
  for (size_t i = 0; i < count; ++i) {
    const Vec& bk = b.entries[i];
    if ((frames[i].P * bk - bk).norm() > 1e-9 * std::max(1.0, bk.norm())) projected = true;
    beta[i] = frames[i].E.transpose() * bk;
  }
  std::vector<Mat> B(count - 1);
  for (size_t i = 0; i + 1 < count; ++i) B[i] = frames[i].B;

  BoundedSolveResult res = solve_normal_coords(B, beta);
  res.projected_inhomogeneity = projected;
  for (size_t i = 0; i < count; ++i) res.x[i] = frames[i].E * res.x[i];
  return res;
}

// Projection of a full-system solution onto the normal spaces, and the check
// that it solves the normal system with the same inhomogeneity.  This is the
// reduction the normal system exists for; given the frame identities it is
// exact algebra, so a residual above tol means the frames are broken.
inline BoundedSolveResult reduce_full_to_normal(const std::vector<OrbitFrame>& frames,
                                                const BoundedSolveResult& full,
                                                const InhomSeq& b,
                                                double tol = 1e-9) {
  const size_t count = frames.size();
  if (full.x.size() != count)
    throw PreconditionError("reduce_full_to_normal: solution/frame size mismatch");
  detail::check_inhom(b, InhomSeq::Kind::normal, count);

  BoundedSolveResult res;
  res.solver = "projection";
  res.s = full.s;
  res.x.resize(count);
  for (size_t i = 0; i < count; ++i) res.x[i] = frames[i].P * full.x[i];
  for (size_t i = 0; i + 1 < count; ++i) {
    Vec w0 = frames[i].E.transpose() * res.x[i];
    Vec w1 = frames[i + 1].E.transpose() * res.x[i + 1];
    Vec bt = frames[i + 1].E.transpose() * b.entries[i + 1];
    res.residual = std::max(res.residual, (w1 - frames[i].B * w0 - bt).norm());
  }
  detail::finish_norms(res);
  if (res.residual > tol) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "reduction identity failure: residual %.3g exceeds %.3g "
                  "(frame identities look broken)", res.residual, tol);
    throw Error(msg);
  }
  return res;
}

// Exhaustive reference for scalar normal systems: the solution is an affine
// function of the single free scalar; scan it on a dense grid, then refine
// with one exact parabolic step (the objective is a parabola, so the refined
// point is the true minimizer up to roundoff).
struct ScalarOracleResult {
  double sup_norm = 0;
  double free_value = 0;   // the minimizing v at the window start
  double objective = 0;    // sum of squares at the minimizer
};

inline ScalarOracleResult solve_scalar_oracle(const std::vector<double>& B,
                                              const std::vector<double>& beta,
                                              int grid = 100000) {
  if (beta.size() != B.size() + 1)
    throw PreconditionError("solve_scalar_oracle: need one inhomogeneity per frame");
  const size_t count = beta.size();
  std::vector<double> phi(count), psi(count);
  phi[0] = 1;
  psi[0] = 0;
  for (size_t i = 0; i + 1 < count; ++i) {
    phi[i + 1] = B[i] * phi[i];
    psi[i + 1] = B[i] * psi[i] + beta[i + 1];
  }
  auto objective = [&](double v0) {
    double q = 0;
    for (size_t i = 0; i < count; ++i) {
      double vi = phi[i] * v0 + psi[i];
      q += vi * vi;
    }
    return q;
  };
  double scale = 0, minphi = std::abs(phi[0]);
  for (size_t i = 0; i < count; ++i) {
    scale = std::max(scale, std::abs(psi[i]));
    minphi = std::min(minphi, std::abs(phi[i]));
  }
  double span = std::min(1e9, 10.0 * (1.0 + scale) / std::max(minphi, 1e-12));
  int best = 0;
  double best_q = std::numeric_limits<double>::infinity();
  for (int g = 0; g < grid; ++g) {
    double v0 = -span + 2 * span * g / (grid - 1);
    double q = objective(v0);
    if (q < best_q) {
      best_q = q;
      best = g;
    }
  }
  double xa = -span + 2 * span * (best - 1) / (grid - 1);
  double xb = -span + 2 * span * best / (grid - 1);
  double xc = -span + 2 * span * (best + 1) / (grid - 1);
  double qa = objective(xa), qb = objective(xb), qc = objective(xc);
  // vertex of the parabola through the three samples
  double denom = (xb - xa) * (qb - qc) - (xb - xc) * (qb - qa);
  double v_star = xb;
  if (denom != 0)
    v_star = xb - 0.5 * ((xb - xa) * (xb - xa) * (qb - qc) -
                         (xb - xc) * (xb - xc) * (qb - qa)) / denom;

  ScalarOracleResult res;
  res.free_value = v_star;
  res.objective = objective(v_star);
  for (size_t i = 0; i < count; ++i)
    res.sup_norm = std::max(res.sup_norm, std::abs(phi[i] * v_star + psi[i]));
  return res;
}

// Named inhomogeneity patterns used throughout the tests and the driver.
inline InhomSeq inhom_zero(size_t count, int n, InhomSeq::Kind kind) {
  InhomSeq seq;
  seq.kind = kind;
  seq.entries.assign(count, Vec::Zero(n));
  return seq;
}

// unit vector in V_k with equal E-coordinates: the "push the same way at
// every step" pattern that realizes geometric accumulation
inline InhomSeq inhom_constant_normal(const std::vector<OrbitFrame>& frames) {
  InhomSeq seq;
  seq.kind = InhomSeq::Kind::normal;
  const int m = static_cast<int>(frames.front().E.cols());
  Vec coord = Vec::Constant(m, 1.0 / std::sqrt(double(m)));
  for (const auto& fr : frames) seq.entries.push_back(fr.E * coord);
  return seq;
}

inline InhomSeq inhom_random_normal(const std::vector<OrbitFrame>& frames,
                                    std::uint64_t seed) {
  InhomSeq seq;
  seq.kind = InhomSeq::Kind::normal;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const int m = static_cast<int>(frames.front().E.cols());
  for (const auto& fr : frames) {
    Vec coord(m);
    do {
      for (int i = 0; i < m; ++i) coord[i] = gauss(rng);
    } while (coord.norm() < 1e-9);
    seq.entries.push_back(fr.E * (coord / coord.norm()));
  }
  return seq;
}

inline InhomSeq inhom_random_full(size_t count, int n, std::uint64_t seed) {
  InhomSeq seq;
  seq.kind = InhomSeq::Kind::full;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (size_t k = 0; k < count; ++k) {
    Vec z(n);
    do {
      for (int i = 0; i < n; ++i) z[i] = gauss(rng);
    } while (z.norm() < 1e-9);
    seq.entries.push_back(z / z.norm());
  }
  return seq;
}

}  // namespace islab
