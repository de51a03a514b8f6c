#pragma once

#include <string>
#include <vector>

#include "islab/flow_engine.hpp"

namespace islab {

// Snapshot of the linearized data at one integer time along an orbit:
// the point p_k, the field there, the derivative A_k of the time-1 map,
// the orthogonal projection P_k along the field, an orthonormal basis E_k
// of the normal space, and the reduced map B_k into the next normal space.
struct OrbitFrame {
  int k = 0;
  Vec p;
  Vec X;
  Mat A;  // derivative of the time-1 map at p_k
  Mat P;  // I - unit(X) unit(X)^T
  Mat E;  // n x (n-1), orthonormal, E^T X = 0
  Mat B;  // (n-1) x (n-1), E_{k+1}^T A_k E_k; empty for the last frame
};

namespace detail {

// Orthonormal basis of the hyperplane orthogonal to x, by the Householder
// reflection that sends unit(x) to a signed coordinate axis.  Pivot and sign
// are chosen deterministically (largest-magnitude component, lowest index on
// ties) so repeated runs and neighbouring frames get reproducible bases.
inline Mat householder_complement(const Vec& x) {
  const int n = static_cast<int>(x.size());
  Vec u = x / x.norm();
  int pivot = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(u[i]) > std::abs(u[pivot])) pivot = i;
  double sign = u[pivot] >= 0 ? 1.0 : -1.0;
  Vec w = u;
  w[pivot] += sign;
  Mat H = Mat::Identity(n, n) - (2.0 / w.squaredNorm()) * (w * w.transpose());
  // columns of H other than `pivot` are orthonormal and orthogonal to x
  Mat E(n, n - 1);
  int c = 0;
  for (int j = 0; j < n; ++j)
    if (j != pivot) E.col(c++) = H.col(j);
  return E;
}

}  // namespace detail

// Frames at k in [-N, N] along the orbit of p.  A_k comes from the joint
// variational integration of the unit-time map, so the transport identity
// A_k X(p_k) = X(p_{k+1}) is inherited from the integrator, not imposed.
inline std::vector<OrbitFrame> sample_orbit_frames(const FlowEngine& engine,
                                                   const Vec& p, int N) {
  if (N < 1) throw PreconditionError("sample_orbit_frames: N must be >= 1");
  const auto& field = engine.field();
  const int n = engine.dim();
  const double x_floor = field.nonsingular_margin() / 2;

  // The |X| floor is checked as each point is produced (base, then forward,
  // then backward), so an orbit drifting toward a rest point is refused at
  // the first offending point instead of being integrated through it.
  std::vector<Vec> points(2 * N + 1);
  auto guard = [&](const Vec& q, int k) {
    double speed = field(q).norm();
    if (speed < x_floor)
      throw PreconditionError(
          "sample_orbit_frames: |X| = " + std::to_string(speed) + " at k=" +
          std::to_string(k) + " is below half the nonsingular margin " +
          "(orbit passes near a rest point)");
  };
  points[N] = canonicalize(engine.space(), p);
  guard(points[N], 0);
  for (int k = 0; k < N; ++k) {
    points[N + k + 1] = engine.flow(1.0, points[N + k]);
    guard(points[N + k + 1], k + 1);
  }
  for (int k = 0; k > -N; --k) {
    points[N + k - 1] = engine.flow(-1.0, points[N + k]);
    guard(points[N + k - 1], k - 1);
  }

  std::vector<OrbitFrame> frames(2 * N + 1);
  for (int i = 0; i <= 2 * N; ++i) {
    OrbitFrame& fr = frames[i];
    fr.k = i - N;
    fr.p = points[i];
    fr.X = field(fr.p);
    fr.A = engine.flow_with_jacobian(1.0, fr.p).jac;
    Vec unit = fr.X / fr.X.norm();
    fr.P = Mat::Identity(n, n) - unit * unit.transpose();
    fr.E = detail::householder_complement(fr.X);
  }
  for (int i = 0; i + 1 <= 2 * N; ++i)
    frames[i].B = frames[i + 1].E.transpose() * frames[i].A * frames[i].E;
  return frames;
}

struct FrameIdentityReport {
  double field_transport_error = 0;  // max_k |A_k X_k - X_{k+1}| / |X_{k+1}|
  double projection_error = 0;       // max_k |P_{k+1}A_k - P_{k+1}A_kP_k| / |A_k|
};

// The two linear-algebra identities the reduction to normal coordinates
// rests on.  Both are basis-free (E_k never enters).
inline FrameIdentityReport check_frame_identities(const std::vector<OrbitFrame>& frames) {
  FrameIdentityReport rep;
  for (size_t i = 0; i + 1 < frames.size(); ++i) {
    const OrbitFrame& a = frames[i];
    const OrbitFrame& b = frames[i + 1];
    double transport = (a.A * a.X - b.X).norm() / b.X.norm();
    double proj = (b.P * a.A - b.P * a.A * a.P).norm() / a.A.norm();
    rep.field_transport_error = std::max(rep.field_transport_error, transport);
    rep.projection_error = std::max(rep.projection_error, proj);
  }
  return rep;
}

}  // namespace islab
