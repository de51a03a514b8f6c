#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "islab/errors.hpp"

namespace islab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Phase space: either R^n or the flat unit torus R^n / Z^n.  The torus carries
// the quotient metric; with unit periods the injectivity radius is 1/2 and
// exp/log are plain coordinate shifts with per-axis wrapping, so charts are
// exact (distortion factor 1).
enum class SpaceKind { euclidean, flat_torus };

struct Space {
  SpaceKind kind = SpaceKind::euclidean;
  int dim = 2;

  double injectivity_radius() const {
    return kind == SpaceKind::flat_torus ? 0.5
                                         : std::numeric_limits<double>::infinity();
  }
};

inline Space euclidean_space(int dim) { return Space{SpaceKind::euclidean, dim}; }
inline Space flat_torus(int dim) { return Space{SpaceKind::flat_torus, dim}; }

// Wrap a coordinate difference into (-1/2, 1/2].
inline double wrap_half(double u) {
  double w = u - std::floor(u + 0.5);
  if (w <= -0.5) w += 1.0;  // floor ties land on -1/2; pick the +1/2 branch
  return w;
}

// Map a point to its fundamental-domain representative ([0,1)^n on the torus).
inline Vec canonicalize(const Space& space, const Vec& x) {
  if (space.kind == SpaceKind::euclidean) return x;
  Vec y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double f = x[i] - std::floor(x[i]);
    if (f >= 1.0) f = 0.0;  // guard against floor rounding at exact integers
    y[i] = f;
  }
  return y;
}

inline double distance(const Space& space, const Vec& a, const Vec& b) {
  if (space.kind == SpaceKind::euclidean) return (a - b).norm();
  double sq = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double w = wrap_half(b[i] - a[i]);
    sq += w * w;
  }
  return std::sqrt(sq);
}

// log_x(y): tangent vector at x pointing to y.  On the torus the minimizing
// representative is unique only for distance < r1; we reject at >= r1.
inline Vec chart_log(const Space& space, const Vec& x, const Vec& y) {
  if (space.kind == SpaceKind::euclidean) return y - x;
  double dist = distance(space, x, y);
  if (dist >= space.injectivity_radius()) {
    std::ostringstream msg;
    msg << "chart_log: points at distance " << dist
        << " >= injectivity radius " << space.injectivity_radius();
    throw ChartError(msg.str());
  }
  Vec v(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) v[i] = wrap_half(y[i] - x[i]);
  return v;
}

// exp_x(v): shift and re-canonicalize.
inline Vec chart_exp(const Space& space, const Vec& x, const Vec& v) {
  return canonicalize(space, x + v);
}

}  // namespace islab
