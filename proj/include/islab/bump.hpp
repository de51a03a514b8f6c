#pragma once

#include <algorithm>
#include <cmath>

#include "islab/errors.hpp"
#include "islab/geometry.hpp"

namespace islab {

// Quintic smoothstep: 0 below u=0, 1 above u=1, u^3(10-15u+6u^2) between.
// First and second derivatives vanish at both seams, so anything built from
// it is C^2 across the clamp boundaries.
inline double smoothstep5(double u) {
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

// Cutoff profile on [-tau, tau] x [0, r]: zero on the entering edge t = -tau
// and on the outer shell s = r, identically one on [-tau/2, tau] x [0, r/2],
// strictly between zero and one elsewhere in the domain.  Product of two
// smoothsteps, one per axis.
class BumpGamma {
 public:
  BumpGamma(double tau, double r) : tau_(tau), r_(r) {
    if (!(tau > 0) || !(r > 0))
      throw PreconditionError("BumpGamma: tau and r must be positive");
    if (!(100.0 * tau < 1.0 - tau))
      throw PreconditionError("BumpGamma: section half-width too large, need 100*tau < 1 - tau");
  }

  double tau() const { return tau_; }
  double r() const { return r_; }

  // gamma(t, s); t is time within the section, s a distance from the center
  double operator()(double t, double s) const {
    if (t < -tau_ - kEdgeSlack * tau_ || t > tau_ + kEdgeSlack * tau_)
      throw PreconditionError("gamma: time argument outside [-tau, tau]");
    if (s < -kEdgeSlack * r_ || s > r_ + kEdgeSlack * r_)
      throw PreconditionError("gamma: distance argument outside [0, r]");
    return value_clamped(t, s);
  }

  // Same surface extended by its constant values outside the domain; this is
  // what the blend uses, so states straying past r by roundoff just get
  // weight zero instead of an error.
  double value_clamped(double t, double s) const {
    double ft = smoothstep5((t + tau_) / (tau_ / 2));
    double fs = smoothstep5((r_ - s) / (r_ / 2));
    return ft * fs;
  }

 private:
  static constexpr double kEdgeSlack = 1e-9;  // relative, absorbs roundoff at the seams
  double tau_;
  double r_;
};

// Convex blend of a section target x and a flowed state y with weight
// gamma(s, |v|): full weight on x deep in the ball and past mid-section,
// none at the section entrance or at the shell.  Being convex it satisfies
// |blend - z| <= |x - z| + |y - z| for every z.
inline Vec bump_mix(const BumpGamma& b, const Vec& x, const Vec& y,
                    const Vec& v, double s) {
  double t = std::clamp(s, -b.tau(), b.tau());
  double w = b.value_clamped(t, v.norm());
  return w * x + (1.0 - w) * y;
}

}  // namespace islab
