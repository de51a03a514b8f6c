#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "islab/errors.hpp"

namespace islab {

// Monotone piecewise-linear time change alpha with alpha(0) = 0, extended to
// all of R by extrapolating the terminal slopes.  With positive slopes it is
// an increasing homeomorphism R -> R, which is all the shadowing machinery
// asks of a reparametrization.
class Reparam {
 public:
  Reparam(std::vector<double> knots, std::vector<double> values)
      : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() != values_.size())
      throw PreconditionError("Reparam: knot/value count mismatch");
    if (knots_.size() < 2) throw PreconditionError("Reparam: need at least two knots");
    for (size_t i = 0; i + 1 < knots_.size(); ++i) {
      if (!(knots_[i + 1] > knots_[i]))
        throw PreconditionError("Reparam: knots must be strictly increasing");
      if (!(values_[i + 1] > values_[i]))
        throw PreconditionError("Reparam: values must be strictly increasing");
    }
    bool has_zero = false;
    for (size_t i = 0; i < knots_.size(); ++i) {
      if (knots_[i] == 0.0) {
        if (values_[i] != 0.0)
          throw PreconditionError("Reparam: alpha(0) must be exactly 0");
        has_zero = true;
      }
    }
    if (!has_zero) throw PreconditionError("Reparam: knot grid must contain 0");
  }

  static Reparam identity() { return Reparam({0.0, 1.0}, {0.0, 1.0}); }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double t) const {
    // segment index: last i with knots_[i] <= t, clamped so that points
    // outside the grid ride the terminal slopes
    size_t i;
    if (t <= knots_.front()) {
      i = 0;
    } else if (t >= knots_.back()) {
      i = knots_.size() - 2;
    } else {
      i = static_cast<size_t>(std::upper_bound(knots_.begin(), knots_.end(), t) -
                              knots_.begin()) - 1;
    }
    double slope = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
    return values_[i] + slope * (t - knots_[i]);
  }

  double slope(size_t segment) const {
    return (values_[segment + 1] - values_[segment]) /
           (knots_[segment + 1] - knots_[segment]);
  }
  size_t segment_count() const { return knots_.size() - 1; }

  // max over segments of |slope - 1|: the tightest band this alpha fits in
  double delta() const {
    double d = 0;
    for (size_t i = 0; i < segment_count(); ++i) d = std::max(d, std::abs(slope(i) - 1.0));
    return d;
  }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

struct RepCheck {
  bool member = true;
  double s = 0;         // left end of the first violating segment
  double t = 0;         // right end
  double quotient = 1;  // its difference quotient
};

// For piecewise-linear alpha the difference quotient between any two times is
// a convex combination of segment slopes, so the band check on slopes decides
// membership exactly.  A tiny slack absorbs the division roundoff.
inline RepCheck rep_membership(const Reparam& alpha, double delta,
                               double slack = 1e-12) {
  if (delta < 0) throw PreconditionError("rep_membership: delta must be >= 0");
  for (size_t i = 0; i < alpha.segment_count(); ++i) {
    double q = alpha.slope(i);
    if (std::abs(q - 1.0) > delta + slack)
      return RepCheck{false, alpha.knots()[i], alpha.knots()[i + 1], q};
  }
  return RepCheck{};
}

// Functional inverse: swap the roles of knots and values.  Exact for
// piecewise-linear monotone data.  When alpha fits in a band delta <= 1/2 the
// inverse fits in the band 2*delta; see rep_inverse_band for the guarantee.
inline Reparam rep_invert(const Reparam& alpha) {
  return Reparam(alpha.values(), alpha.knots());
}

// Band guaranteed for the inverse of a Rep(delta) element.  The 1/(1-delta)
// blowup of inverse slopes stays within 2*delta only for delta <= 1/2.
inline double rep_inverse_band(double delta) {
  if (delta > 0.5)
    throw PreconditionError("inverse band guarantee needs delta <= 1/2, got " +
                            std::to_string(delta));
  return 2.0 * delta;
}

// outer(inner(t)) as an exact piecewise-linear function: breakpoints are the
// knots of inner plus the preimages under inner of the knots of outer.
inline Reparam rep_compose(const Reparam& outer, const Reparam& inner) {
  Reparam inner_inv = rep_invert(inner);
  std::vector<double> knots = inner.knots();
  for (double k : outer.knots()) knots.push_back(inner_inv(k));
  std::sort(knots.begin(), knots.end());
  // drop duplicates (exact and within roundoff of a neighbour)
  std::vector<double> uniq;
  for (double k : knots) {
    if (uniq.empty() || k - uniq.back() > 1e-12 * std::max(1.0, std::abs(k)))
      uniq.push_back(k);
  }
  // keep 0 exactly on the grid: snap the nearest surviving knot
  size_t iz = 0;
  for (size_t i = 1; i < uniq.size(); ++i)
    if (std::abs(uniq[i]) < std::abs(uniq[iz])) iz = i;
  uniq[iz] = 0.0;
  std::vector<double> values;
  values.reserve(uniq.size());
  for (double k : uniq) values.push_back(k == 0.0 ? 0.0 : outer(inner(k)));
  return Reparam(std::move(uniq), std::move(values));
}

// Random element of Rep(delta): knots at the integers of [-horizon, horizon],
// i.i.d. uniform slopes in [1-delta, 1+delta], pinned to 0 at 0.
inline Reparam rep_random(double delta, double horizon, std::uint64_t seed) {
  if (delta < 0 || delta >= 1)
    throw PreconditionError("rep_random: delta must lie in [0,1)");
  if (horizon < 1) throw PreconditionError("rep_random: horizon must be >= 1");
  const int m = static_cast<int>(std::floor(horizon));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> band(1.0 - delta, 1.0 + delta);
  std::vector<double> slopes(2 * m);  // slope of [k, k+1] for k in [-m, m)
  for (auto& s : slopes) s = band(rng);
  std::vector<double> knots(2 * m + 1), values(2 * m + 1);
  knots[m] = 0.0;
  values[m] = 0.0;
  for (int k = 1; k <= m; ++k) {
    knots[m + k] = k;
    values[m + k] = values[m + k - 1] + slopes[m + k - 1];
    knots[m - k] = -k;
    values[m - k] = values[m - k + 1] - slopes[m - k];
  }
  return Reparam(std::move(knots), std::move(values));
}

}  // namespace islab
