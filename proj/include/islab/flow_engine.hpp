#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "islab/vector_field.hpp"

namespace islab {

// Flow value together with the derivative of the time-t map.
struct FlowJet {
  Vec x;
  Mat jac;
};

// Deterministic fixed-step RK4 integrator for the flow of a VectorField,
// optionally carrying the variational (matrix) equation dV/dt = DX(x(t)) V
// through the same Runge-Kutta stages, so the returned Jacobian is exactly
// the derivative of the discrete flow map.  Off-grid times are filled in by
// cubic Hermite interpolation between the bracketing nodes (both endpoint
// slopes are field evaluations, so interpolation error is O(h^4) like the
// integrator itself and the numerical group property holds to ~1e-12).
//
// Torus fields integrate in unwrapped coordinates (the field is 1-periodic)
// and results are canonicalized on emission.
class FlowEngine {
 public:
  explicit FlowEngine(VectorField field, double step = 1e-3, double horizon = 1e4)
      : field_(std::move(field)), step_(step), horizon_(horizon) {
    if (!(step_ > 0)) throw ConfigError("FlowEngine: step must be positive");
  }

  const VectorField& field() const { return field_; }
  const Space& space() const { return field_.space(); }
  int dim() const { return field_.dim(); }
  double step() const { return step_; }
  double horizon() const { return horizon_; }

  Vec flow(double t, const Vec& x) const {
    std::vector<double> ts{t};
    return flow_many(x, ts).front();
  }

  FlowJet flow_with_jacobian(double t, const Vec& x) const {
    std::vector<double> ts{t};
    return flow_jet_many(x, ts).front();
  }

  // States at several times.  `times` may be unsorted and mix signs; each
  // sign is integrated outward from x once.
  std::vector<Vec> flow_many(const Vec& x, const std::vector<double>& times) const {
    auto jets = run(x, times, /*with_jac=*/false);
    std::vector<Vec> out;
    out.reserve(jets.size());
    for (auto& j : jets) out.push_back(std::move(j.x));
    return out;
  }

  std::vector<FlowJet> flow_jet_many(const Vec& x, const std::vector<double>& times) const {
    return run(x, times, /*with_jac=*/true);
  }

 private:
  struct State {
    Vec x;
    Mat v;  // variational matrix (unused when !with_jac)
  };

  void deriv(const State& s, bool with_jac, State& out) const {
    out.x = field_.eval(s.x);
    if (with_jac) out.v = field_.jacobian(s.x) * s.v;
  }

  State rk4_step(const State& s, double h, bool with_jac) const {
    State k1, k2, k3, k4, tmp;
    deriv(s, with_jac, k1);
    tmp.x = s.x + 0.5 * h * k1.x;
    if (with_jac) tmp.v = s.v + 0.5 * h * k1.v;
    deriv(tmp, with_jac, k2);
    tmp.x = s.x + 0.5 * h * k2.x;
    if (with_jac) tmp.v = s.v + 0.5 * h * k2.v;
    deriv(tmp, with_jac, k3);
    tmp.x = s.x + h * k3.x;
    if (with_jac) tmp.v = s.v + h * k3.v;
    deriv(tmp, with_jac, k4);
    State next;
    next.x = s.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    if (with_jac) next.v = s.v + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    return next;
  }

  // Cubic Hermite on [0, h] with endpoint values/slopes.
  template <typename T>
  static T hermite(double theta, double h, const T& y0, const T& f0, const T& y1, const T& f1) {
    const double t2 = theta * theta, t3 = t2 * theta;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + theta;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
  }

  std::vector<FlowJet> run(const Vec& x, const std::vector<double>& times, bool with_jac) const {
    const int n = field_.dim();
    for (double t : times)
      if (std::abs(t) > horizon_)
        throw HorizonError("flow time " + std::to_string(t) + " beyond horizon " +
                           std::to_string(horizon_));

    std::vector<FlowJet> out(times.size());

    // Index queries by sign and process each direction in one sweep.
    std::vector<size_t> order(times.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int dir : {+1, -1}) {
      std::vector<size_t> idx;
      for (size_t i : order)
        if ((dir > 0 && times[i] >= 0) || (dir < 0 && times[i] < 0)) idx.push_back(i);
      if (idx.empty()) continue;
      std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        return std::abs(times[a]) < std::abs(times[b]);
      });

      State cur;
      cur.x = x;
      if (with_jac) cur.v = Mat::Identity(n, n);
      double reached = 0.0;  // |time| of cur
      const double h = step_;

      State node_next;       // one step ahead of cur, filled lazily
      bool have_next = false;

      for (size_t qi : idx) {
        const double target = std::abs(times[qi]);
        // advance whole steps while the target is beyond the next node
        while (target >= reached + h - 1e-15 * std::max(1.0, target)) {
          if (!have_next) node_next = rk4_step(cur, dir * h, with_jac);
          cur = node_next;
          have_next = false;
          reached += h;
        }
        double rem = target - reached;
        FlowJet jet;
        if (rem <= 1e-15 * std::max(1.0, target)) {
          jet.x = cur.x;
          if (with_jac) jet.jac = cur.v;
        } else {
          if (!have_next) {
            node_next = rk4_step(cur, dir * h, with_jac);
            have_next = true;
          }
          State d0, d1;
          deriv(cur, with_jac, d0);
          deriv(node_next, with_jac, d1);
          const double theta = rem / h;
          jet.x = hermite(theta, dir * h, cur.x, d0.x, node_next.x, d1.x);
          if (with_jac) jet.jac = hermite(theta, dir * h, cur.v, d0.v, node_next.v, d1.v);
        }
        if (!jet.x.allFinite() || (with_jac && !jet.jac.allFinite()))
          throw NonFiniteError("flow integration produced non-finite values at t=" +
                               std::to_string(times[qi]));
        jet.x = canonicalize(space(), jet.x);
        out[qi] = std::move(jet);
      }
    }
    return out;
  }

  VectorField field_;
  double step_;
  double horizon_;
};

}  // namespace islab
