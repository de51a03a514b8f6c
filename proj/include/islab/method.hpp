#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "islab/bump.hpp"
#include "islab/flow_engine.hpp"
#include "islab/ub.hpp"

namespace islab {

// Section half-width as a function of the defect scale.  d^{3/2} shrinks
// faster than d, and for fields with a quadratic Taylor remainder the
// first-order flow error over a section, g1(d^{3/2}) = O(d^3), vanishes
// faster than d as well.  The cap keeps 100*tau < 1 - tau with a wide
// safety margin.
inline double choose_section_width(double d) {
  if (!(d > 0)) throw PreconditionError("choose_section_width: d must be positive");
  const double cap = 0.04;
  if (d > cap) {
    char msg[96];
    std::snprintf(msg, sizeof msg,
                  "choose_section_width: d = %.3g exceeds the cap %.3g", d, cap);
    throw PreconditionError(msg);
  }
  return std::pow(d, 1.5);
}

// Parameters of one perturbation method: the defect scale d, the radius r of
// the ball around the start point inside which the flow is modified, the
// window half-length N (sections sit at shifted times 1..2N), the mode
// kappa (1 keeps the linearized transport between sections, 0 freezes each
// section onto its anchor), and the kick sequence z_k, k in [-N, N], with
// |z_k| <= 1.  z[0] (k = -N) is carried for indexing symmetry but no kick is
// applied at the start point.
struct MethodConfig {
  double d = 1e-2;
  double r = 0.25;
  int N = 5;
  int kappa = 1;
  Vec base;             // start point p_{-N}
  std::vector<Vec> z;   // 2N+1 entries, z[k+N] is the kick at step k
  std::string chart_policy = "strict";  // "strict" | "direct" (tori only)
};

// The perturbed evolution.  Shifted time u runs with the identity at u = 0;
// outside B_r(base) and for u <= 1-tau the method is the flow.  Sections
// are the intervals [j-tau, j+tau], j = 1..2N; on section j the state is
// blended toward the section target, between sections it flows freely.
//
// Anchors, all memoized in one forward pass at construction:
//   p_hat(k)  : unperturbed arrival at section k+N, flowed from the previous
//               section's exit over 1-tau;
//   p_tilde(k): p_hat(k) shifted by the kick d*z_k (the state the base orbit
//               actually occupies at integer shifted times);
//   A_tilde(k): derivative of the time-(1-tau) flow map at the exit of
//               section k+N (feeds the target of section k+N+1);
//   X_hat(k)  : vector field at p_hat(k).
//
// An instance is immutable once built and safe to evaluate concurrently.
class DMethod {
 public:
  DMethod(const FlowEngine& engine, MethodConfig cfg, const UbConstants* ub = nullptr)
      : engine_(&engine), cfg_(std::move(cfg)), tau_(choose_section_width(cfg_.d)),
        bump_(tau_, cfg_.r) {
    const Space& sp = engine.space();
    const int n = engine.dim();
    if (cfg_.kappa != 0 && cfg_.kappa != 1)
      throw PreconditionError("DMethod: kappa must be 0 or 1");
    if (cfg_.N < 1) throw PreconditionError("DMethod: N must be >= 1");
    if (!(cfg_.r > 0)) throw PreconditionError("DMethod: r must be positive");
    if (cfg_.r >= sp.injectivity_radius())
      throw PreconditionError("DMethod: ball radius must stay below the chart radius");
    if (cfg_.base.size() != n) throw PreconditionError("DMethod: base point dimension mismatch");
    if (static_cast<int>(cfg_.z.size()) != 2 * cfg_.N + 1)
      throw PreconditionError("DMethod: need 2N+1 kick vectors");
    for (const Vec& zk : cfg_.z) {
      if (zk.size() != n) throw PreconditionError("DMethod: kick dimension mismatch");
      if (zk.norm() > 1.0 + 1e-12)
        throw PreconditionError("DMethod: kick norms must not exceed 1");
    }
    if (cfg_.chart_policy != "strict" && cfg_.chart_policy != "direct")
      throw PreconditionError("DMethod: chart_policy must be \"strict\" or \"direct\"");
    cfg_.base = canonicalize(sp, cfg_.base);

    if (sp.kind == SpaceKind::flat_torus && cfg_.chart_policy == "strict") {
      // a-priori bound on how far any evaluation can stray from its chart
      // center: 10 * Q1^(2N) * (d + r + tau*Q2), accumulated in logs to
      // survive large Q1^(2N)
      UbConstants local;
      if (!ub) {
        local = estimate_ub_constants(engine);
        ub = &local;
      }
      double log10_bound = std::log10(10.0) + 2.0 * cfg_.N * std::log10(ub->Q1) +
                           std::log10(cfg_.d + cfg_.r + tau_ * ub->Q2);
      gate_log10_ = log10_bound;
      if (log10_bound >= std::log10(sp.injectivity_radius())) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "DMethod: chart excursion bound 10*Q1^(2N)*(d+r+tau*Q2) = 1e%.2f "
                      "reaches the chart radius %.3g; shrink r/d/N or use "
                      "chart_policy \"direct\"", log10_bound, sp.injectivity_radius());
        throw PreconditionError(msg);
      }
    }

    // forward anchor pass; section j = k+N, carry = state at u = j-1+tau
    const auto& field = engine.field();
    sections_.resize(2 * cfg_.N + 1);
    sections_[0].p_hat = cfg_.base;
    sections_[0].p_tilde = cfg_.base;
    sections_[0].X_hat = field(cfg_.base);
    Vec carry = engine.flow(tau_, cfg_.base);
    for (int j = 1; j <= 2 * cfg_.N; ++j) {
      Section& s = sections_[j];
      s.carry = carry;
      FlowJet jet = engine.flow_with_jacobian(1.0 - tau_, carry);
      s.A = jet.jac;
      s.p_hat = jet.x;
      s.X_hat = field(s.p_hat);
      s.p_tilde = chart_exp(sp, s.p_hat, cfg_.d * cfg_.z[j]);
      s.exit = chart_exp(sp, s.p_hat,
                         cfg_.kappa * tau_ * s.X_hat + cfg_.d * cfg_.z[j]);
      carry = s.exit;
    }
  }

  double tau() const { return tau_; }
  double d() const { return cfg_.d; }
  double r() const { return cfg_.r; }
  int N() const { return cfg_.N; }
  int kappa() const { return cfg_.kappa; }
  const Vec& base() const { return cfg_.base; }
  const FlowEngine& engine() const { return *engine_; }
  const MethodConfig& config() const { return cfg_; }
  // log10 of the chart excursion bound when the strict gate ran
  bool gate_checked() const { return gate_log10_ != kNoGate; }
  double gate_log10() const { return gate_log10_; }

  const Vec& p_tilde(int k) const { return section(k).p_tilde; }
  const Vec& p_hat(int k) const { return section(k).p_hat; }
  const Vec& X_hat(int k) const { return section(k).X_hat; }
  const Mat& A_tilde(int k) const {
    if (k < -cfg_.N || k >= cfg_.N)
      throw PreconditionError("DMethod: A_tilde index outside [-N, N-1]");
    return sections_[k + cfg_.N + 1].A;
  }

  // Per-start-point evaluation cache: section carries, integer-time states,
  // and exits, filled lazily left to right.
  struct Sweep {
    Vec x0;            // canonicalized start point
    bool in_ball = false;
    Vec v;             // chart_log(base, x0) when in the ball
    double radial_weight = 1.0;  // blend weight share from |v|
    int filled = 0;    // sections with c/m/e computed
    std::vector<Vec> c, m, e;
  };

  Sweep start(const Vec& x) const {
    const Space& sp = engine_->space();
    Sweep sw;
    sw.x0 = canonicalize(sp, x);
    sw.in_ball = distance(sp, sw.x0, cfg_.base) < cfg_.r;
    if (sw.in_ball) {
      sw.v = chart_log(sp, cfg_.base, sw.x0);
      sw.radial_weight = bump_.value_clamped(0.0, sw.v.norm());
      int count = 2 * cfg_.N + 1;
      sw.c.resize(count);
      sw.m.resize(count);
      sw.e.resize(count);
      sw.m[0] = sw.x0;
    }
    return sw;
  }

  // State at shifted time u from the start point cached in sw.
  Vec eval(double u, Sweep& sw) const {
    if (!sw.in_ball || u <= 1.0 - tau_) return engine_->flow(u, sw.x0);
    const int last = 2 * cfg_.N;
    int jr = static_cast<int>(std::lround(u));
    if (jr >= 1 && jr <= last && std::abs(u - jr) <= tau_) {
      fill(sw, jr);
      double s = u - jr;
      double w = bump_.value_clamped(s, sw.v.norm());
      const Section& sec = sections_[jr];
      if (w == 1.0) return chart_exp(engine_->space(), sec.p_hat, target_vec(jr, s, sw.m[jr - 1]));
      Vec flowed = engine_->flow(1.0 - tau_ + s, sw.c[jr]);
      if (w == 0.0) return flowed;
      Vec tv = target_vec(jr, s, sw.m[jr - 1]);
      Vec fv = chart_log(engine_->space(), sec.p_hat, flowed);
      return chart_exp(engine_->space(), sec.p_hat, w * tv + (1.0 - w) * fv);
    }
    int j = std::min(last, static_cast<int>(std::floor(u - tau_)));
    fill(sw, j);
    return engine_->flow(u - (j + tau_), sw.e[j]);
  }

  Vec theta(double u, const Vec& x) const {
    Sweep sw = start(x);
    return eval(u, sw);
  }
  // the unshifted axis: psi(t, .) = theta(t + N, .), identity at t = -N
  Vec psi(double t, const Vec& x) const { return theta(t + cfg_.N, x); }

  // Fast path for the start point itself: everything is memoized.
  Vec theta_base(double u) const {
    if (u <= 1.0 - tau_) return engine_->flow(u, cfg_.base);
    const int last = 2 * cfg_.N;
    int jr = static_cast<int>(std::lround(u));
    if (jr >= 1 && jr <= last && std::abs(u - jr) <= tau_) {
      double s = u - jr;
      double w = bump_.value_clamped(s, 0.0);
      const Section& sec = sections_[jr];
      // on the base orbit the previous integer state is p_tilde exactly, so
      // the transported deviation vanishes and the target is local
      Vec tv = cfg_.kappa * s * sec.X_hat + cfg_.d * cfg_.z[jr];
      if (w == 1.0) return chart_exp(engine_->space(), sec.p_hat, tv);
      Vec flowed = engine_->flow(1.0 - tau_ + s, sec.carry);
      if (w == 0.0) return flowed;
      Vec fv = chart_log(engine_->space(), sec.p_hat, flowed);
      return chart_exp(engine_->space(), sec.p_hat, w * tv + (1.0 - w) * fv);
    }
    int j = std::min(last, static_cast<int>(std::floor(u - tau_)));
    return engine_->flow(u - (j + tau_), sections_[j].exit);
  }

  // Target of section k+1 as a point: the anchor p_hat(k+1) offset by the
  // transported deviation of the state at integer time k, the frozen-field
  // drift, and the kick.
  Vec section_target(int k, double s, const Vec& v) const {
    return chart_exp(engine_->space(), p_hat(k + 1), section_target_vec(k, s, v));
  }

  // Same in chart coordinates at p_hat(k+1).
  Vec section_target_vec(int k, double s, const Vec& v) const {
    if (k < -cfg_.N || k >= cfg_.N)
      throw PreconditionError("section_target: k must lie in [-N, N-1]");
    if (std::abs(s) > tau_ * (1 + 1e-9))
      throw PreconditionError("section_target: |s| must not exceed tau");
    if (v.norm() > cfg_.r * (1 + 1e-9))
      throw PreconditionError("section_target: |v| must not exceed r");
    Sweep sw = start(chart_exp(engine_->space(), cfg_.base, v));
    int j = k + cfg_.N;
    fill(sw, j);
    return target_vec(j + 1, s, sw.m[j]);
  }

 private:
  struct Section {
    Vec carry;    // base state entering the pre-section flow leg, u = j-1+tau
    Mat A;        // derivative of the time-(1-tau) flow at carry
    Vec p_hat;    // unperturbed arrival
    Vec X_hat;    // field at p_hat
    Vec p_tilde;  // arrival after the kick
    Vec exit;     // base state at u = j+tau
  };

  static constexpr double kNoGate = -1e300;

  const Section& section(int k) const {
    if (k < -cfg_.N || k > cfg_.N)
      throw PreconditionError("DMethod: anchor index outside [-N, N]");
    return sections_[k + cfg_.N];
  }

  // target of section j in chart coordinates at its p_hat, given the state
  // at integer time j-1
  Vec target_vec(int j, double s, const Vec& m_prev) const {
    const Section& sec = sections_[j];
    Vec tv = cfg_.d * cfg_.z[j];
    if (cfg_.kappa == 1) {
      Vec dev = chart_log(engine_->space(), sections_[j - 1].p_tilde, m_prev);
      tv += sec.A * dev + s * sec.X_hat;
    }
    return tv;
  }

  void fill(Sweep& sw, int jmax) const {
    const Space& sp = engine_->space();
    while (sw.filled < jmax) {
      int j = sw.filled + 1;
      const Section& sec = sections_[j];
      sw.c[j] = (j == 1) ? engine_->flow(tau_, sw.x0) : sw.e[j - 1];
      Vec tv0 = target_vec(j, 0.0, sw.m[j - 1]);
      Vec tvt = target_vec(j, tau_, sw.m[j - 1]);
      double w = sw.radial_weight;  // time factor is 1 at s = 0 and s = tau
      if (w == 1.0) {
        sw.m[j] = chart_exp(sp, sec.p_hat, tv0);
        sw.e[j] = chart_exp(sp, sec.p_hat, tvt);
      } else {
        auto ys = engine_->flow_many(sw.c[j], {1.0 - tau_, 1.0});
        if (w == 0.0) {
          sw.m[j] = ys[0];
          sw.e[j] = ys[1];
        } else {
          sw.m[j] = chart_exp(sp, sec.p_hat, w * tv0 + (1.0 - w) * chart_log(sp, sec.p_hat, ys[0]));
          sw.e[j] = chart_exp(sp, sec.p_hat, w * tvt + (1.0 - w) * chart_log(sp, sec.p_hat, ys[1]));
        }
      }
      sw.filled = j;
    }
  }

  const FlowEngine* engine_;
  MethodConfig cfg_;
  double tau_;
  BumpGamma bump_;
  std::vector<Section> sections_;
  double gate_log10_ = kNoGate;
};

inline DMethod build_method(const FlowEngine& engine, const MethodConfig& cfg,
                            const UbConstants* ub = nullptr) {
  return DMethod(engine, cfg, ub);
}

}  // namespace islab
