#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "islab/expression.hpp"
#include "islab/geometry.hpp"

namespace islab {

// Axis-aligned sampling box, one (lo, hi) pair per coordinate.
using Box = std::vector<std::pair<double, double>>;

// Autonomous vector field on a Space.  Built-in fields carry analytic
// Jacobians; fields loaded from component expressions differentiate by
// central differences (step 1e-6).  Construction measures the nonsingularity
// margin inf |X| over the declared sample domain and rejects fields that
// vanish there.
class VectorField {
 public:
  using EvalFn = std::function<Vec(const Vec&)>;
  using JacFn = std::function<Mat(const Vec&)>;

  VectorField(std::string name, Space space, EvalFn eval, JacFn jac, Box sample_domain)
      : name_(std::move(name)),
        space_(space),
        eval_(std::move(eval)),
        jac_(std::move(jac)),
        sample_domain_(std::move(sample_domain)) {
    if (static_cast<int>(sample_domain_.size()) != space_.dim)
      throw ConfigError("field '" + name_ + "': sample domain rank != dim");
    margin_ = measure_margin();
    if (!(margin_ > 0.0))
      throw ConfigError("field '" + name_ + "': vanishing vector field on sample domain (margin " +
                        std::to_string(margin_) + ")");
  }

  const std::string& name() const { return name_; }
  const Space& space() const { return space_; }
  int dim() const { return space_.dim; }
  const Box& sample_domain() const { return sample_domain_; }
  double nonsingular_margin() const { return margin_; }

  Vec operator()(const Vec& x) const { return eval_(x); }
  Vec eval(const Vec& x) const { return eval_(x); }

  Mat jacobian(const Vec& x) const {
    if (jac_) return jac_(x);
    return fd_jacobian(x);
  }

  // Central-difference Jacobian; also the cross-check oracle for analytic ones.
  Mat fd_jacobian(const Vec& x, double step = 1e-6) const {
    const int n = space_.dim;
    Mat j(n, n);
    for (int c = 0; c < n; ++c) {
      Vec xp = x, xm = x;
      xp[c] += step;
      xm[c] -= step;
      j.col(c) = (eval_(xp) - eval_(xm)) / (2.0 * step);
    }
    return j;
  }

 private:
  double measure_margin() const {
    // modest grid (17 per axis) over every declared box
    double worst = std::numeric_limits<double>::infinity();
    const int per_axis = 17;
    const int n = space_.dim;
    std::vector<int> idx(n, 0);
    for (;;) {
      Vec x(n);
      for (int i = 0; i < n; ++i) {
        auto [lo, hi] = sample_domain_[i];
        x[i] = lo + (hi - lo) * idx[i] / (per_axis - 1);
      }
      worst = std::min(worst, eval_(x).norm());
      int i = 0;
      while (i < n && ++idx[i] == per_axis) idx[i++] = 0;
      if (i == n) break;
    }
    return worst;
  }

  std::string name_;
  Space space_;
  EvalFn eval_;
  JacFn jac_;
  Box sample_domain_;
  double margin_ = 0.0;
};

// ---------------------------------------------------------------------------
// Built-in flows.

// Circle flow on T^2 with one attracting and one repelling closed orbit
// (a structurally stable, Morse-Smale-like picture): X = (1, -sin(2*pi*y)).
inline VectorField builtin_torus_ms() {
  auto eval = [](const Vec& x) {
    Vec v(2);
    v << 1.0, -std::sin(2.0 * M_PI * x[1]);
    return v;
  };
  auto jac = [](const Vec& x) {
    Mat j = Mat::Zero(2, 2);
    j(1, 1) = -2.0 * M_PI * std::cos(2.0 * M_PI * x[1]);
    return j;
  };
  return VectorField("torus-ms", flat_torus(2), eval, jac, {{0.0, 1.0}, {0.0, 1.0}});
}

// Irrational constant flow on T^2 (minimal, no dichotomy in the normal
// direction): X = (1, alpha) with alpha the golden-ratio conjugate.
inline VectorField builtin_torus_irr() {
  const double alpha = (std::sqrt(5.0) - 1.0) / 2.0;
  auto eval = [alpha](const Vec&) {
    Vec v(2);
    v << 1.0, alpha;
    return v;
  };
  auto jac = [](const Vec&) { return Mat::Zero(2, 2); };
  return VectorField("torus-irr", flat_torus(2), eval, jac, {{0.0, 1.0}, {0.0, 1.0}});
}

// Planar shear with an attracting line y = 0: X = (1, -tanh(y)).
// Closed form along orbits: sinh(y(t)) = sinh(y0) * exp(-t).
inline VectorField builtin_plane_shear() {
  auto eval = [](const Vec& x) {
    Vec v(2);
    v << 1.0, -std::tanh(x[1]);
    return v;
  };
  auto jac = [](const Vec& x) {
    Mat j = Mat::Zero(2, 2);
    double c = std::cosh(x[1]);
    j(1, 1) = -1.0 / (c * c);
    return j;
  };
  return VectorField("plane-shear", euclidean_space(2), eval, jac,
                     {{-2.0, 2.0}, {-10.0, 10.0}});
}

inline VectorField builtin_flow(const std::string& name) {
  if (name == "torus-ms") return builtin_torus_ms();
  if (name == "torus-irr") return builtin_torus_irr();
  if (name == "plane-shear") return builtin_plane_shear();
  throw ConfigError("unknown built-in flow '" + name +
                    "' (expected torus-ms | torus-irr | plane-shear)");
}

// ---------------------------------------------------------------------------
// Field files: {"space": "euclidean"|"flat-torus", "dim": n,
//               "components": ["expr", ...], "domain": [[lo,hi],...]?, "name": ?}

inline VectorField field_from_json(const nlohmann::json& j) {
  if (!j.contains("space") || !j.contains("dim") || !j.contains("components"))
    throw ConfigError("field file: need keys space, dim, components");
  std::string space_name = j.at("space").get<std::string>();
  Space space;
  if (space_name == "euclidean") space = euclidean_space(j.at("dim").get<int>());
  else if (space_name == "flat-torus") space = flat_torus(j.at("dim").get<int>());
  else throw ConfigError("field file: space must be euclidean or flat-torus, got '" +
                         space_name + "'");
  if (space.dim < 1 || space.dim > 16)
    throw ConfigError("field file: dim out of range [1,16]");

  auto comps = j.at("components");
  if (static_cast<int>(comps.size()) != space.dim)
    throw ConfigError("field file: components count " + std::to_string(comps.size()) +
                      " != dim " + std::to_string(space.dim));

  auto exprs = std::make_shared<std::vector<Expression>>();
  for (const auto& c : comps) exprs->emplace_back(c.get<std::string>(), space.dim);

  Box domain;
  if (j.contains("domain")) {
    for (const auto& pair : j.at("domain")) {
      if (pair.size() != 2) throw ConfigError("field file: domain entries are [lo, hi]");
      domain.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
  } else {
    for (int i = 0; i < space.dim; ++i)
      domain.push_back(space.kind == SpaceKind::flat_torus ? std::make_pair(0.0, 1.0)
                                                           : std::make_pair(-1.0, 1.0));
  }

  auto eval = [exprs, n = space.dim](const Vec& x) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = (*exprs)[i].eval(x);
    return v;
  };

  // Torus fields must be 1-periodic; spot-check before accepting.
  if (space.kind == SpaceKind::flat_torus) {
    for (int axis = 0; axis < space.dim; ++axis) {
      Vec x = Vec::Constant(space.dim, 0.318);
      x[axis] = 0.23;
      Vec shifted = x;
      shifted[axis] += 1.0;
      if ((eval(x) - eval(shifted)).norm() > 1e-9)
        throw ConfigError("field file: components are not 1-periodic along axis " +
                          std::to_string(axis));
    }
  }

  std::string name = j.value("name", std::string("custom"));
  return VectorField(name, space, eval, nullptr, domain);
}

inline VectorField load_field_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("field file '" + path + "': " + e.what());
  }
  return field_from_json(j);
}

}  // namespace islab
