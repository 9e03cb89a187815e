// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/algebra.hpp"
#include "holoflow/connection.hpp"
#include "holoflow/gauge.hpp"
#include "holoflow/geometry.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace holoflow {

// Fixed catalogue of parameterized families.  Experiment configs declare
// instances by family id plus numeric parameters; there is no runtime code
// loading.  Construction validates parameter names and chart compatibility
// (a family whose coefficients are not periodic is refused on a torus).

using CatalogueParams = std::map<std::string, double>;

struct ParamSpec {
  std::string name;
  double fallback = 0.0;
  std::string doc;
};

struct FamilySpec {
  std::string id;
  std::string kind;  // field | connection | metric | gauge | function
  std::string doc;
  std::vector<ParamSpec> params;
  bool torus_ok = true;
};

// Stable listing order: fields, connections, metrics, gauges, functions.
inline const std::vector<FamilySpec>& catalogue_families() {
  static const std::vector<FamilySpec> families = {
      {"constant-field",
       "field",
       "constant velocity X(m) = v",
       {{"x", 0.0, "velocity along axis 0"},
        {"y", 0.0, "velocity along axis 1"},
        {"z", 0.0, "velocity along axis 2"}},
       true},
      {"linear-field",
       "field",
       "X(m) = A (m - c), divergence tr A",
       {{"a00", 0.0, "matrix entry"}, {"a01", 0.0, "matrix entry"}, {"a02", 0.0, "matrix entry"},
        {"a10", 0.0, "matrix entry"}, {"a11", 0.0, "matrix entry"}, {"a12", 0.0, "matrix entry"},
        {"a20", 0.0, "matrix entry"}, {"a21", 0.0, "matrix entry"}, {"a22", 0.0, "matrix entry"},
        {"cx", 0.0, "center"},        {"cy", 0.0, "center"},        {"cz", 0.0, "center"}},
       false},
      {"rotation-field",
       "field",
       "rigid rotation about the center of the axis-0/axis-1 plane",
       {{"omega", 1.0, "angular velocity"}, {"cx", 0.0, "center"}, {"cy", 0.0, "center"}},
       false},
      {"bump-field",
       "field",
       "constant direction modulated by a smooth compact bump",
       {{"cx", 0.5, "bump center"},
        {"cy", 0.5, "bump center"},
        {"cz", 0.5, "bump center"},
        {"radius", 0.25, "support radius"},
        {"vx", 0.0, "direction"},
        {"vy", 0.0, "direction"},
        {"vz", 0.0, "direction"}},
       true},

      {"trivial-connection",
       "connection",
       "A = 0 on a fiber of the given dimension",
       {{"fiber", 1.0, "fiber dimension, 1 or 2"}},
       true},
      {"constant-u1",
       "connection",
       "A = i (cx dx0 + cy dx1 + cz dx2)",
       {{"cx", 0.0, "coefficient"}, {"cy", 0.0, "coefficient"}, {"cz", 0.0, "coefficient"}},
       true},
      {"u1-trig",
       "connection",
       "A = i (a cos(2 pi y) dx + b sin(2 pi x) dy), periodic",
       {{"a", 0.0, "dx coefficient"}, {"b", 0.0, "dy coefficient"}},
       true},
      {"abelian-curvature",
       "connection",
       "A = i b x dy: constant curvature, box charts only",
       {{"b", 1.0, "curvature"}},
       false},
      {"diag-abelian",
       "connection",
       "u1-trig on the first diagonal fiber entry, flat on the second",
       {{"a", 0.0, "dx coefficient"}, {"b", 0.0, "dy coefficient"}},
       true},
      {"su2-two-axis",
       "connection",
       "A = i (a sigma1 dx + b sigma2 dy)",
       {{"a", 0.0, "sigma1 dx coefficient"}, {"b", 0.0, "sigma2 dy coefficient"}},
       true},
      {"su2-trig",
       "connection",
       "A = i (a cos(2 pi y) sigma1 dx + b sin(2 pi x) sigma2 dy), periodic",
       {{"a", 0.0, "dx coefficient"}, {"b", 0.0, "dy coefficient"}},
       true},

      {"flat-metric", "metric", "g = identity", {}, true},
      {"conformal-metric",
       "metric",
       "g = exp(2 phi) identity, phi = amp sin(2 pi x) cos(2 pi y)",
       {{"amp", 0.1, "conformal amplitude"}},
       true},

      {"constant-gauge",
       "gauge",
       "constant unitary; fiber 2: exp(i (a sigma1 + b sigma3)), fiber 1: exp(i a)",
       {{"a", 0.0, "angle"}, {"b", 0.0, "angle"}, {"fiber", 2.0, "fiber dimension, 1 or 2"}},
       true},
      {"phase-gauge",
       "gauge",
       "u = exp(i amp sin(2 pi x) cos(2 pi y)) with analytic partials",
       {{"amp", 0.3, "phase amplitude"}},
       true},
      {"su2-rotation-gauge",
       "gauge",
       "u = exp(i (a sin(2 pi x) sigma1 + b cos(2 pi y) sigma3))",
       {{"a", 0.0, "sigma1 amplitude"}, {"b", 0.0, "sigma3 amplitude"}},
       true},

      {"constant-function",
       "function",
       "f = re + i im",
       {{"re", 1.0, "real part"}, {"im", 0.0, "imaginary part"}},
       true},
      {"trig-function",
       "function",
       "f = (re + i im) exp(2 pi i (kx x + ky y)); integer wave numbers on a torus",
       {{"re", 1.0, "amplitude"}, {"im", 0.0, "amplitude"}, {"kx", 1.0, "wave number"}, {"ky", 0.0, "wave number"}},
       true},
      {"bump-function",
       "function",
       "f = (re + i im) chi(|m - c|^2 / R^2), compactly supported",
       {{"cx", 0.5, "center"},
        {"cy", 0.5, "center"},
        {"cz", 0.5, "center"},
        {"radius", 0.25, "support radius"},
        {"re", 1.0, "amplitude"},
        {"im", 0.0, "amplitude"}},
       true},
  };
  return families;
}

namespace detail {

inline const FamilySpec& family_spec(const std::string& kind, const std::string& family) {
  for (const auto& f : catalogue_families()) {
    if (f.id == family) {
      if (f.kind != kind) {
        throw CatalogueError("catalogue family '" + family + "' is a " + f.kind + ", not a " + kind);
      }
      return f;
    }
  }
  throw CatalogueError("unknown catalogue " + kind + " family '" + family + "'");
}

class ParamReader {
 public:
  ParamReader(const FamilySpec& spec, const CatalogueParams& given) : spec_(spec), given_(given) {
    for (const auto& kv : given) {
      bool known = false;
      for (const auto& p : spec.params) {
        if (p.name == kv.first) {
          known = true;
          break;
        }
      }
      if (!known) {
        throw CatalogueError("unknown parameter '" + kv.first + "' for catalogue family '" + spec.id + "'");
      }
    }
  }

  double get(const std::string& name) const {
    auto it = given_.find(name);
    if (it != given_.end()) return it->second;
    for (const auto& p : spec_.params) {
      if (p.name == name) return p.fallback;
    }
    throw CatalogueError("catalogue family '" + spec_.id + "' has no parameter '" + name + "'");
  }

  int get_fiber(const std::string& name) const {
    double v = get(name);
    int n = static_cast<int>(std::lround(v));
    if (n != 1 && n != 2) {
      throw CatalogueError("parameter '" + name + "' of '" + spec_.id + "' must be 1 or 2");
    }
    return n;
  }

  int get_integer(const std::string& name) const {
    double v = get(name);
    if (std::abs(v - std::round(v)) > 1e-12) {
      throw CatalogueError("parameter '" + name + "' of '" + spec_.id + "' must be an integer");
    }
    return static_cast<int>(std::lround(v));
  }

 private:
  const FamilySpec& spec_;
  const CatalogueParams& given_;
};

inline void check_chart(const ChartDomain& dom, const FamilySpec& spec) {
  if (dom.topology == Topology::Torus && !spec.torus_ok) {
    throw CatalogueError("catalogue family '" + spec.id +
                         "' is not periodic; declare it on a box chart");
  }
}

// The trig families hardcode the 2 pi wave; they are periodic exactly when
// every torus side is an integer.
inline void check_unit_wave(const ChartDomain& dom, const FamilySpec& spec) {
  if (dom.topology != Topology::Torus) return;
  for (int a = 0; a < dom.dim; ++a) {
    double s = dom.side(a);
    if (std::abs(s - std::round(s)) > 1e-12 || s < 0.5) {
      throw CatalogueError("catalogue family '" + spec.id +
                           "' needs integer torus sides to stay periodic");
    }
  }
}

inline Vec params_vec(const ParamReader& r, int dim, const char* x, const char* y, const char* z) {
  Vec v(dim);
  v[0] = r.get(x);
  if (dim > 1) v[1] = r.get(y);
  if (dim > 2) v[2] = r.get(z);
  return v;
}

inline constexpr Complex kCatI{0.0, 1.0};

// chi(u) = exp(-u/(1-u)) for u < 1, zero beyond; all derivatives vanish at
// the support boundary.
inline double catalogue_bump(double u) {
  if (u >= 1.0) return 0.0;
  return std::exp(-u / (1.0 - u));
}

inline double catalogue_bump_du(double u) {
  if (u >= 1.0) return 0.0;
  double w = 1.0 - u;
  return -catalogue_bump(u) / (w * w);
}

}  // namespace detail

inline VectorFieldSpec make_field(const ChartDomain& dom, const std::string& family,
                                  const std::string& id, const CatalogueParams& params) {
  const FamilySpec& spec = detail::family_spec("field", family);
  detail::check_chart(dom, spec);
  detail::ParamReader r(spec, params);
  VectorFieldSpec f;
  f.id = id;
  int d = dom.dim;

  if (family == "constant-field") {
    Vec v = detail::params_vec(r, d, "x", "y", "z");
    f.eval = [v](const Vec&) { return v; };
    f.divergence = [](const Vec&) { return 0.0; };
    return f;
  }
  if (family == "linear-field") {
    RMat A(d, d);
    const char* names[3][3] = {{"a00", "a01", "a02"}, {"a10", "a11", "a12"}, {"a20", "a21", "a22"}};
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) A(i, j) = r.get(names[i][j]);
    }
    Vec c = detail::params_vec(r, d, "cx", "cy", "cz");
    double tr = A.trace();
    f.eval = [A, c](const Vec& x) { return Vec(A * (x - c)); };
    f.divergence = [tr](const Vec&) { return tr; };
    return f;
  }
  if (family == "rotation-field") {
    double omega = r.get("omega");
    double cx = r.get("cx"), cy = r.get("cy");
    f.eval = [omega, cx, cy, d](const Vec& x) {
      Vec v = Vec::Zero(d);
      v[0] = -omega * (x[1] - cy);
      v[1] = omega * (x[0] - cx);
      return v;
    };
    f.divergence = [](const Vec&) { return 0.0; };
    return f;
  }
  if (family == "bump-field") {
    Vec c = detail::params_vec(r, d, "cx", "cy", "cz");
    Vec v = detail::params_vec(r, d, "vx", "vy", "vz");
    double R = r.get("radius");
    if (!(R > 0.0)) throw CatalogueError("bump-field radius must be positive");
    ChartDomain dcopy = dom;  // min-image distance keeps the bump honest near a torus seam
    f.eval = [dcopy, c, R, v](const Vec& x) {
      double u = dcopy.min_image(Vec(x - c)).squaredNorm() / (R * R);
      return Vec(detail::catalogue_bump(u) * v);
    };
    f.divergence = [dcopy, c, R, v](const Vec& x) {
      Vec e = dcopy.min_image(Vec(x - c));
      double u = e.squaredNorm() / (R * R);
      return detail::catalogue_bump_du(u) * 2.0 * v.dot(e) / (R * R);
    };
    return f;
  }
  throw CatalogueError("field family '" + family + "' has no builder");
}

inline SmoothConnection make_connection(const ChartDomain& dom, const std::string& family,
                                        const std::string& id, const CatalogueParams& params) {
  const FamilySpec& spec = detail::family_spec("connection", family);
  detail::check_chart(dom, spec);
  detail::ParamReader r(spec, params);
  SmoothConnection c;
  c.id = id;
  c.dim = dom.dim;
  int d = dom.dim;
  const Complex I = detail::kCatI;

  if (family == "trivial-connection") {
    int n = r.get_fiber("fiber");
    c.fiber_dim = n;
    c.components = [n, d](const Vec&, OneForm& A) {
      for (int a = 0; a < d; ++a) A[a] = CMat::Zero(n, n);
    };
    return c;
  }
  if (family == "constant-u1") {
    Vec coeff = detail::params_vec(r, d, "cx", "cy", "cz");
    c.fiber_dim = 1;
    c.components = [coeff, d, I](const Vec&, OneForm& A) {
      for (int a = 0; a < d; ++a) {
        A[a] = CMat::Zero(1, 1);
        A[a](0, 0) = I * coeff[a];
      }
    };
    return c;
  }
  if (family == "u1-trig") {
    detail::check_unit_wave(dom, spec);
    double a = r.get("a"), b = r.get("b");
    c.fiber_dim = 1;
    c.components = [a, b, d, I](const Vec& m, OneForm& A) {
      for (int k = 0; k < d; ++k) A[k] = CMat::Zero(1, 1);
      A[0](0, 0) = I * a * std::cos(2 * M_PI * m[1]);
      A[1](0, 0) = I * b * std::sin(2 * M_PI * m[0]);
    };
    return c;
  }
  if (family == "abelian-curvature") {
    double b = r.get("b");
    c.fiber_dim = 1;
    c.components = [b, d, I](const Vec& m, OneForm& A) {
      for (int k = 0; k < d; ++k) A[k] = CMat::Zero(1, 1);
      A[1](0, 0) = I * b * m[0];
    };
    return c;
  }
  if (family == "diag-abelian") {
    detail::check_unit_wave(dom, spec);
    double a = r.get("a"), b = r.get("b");
    c.fiber_dim = 2;
    c.components = [a, b, d, I](const Vec& m, OneForm& A) {
      for (int k = 0; k < d; ++k) A[k] = CMat::Zero(2, 2);
      A[0](0, 0) = I * a * std::cos(2 * M_PI * m[1]);
      A[1](0, 0) = I * b * std::sin(2 * M_PI * m[0]);
    };
    return c;
  }
  if (family == "su2-two-axis") {
    double a = r.get("a"), b = r.get("b");
    c.fiber_dim = 2;
    c.components = [a, b, d, I](const Vec&, OneForm& A) {
      for (int k = 0; k < d; ++k) A[k] = CMat::Zero(2, 2);
      A[0] = I * a * pauli(1);
      A[1] = I * b * pauli(2);
    };
    return c;
  }
  if (family == "su2-trig") {
    detail::check_unit_wave(dom, spec);
    double a = r.get("a"), b = r.get("b");
    c.fiber_dim = 2;
    c.components = [a, b, d, I](const Vec& m, OneForm& A) {
      for (int k = 0; k < d; ++k) A[k] = CMat::Zero(2, 2);
      A[0] = I * a * std::cos(2 * M_PI * m[1]) * pauli(1);
      A[1] = I * b * std::sin(2 * M_PI * m[0]) * pauli(2);
    };
    return c;
  }
  throw CatalogueError("connection family '" + family + "' has no builder");
}

inline Metric make_metric(const ChartDomain& dom, const std::string& family, const std::string& id,
                          const CatalogueParams& params) {
  const FamilySpec& spec = detail::family_spec("metric", family);
  detail::check_chart(dom, spec);
  detail::ParamReader r(spec, params);
  int d = dom.dim;
  Metric m;
  m.id = id;

  if (family == "flat-metric") {
    m.tensor = [d](const Vec&) { return RMat(RMat::Identity(d, d)); };
    m.density_fn = [](const Vec&) { return 1.0; };
    return m;
  }
  if (family == "conformal-metric") {
    detail::check_unit_wave(dom, spec);
    double amp = r.get("amp");
    m.tensor = [d, amp](const Vec& p) {
      double phi = amp * std::sin(2 * M_PI * p[0]) * std::cos(2 * M_PI * p[1]);
      return RMat(std::exp(2.0 * phi) * RMat::Identity(d, d));
    };
    m.density_fn = [d, amp](const Vec& p) {
      double phi = amp * std::sin(2 * M_PI * p[0]) * std::cos(2 * M_PI * p[1]);
      return std::exp(d * phi);
    };
    return m;
  }
  throw CatalogueError("metric family '" + family + "' has no builder");
}

inline GaugeTransform make_gauge(const ChartDomain& dom, const std::string& family,
                                 const std::string& id, const CatalogueParams& params) {
  const FamilySpec& spec = detail::family_spec("gauge", family);
  detail::check_chart(dom, spec);
  detail::ParamReader r(spec, params);
  GaugeTransform g;
  g.id = id;
  const Complex I = detail::kCatI;

  if (family == "constant-gauge") {
    int n = r.get_fiber("fiber");
    g.fiber_dim = n;
    double a = r.get("a"), b = r.get("b");
    CMat u;
    if (n == 2) {
      u = expm_antihermitian(CMat(I * (a * pauli(1) + b * pauli(3))));
    } else {
      u = CMat(1, 1);
      u(0, 0) = std::exp(I * a);
    }
    g.eval = [u](const Vec&) { return u; };
    g.partials = [n](const Vec&, std::array<CMat, 3>& out) {
      for (auto& m : out) m = CMat::Zero(n, n);
    };
    return g;
  }
  if (family == "phase-gauge") {
    detail::check_unit_wave(dom, spec);
    double amp = r.get("amp");
    g.fiber_dim = 1;
    auto theta = [amp](const Vec& p) {
      return amp * std::sin(2 * M_PI * p[0]) * std::cos(2 * M_PI * p[1]);
    };
    g.eval = [theta, I](const Vec& p) {
      CMat u(1, 1);
      u(0, 0) = std::exp(I * theta(p));
      return u;
    };
    g.partials = [amp, theta, I](const Vec& p, std::array<CMat, 3>& out) {
      Complex u = std::exp(I * theta(p));
      double dx = amp * 2 * M_PI * std::cos(2 * M_PI * p[0]) * std::cos(2 * M_PI * p[1]);
      double dy = -amp * 2 * M_PI * std::sin(2 * M_PI * p[0]) * std::sin(2 * M_PI * p[1]);
      for (auto& m : out) m = CMat::Zero(1, 1);
      out[0](0, 0) = I * dx * u;
      out[1](0, 0) = I * dy * u;
    };
    return g;
  }
  if (family == "su2-rotation-gauge") {
    detail::check_unit_wave(dom, spec);
    double a = r.get("a"), b = r.get("b");
    g.fiber_dim = 2;
    // the two Pauli directions do not commute, so derivatives of the
    // exponential stay with the central-difference default
    g.eval = [a, b, I](const Vec& p) {
      double alpha = a * std::sin(2 * M_PI * p[0]);
      double beta = b * std::cos(2 * M_PI * p[1]);
      return expm_antihermitian(CMat(I * (alpha * pauli(1) + beta * pauli(3))));
    };
    return g;
  }
  throw CatalogueError("gauge family '" + family + "' has no builder");
}

inline TestFunction make_function(const ChartDomain& dom, const std::string& family,
                                  const std::string& id, const CatalogueParams& params) {
  const FamilySpec& spec = detail::family_spec("function", family);
  detail::check_chart(dom, spec);
  detail::ParamReader r(spec, params);
  TestFunction f;
  f.id = id;
  const Complex I = detail::kCatI;

  if (family == "constant-function") {
    Complex v(r.get("re"), r.get("im"));
    f.eval = [v](const Vec&) { return v; };
    return f;
  }
  if (family == "trig-function") {
    int kx, ky;
    if (dom.topology == Topology::Torus) {
      detail::check_unit_wave(dom, spec);
      kx = r.get_integer("kx");
      ky = r.get_integer("ky");
    } else {
      kx = static_cast<int>(std::lround(r.get("kx")));
      ky = static_cast<int>(std::lround(r.get("ky")));
    }
    Complex amp(r.get("re"), r.get("im"));
    f.eval = [amp, kx, ky, I](const Vec& m) {
      return amp * std::exp(I * (2 * M_PI * (kx * m[0] + ky * m[1])));
    };
    return f;
  }
  if (family == "bump-function") {
    Vec c = detail::params_vec(r, dom.dim, "cx", "cy", "cz");
    double R = r.get("radius");
    if (!(R > 0.0)) throw CatalogueError("bump-function radius must be positive");
    Complex amp(r.get("re"), r.get("im"));
    ChartDomain dcopy = dom;
    f.eval = [dcopy, c, R, amp](const Vec& x) {
      double u = dcopy.min_image(Vec(x - c)).squaredNorm() / (R * R);
      return amp * detail::catalogue_bump(u);
    };
    f.support = SupportBall{c, R};
    return f;
  }
  throw CatalogueError("function family '" + family + "' has no builder");
}

}  // namespace holoflow
