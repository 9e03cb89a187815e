// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/common.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <utility>

namespace holoflow {

enum class Topology { Box, Torus };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

// Riemannian data on the chart.  tensor == nullptr means the flat metric;
// density defaults to sqrt(det g).
struct Metric {
  std::string id = "flat";
  std::function<RMat(const Vec&)> tensor;
  std::function<double(const Vec&)> density_fn;

  RMat tensor_at(const Vec& m) const {
    if (tensor) return tensor(m);
    return RMat::Identity(m.size(), m.size());
  }

  double density(const Vec& m) const {
    if (density_fn) return density_fn(m);
    if (tensor) return std::sqrt(tensor(m).determinant());
    return 1.0;
  }
};

// A single global chart: an axis-aligned box, either with true boundary
// (fields must have compact support inside) or glued into a flat torus.
struct ChartDomain {
  int dim = 2;
  Topology topology = Topology::Torus;
  std::array<Interval, 3> extent{{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}};
  Metric metric;

  double side(int axis) const { return extent[axis].length(); }

  double scale() const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s = std::max(s, side(a));
    return s;
  }

  Vec wrap(Vec p) const {
    if (topology == Topology::Torus) {
      for (int a = 0; a < dim; ++a) {
        double L = side(a);
        p[a] = extent[a].lo + std::fmod(std::fmod(p[a] - extent[a].lo, L) + L, L);
      }
    }
    return p;
  }

  // Shortest representative of a displacement; identity on box charts.
  Vec min_image(Vec d) const {
    if (topology == Topology::Torus) {
      for (int a = 0; a < dim; ++a) {
        double L = side(a);
        d[a] -= L * std::round(d[a] / L);
      }
    }
    return d;
  }

  double distance(const Vec& p, const Vec& q) const { return min_image(p - q).norm(); }

  bool inside(const Vec& p, double margin = 0.0) const {
    if (topology == Topology::Torus) return true;
    for (int a = 0; a < dim; ++a) {
      if (p[a] < extent[a].lo - margin || p[a] > extent[a].hi + margin) return false;
    }
    return true;
  }

  Vec center() const {
    Vec c(dim);
    for (int a = 0; a < dim; ++a) c[a] = 0.5 * (extent[a].lo + extent[a].hi);
    return c;
  }
};

struct VectorFieldSpec {
  std::string id;
  std::function<Vec(const Vec&)> eval;
  // Analytic divergence where the catalogue knows it; the flow machinery
  // falls back to central differences when absent.
  std::function<double(const Vec&)> divergence;

  double div_at(const ChartDomain& dom, const Vec& m, double offset) const {
    if (divergence) return divergence(m);
    double s = 0.0;
    for (int a = 0; a < dom.dim; ++a) {
      Vec p = m, q = m;
      p[a] += offset;
      q[a] -= offset;
      s += (eval(dom.wrap(p))[a] - eval(dom.wrap(q))[a]) / (2.0 * offset);
    }
    return s;
  }
};

struct Curve {
  std::vector<double> params;  // strictly increasing in [0,1]
  std::vector<Vec> points;
  std::string id;

  const Vec& start() const { return points.front(); }
  const Vec& end() const { return points.back(); }
  std::size_t size() const { return points.size(); }

  Curve reversed() const {
    Curve r;
    r.id = id.empty() ? std::string() : id + "~rev";
    r.params.reserve(params.size());
    r.points.assign(points.rbegin(), points.rend());
    for (auto it = params.rbegin(); it != params.rend(); ++it) r.params.push_back(1.0 - *it);
    return r;
  }

  bool is_closed(const ChartDomain& dom, double tol) const {
    return dom.distance(start(), end()) <= tol;
  }
};

struct FlowOptions {
  double step = 1.0 / 256.0;          // integrator substep in flow time
  double jacobian_offset_rel = 1e-4;  // central-difference offset, relative to chart scale
};

namespace detail {

inline void check_box_escape(const ChartDomain& dom, const VectorFieldSpec& X, const Vec& p) {
  if (dom.topology == Topology::Torus) return;
  double margin = 1e-9 * dom.scale();
  if (dom.inside(p, margin)) return;
  if (X.eval(p).norm() > 1e-12) {
    throw TrajectoryEscapeError("flow trajectory left box domain at a point where the field is nonzero (field '" +
                                X.id + "')");
  }
}

}  // namespace detail

// exp_t(X)(m) by classical RK4 with fixed substep.  On the torus the state
// stays unwrapped (continuous trajectory); the field is evaluated on wrapped
// representatives.  `sink`, when given, receives every accepted substep
// point, m first.
inline Vec flow_at(const ChartDomain& dom, const VectorFieldSpec& X, Vec m, double t,
                   const FlowOptions& opt = {},
                   const std::function<void(const Vec&)>& sink = nullptr) {
  auto f = [&](const Vec& p) { return X.eval(dom.wrap(p)); };
  int n = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opt.step)));
  double dt = t / n;
  if (sink) sink(m);
  for (int i = 0; i < n; ++i) {
    Vec k1 = f(m);
    Vec k2 = f(m + (0.5 * dt) * k1);
    Vec k3 = f(m + (0.5 * dt) * k2);
    Vec k4 = f(m + dt * k3);
    m += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::check_box_escape(dom, X, m);
    if (sink) sink(m);
  }
  return m;
}

// Same trajectory plus the Liouville volume integral: returns
// (exp_t(X)(m), ∫₀ᵗ div X(x(s)) ds), so det D(exp_t X)(m) = exp(logdet).
inline std::pair<Vec, double> flow_at_logdet(const ChartDomain& dom, const VectorFieldSpec& X, Vec m,
                                             double t, const FlowOptions& opt = {},
                                             const std::function<void(const Vec&)>& sink = nullptr) {
  double off = opt.jacobian_offset_rel * dom.scale();
  auto f = [&](const Vec& p) { return X.eval(dom.wrap(p)); };
  auto g = [&](const Vec& p) { return X.div_at(dom, dom.wrap(p), off); };
  int n = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opt.step)));
  double dt = t / n;
  double logdet = 0.0;
  if (sink) sink(m);
  for (int i = 0; i < n; ++i) {
    Vec k1 = f(m);
    double d1 = g(m);
    Vec p2 = m + (0.5 * dt) * k1;
    Vec k2 = f(p2);
    double d2 = g(p2);
    Vec p3 = m + (0.5 * dt) * k2;
    Vec k3 = f(p3);
    double d3 = g(p3);
    Vec p4 = m + dt * k3;
    Vec k4 = f(p4);
    double d4 = g(p4);
    m += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    logdet += (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    detail::check_box_escape(dom, X, m);
    if (sink) sink(m);
  }
  return {m, logdet};
}

// The transport curve of a single flow: oriented from exp₁(X)(m) back to m.
// Built by integrating forward from m and reversing, so the end point is m
// exactly and the start point matches flow_at(X, m, 1) up to integrator
// error.
inline Curve flow_trajectory(const ChartDomain& dom, const VectorFieldSpec& X, const Vec& m, int steps,
                             const FlowOptions& opt = {}) {
  if (steps < 2) throw NumericError("flow_trajectory requires steps >= 2");
  Curve fwd;
  fwd.params.reserve(steps);
  fwd.points.reserve(steps);
  for (int j = 0; j < steps; ++j) fwd.params.push_back(static_cast<double>(j) / (steps - 1));
  Vec x = m;
  fwd.points.push_back(x);
  for (int j = 1; j < steps; ++j) {
    double dt = fwd.params[j] - fwd.params[j - 1];
    x = flow_at(dom, X, x, dt, opt);
    fwd.points.push_back(x);
  }
  Curve out = fwd.reversed();
  out.id = "gamma(" + X.id + ")";
  return out;
}

// |det DΦ(m)| for an arbitrary smooth map Φ, by central differences.  The
// offset is absolute.  Throws if the computed determinant is not strictly
// positive (flows are orientation-preserving, so this flags a
// misconfigured step or offset).
inline double map_jacobian_det(const ChartDomain& dom, const std::function<Vec(const Vec&)>& map,
                               const Vec& m, double offset) {
  int d = dom.dim;
  RMat J(d, d);
  for (int a = 0; a < d; ++a) {
    Vec p = m, q = m;
    p[a] += offset;
    q[a] -= offset;
    Vec dp = map(p);
    Vec dq = map(q);
    Vec diff = dom.min_image(dp - dq);
    for (int r = 0; r < d; ++r) J(r, a) = diff[r] / (2.0 * offset);
  }
  double det = J.determinant();
  if (!(det > 0.0)) {
    throw DegenerateJacobianError("computed flow Jacobian determinant is not positive: " + std::to_string(det));
  }
  return det;
}

}  // namespace holoflow
