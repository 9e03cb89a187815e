// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/representation.hpp"

namespace holoflow {

// Pointwise U(n)-valued gauge transform.  Smooth catalogue families carry an
// eval everywhere on the chart (and optionally analytic derivatives);
// measurable families sampled on a grid are marked non-smooth and may only
// act on sections, never on connection 1-forms.
struct GaugeTransform {
  std::string id;
  int fiber_dim = 1;
  bool smooth = true;
  std::function<CMat(const Vec&)> eval;
  // optional analytic partials du[k] = d u / d x_k; central differences otherwise
  std::function<void(const Vec&, std::array<CMat, 3>&)> partials;
};

// max over sample nodes of ||u(m)† u(m) - I||.
inline double gauge_unitarity_defect(const GaugeTransform& g, const GridSpec& grid) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < grid.total; ++i) {
    worst = std::max(worst, unitarity_defect(g.eval(grid.node(i))));
  }
  return worst;
}

namespace detail {

inline CMat anti_hermitian_part(const CMat& M) { return 0.5 * (M - CMat(M.adjoint())); }

}  // namespace detail

struct GaugeOptions {
  double deriv_offset_rel = 5e-5;  // central-difference offset, relative to chart scale
};

// A'_k = u A_k u† + u d_k(u†), projected back onto anti-Hermitian matrices
// (the projection removes the O(offset^2) Hermitian contamination of the
// difference quotient; for exact derivatives u d(u†) is anti-Hermitian
// identically).  With this convention Hol(gamma, u.nabla) =
// u(end) Hol(gamma, nabla) u(start)†.
inline SmoothConnection gauge_transform_connection(const ChartDomain& dom, const GaugeTransform& g,
                                                   const SmoothConnection& nabla,
                                                   const GaugeOptions& opt = {}) {
  if (!g.smooth) {
    throw NonDifferentiableGaugeError("gauge transform '" + g.id + "' is grid-sampled; it cannot act on a 1-form");
  }
  if (g.fiber_dim != nabla.fiber_dim) {
    throw CatalogueError("gauge transform and connection fiber dimensions differ");
  }
  SmoothConnection out;
  out.id = g.id + "." + nabla.id;
  out.fiber_dim = nabla.fiber_dim;
  out.dim = nabla.dim;
  double eps = opt.deriv_offset_rel * std::max(1.0, dom.scale());
  // copies so the returned connection owns its closures
  out.components = [dom, g, nabla, eps](const Vec& m, OneForm& A) {
    nabla.components(m, A);
    CMat u = g.eval(dom.wrap(m));
    CMat udag = u.adjoint();
    std::array<CMat, 3> du;
    if (g.partials) {
      g.partials(dom.wrap(m), du);
    } else {
      for (int k = 0; k < nabla.dim; ++k) {
        Vec ep = m, em = m;
        ep[k] += eps;
        em[k] -= eps;
        du[k] = (g.eval(dom.wrap(ep)) - g.eval(dom.wrap(em))) / (2.0 * eps);
      }
    }
    for (int k = 0; k < nabla.dim; ++k) {
      // u d_k(u†) = -(d_k u) u† for unitary u
      A[k] = detail::anti_hermitian_part(CMat(u * A[k] * udag - du[k] * udag));
    }
  };
  return out;
}

// Pointwise product gauge (uv)(m) = u(m) v(m).
inline GaugeTransform gauge_product(const GaugeTransform& u, const GaugeTransform& v) {
  if (u.fiber_dim != v.fiber_dim) throw CatalogueError("gauge product: fiber dimensions differ");
  GaugeTransform w;
  w.id = u.id + "." + v.id;
  w.fiber_dim = u.fiber_dim;
  w.smooth = u.smooth && v.smooth;
  auto ue = u.eval;
  auto ve = v.eval;
  w.eval = [ue, ve](const Vec& m) { return CMat(ue(m) * ve(m)); };
  if (u.partials && v.partials) {
    auto up = u.partials;
    auto vp = v.partials;
    w.partials = [ue, ve, up, vp](const Vec& m, std::array<CMat, 3>& d) {
      std::array<CMat, 3> du, dv;
      up(m, du);
      vp(m, dv);
      CMat umat = ue(m), vmat = ve(m);
      for (int k = 0; k < 3; ++k) {
        if (du[k].rows() > 0 && dv[k].rows() > 0) d[k] = CMat(du[k] * vmat + umat * dv[k]);
      }
    };
  }
  return w;
}

// || Hol(gamma, u.nabla) - u(end) Hol(gamma, nabla) u(start)† ||.
inline double holonomy_covariance_check(const ChartDomain& dom, const GaugeTransform& g,
                                        const SmoothConnection& nabla, const Curve& gamma,
                                        const GaugeOptions& opt = {}) {
  SmoothConnection trans = gauge_transform_connection(dom, g, nabla, opt);
  CMat lhs = holonomy(dom, trans, gamma).matrix;
  CMat u1 = g.eval(dom.wrap(gamma.end()));
  CMat u0 = g.eval(dom.wrap(gamma.start()));
  CMat rhs = u1 * holonomy(dom, nabla, gamma).matrix * u0.adjoint();
  return operator_norm(CMat(lhs - rhs));
}

// tr Hol(loop): the computable gauge invariant.  Open curves are rejected,
// traces of open-path holonomies are basepoint-dependent.
inline Complex wilson_loop_trace(const ChartDomain& dom, const SmoothConnection& nabla, const Curve& loop,
                                 double tol_rel = 1e-7) {
  if (dom.distance(loop.start(), loop.end()) > tol_rel * std::max(1.0, dom.scale())) {
    throw OpenCurveError("wilson_loop_trace needs a closed loop");
  }
  return holonomy(dom, nabla, loop).matrix.trace();
}

// Multiplication by u(m) as a grid operator.
inline OpPtr gauge_mult_op(const GaugeTransform& g, const GridPtr& grid) {
  std::vector<CMat> blocks(grid->total);
  for (std::int64_t i = 0; i < grid->total; ++i) blocks[i] = g.eval(grid->domain.wrap(grid->node(i)));
  return std::make_shared<MatMultOp>(grid, g.fiber_dim, std::move(blocks));
}

struct IntertwinerResidual {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> per_element;
};

// max over test elements of the family residual of
// U phi_{nabla2}(a) U† - phi_{nabla1}(a); zero when nabla1 is the gauge
// transform of nabla2 by u, since conjugation by the pointwise unitary is
// exactly what the transformed transport does in the continuum.
inline IntertwinerResidual intertwiner_residual(RepresentationContext& ctx, const GaugeTransform& g,
                                                const SmoothConnection& nabla1, const SmoothConnection& nabla2,
                                                const std::vector<AlgebraElement>& test_elements,
                                                const GridPtr& grid, int family_count = 4,
                                                std::uint64_t seed = 17) {
  if (nabla1.fiber_dim != nabla2.fiber_dim || g.fiber_dim != nabla1.fiber_dim) {
    throw CatalogueError("intertwiner_residual: fiber dimensions differ");
  }
  OpPtr U = gauge_mult_op(g, grid);
  OpPtr Udag = op_adjoint(U);
  auto family = make_smooth_family(grid, g.fiber_dim, family_count, seed);
  IntertwinerResidual out;
  for (const auto& a : test_elements) {
    OpPtr lhs = op_compose(U, op_compose(represent_element(ctx, nabla2, a, grid).op, Udag));
    OpPtr rhs = represent_element(ctx, nabla1, a, grid).op;
    double r = residual_on_family(*op_sub(lhs, rhs), family);
    out.per_element.emplace_back(describe(a), r);
    out.value = std::max(out.value, r);
  }
  return out;
}

}  // namespace holoflow
