// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/geometry.hpp"

#include <Eigen/SVD>

#include <array>
#include <cmath>

namespace holoflow {

// Components A_mu(m) of a Lie-algebra-valued 1-form, one n x n matrix per
// chart axis.
using OneForm = std::array<CMat, 3>;

// Unitary connection on a rank-n hermitian bundle, n in {1, 2}: the 1-form
// components must be anti-Hermitian at every point (checked by sampling in
// the test suite, by construction in the catalogue).
struct SmoothConnection {
  std::string id;
  int fiber_dim = 1;
  int dim = 2;
  std::function<void(const Vec&, OneForm&)> components;

  // A(m)(disp) = sum_mu disp_mu A_mu(m)
  CMat contract(const Vec& m, const Vec& disp) const {
    OneForm c;
    components(m, c);
    CMat out = disp[0] * c[0];
    for (int a = 1; a < dim; ++a) out += disp[a] * c[a];
    return out;
  }
};

struct HolonomyResult {
  CMat matrix;
  std::string curve_id;
  std::string connection_id;
};

inline CMat pauli(int k) {
  CMat s(2, 2);
  const Complex I(0.0, 1.0);
  switch (k) {
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, -I, I, 0; break;
    case 3: s << 1, 0, 0, -1; break;
    default: throw NumericError("pauli index must be 1, 2 or 3");
  }
  return s;
}

// Closed-form exponential of an anti-Hermitian 1x1 or 2x2 matrix.
// Writing M = i(h0 I + a.sigma) with real h0, a, we have
// exp(M) = e^{i h0} (cos r I + i sinc(r) a.sigma), r = |a|.
inline CMat expm_antihermitian(const CMat& M) {
  int n = static_cast<int>(M.rows());
  if (n == 1) {
    CMat out(1, 1);
    out(0, 0) = std::exp(M(0, 0));
    return out;
  }
  const Complex I(0.0, 1.0);
  // H = -iM is Hermitian.
  double h0 = 0.5 * (M(0, 0).imag() + M(1, 1).imag());
  double a3 = 0.5 * (M(0, 0).imag() - M(1, 1).imag());
  Complex h01 = -I * M(0, 1);
  double a1 = h01.real();
  double a2 = -h01.imag();
  double r = std::sqrt(a1 * a1 + a2 * a2 + a3 * a3);
  double c = std::cos(r);
  double sinc = (r < 1e-8) ? 1.0 - r * r / 6.0 : std::sin(r) / r;
  Complex ph = std::exp(I * h0);
  CMat out(2, 2);
  out(0, 0) = ph * (c + I * sinc * a3);
  out(0, 1) = ph * (I * sinc * (a1 - I * a2));
  out(1, 0) = ph * (I * sinc * (a1 + I * a2));
  out(1, 1) = ph * (c - I * sinc * a3);
  return out;
}

// Nearest unitary in Frobenius norm (polar factor).
inline CMat polar_unitarize(const CMat& M) {
  int n = static_cast<int>(M.rows());
  if (n == 1) {
    CMat out(1, 1);
    double r = std::abs(M(0, 0));
    out(0, 0) = (r == 0.0) ? Complex(1.0, 0.0) : M(0, 0) / r;
    return out;
  }
  Eigen::Matrix2cd A = M;
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2cd U = svd.matrixU() * svd.matrixV().adjoint();
  return CMat(U);
}

inline double operator_norm(const CMat& M) {
  if (M.rows() == 1) return std::abs(M(0, 0));
  Eigen::Matrix2cd A = M;
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(A);
  return svd.singularValues()(0);
}

inline double unitarity_defect(const CMat& U) {
  CMat D = U.adjoint() * U;
  D -= CMat::Identity(U.rows(), U.cols());
  return operator_norm(D);
}

namespace detail {

// One midpoint-rule transport factor for the segment p -> q.
inline CMat transport_segment(const ChartDomain& dom, const SmoothConnection& nabla, const Vec& p,
                              const Vec& q) {
  Vec delta = dom.min_image(q - p);
  Vec mid = dom.wrap(p + 0.5 * delta);
  return expm_antihermitian(CMat(-nabla.contract(mid, delta)));
}

}  // namespace detail

// Parallel transport along gamma: solves U'(t) = -A(gamma(t))(gamma'(t)) U(t),
// U(0) = I, as the path-ordered product of per-segment midpoint exponentials
// (2nd order in the sample spacing).  Later segments act on the left.  The
// assembled product is snapped back to the unitary group by polar projection.
inline HolonomyResult holonomy(const ChartDomain& dom, const SmoothConnection& nabla, const Curve& gamma) {
  int n = nabla.fiber_dim;
  CMat U = CMat::Identity(n, n);
  for (std::size_t k = 0; k + 1 < gamma.points.size(); ++k) {
    U = detail::transport_segment(dom, nabla, gamma.points[k], gamma.points[k + 1]) * U;
  }
  return HolonomyResult{polar_unitarize(U), gamma.id, nabla.id};
}

// || Hol(g1 o g2) - Hol(g1) Hol(g2) ||, gamma2 traversed first.  This pins
// the composition convention for the whole library.
inline double holonomy_compose_check(const ChartDomain& dom, const SmoothConnection& nabla,
                                     const Curve& gamma1, const Curve& gamma2,
                                     double endpoint_tol = 1e-7) {
  if (dom.distance(gamma2.end(), gamma1.start()) > endpoint_tol * std::max(1.0, dom.scale())) {
    throw EndpointMismatchError("holonomy_compose_check: end of gamma2 does not meet start of gamma1");
  }
  Curve joined;
  joined.id = gamma2.id + ";" + gamma1.id;
  joined.params.reserve(gamma1.size() + gamma2.size());
  joined.points.reserve(gamma1.size() + gamma2.size());
  for (std::size_t i = 0; i < gamma2.size(); ++i) {
    joined.params.push_back(0.5 * gamma2.params[i]);
    joined.points.push_back(gamma2.points[i]);
  }
  for (std::size_t i = 1; i < gamma1.size(); ++i) {
    joined.params.push_back(0.5 + 0.5 * gamma1.params[i]);
    joined.points.push_back(gamma1.points[i]);
  }
  CMat lhs = holonomy(dom, nabla, joined).matrix;
  CMat rhs = holonomy(dom, nabla, gamma1).matrix * holonomy(dom, nabla, gamma2).matrix;
  return operator_norm(CMat(lhs - rhs));
}

// Axis-aligned rectangular loop in the (ax0, ax1) coordinate plane, corner
// at `corner`, side lengths sides[0], sides[1].  Closed: last sample equals
// the first exactly.
inline Curve rectangle_loop(const ChartDomain& dom, const Vec& corner, int ax0, int ax1,
                            const std::array<double, 2>& sides, bool counterclockwise,
                            int samples_per_side) {
  Curve c;
  c.id = "rect";
  int S = std::max(1, samples_per_side);
  Vec e0 = Vec::Zero(dom.dim);
  Vec e1 = Vec::Zero(dom.dim);
  e0[ax0] = sides[0];
  e1[ax1] = sides[1];
  std::array<Vec, 4> corners = {corner, corner + e0, corner + e0 + e1, corner + e1};
  if (!counterclockwise) std::swap(corners[1], corners[3]);
  c.params.reserve(4 * S + 1);
  c.points.reserve(4 * S + 1);
  for (int side = 0; side < 4; ++side) {
    const Vec& a = corners[side];
    const Vec& b = corners[(side + 1) % 4];
    for (int s = 0; s < S; ++s) {
      double u = static_cast<double>(s) / S;
      c.params.push_back((side + u) / 4.0);
      c.points.push_back(a + u * (b - a));
    }
  }
  c.params.push_back(1.0);
  c.points.push_back(corners[0]);
  return c;
}

struct StokesCheck {
  double phase = 0.0;         // arg Hol(loop)
  double oracle_phase = 0.0;  // -flux mod 2pi
  double flux = 0.0;          // integral of the curvature over the enclosed region, orientation-signed
};

namespace detail {

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

// u(1) curvature F = d_x a_y - d_y a_x at m, where A_mu = i a_mu, in the
// (ax0, ax1) plane, by central differences.
inline double u1_curvature(const ChartDomain& dom, const SmoothConnection& nabla, const Vec& m, int ax0,
                           int ax1, double off) {
  OneForm c;
  auto a_comp = [&](const Vec& p, int mu) {
    nabla.components(dom.wrap(p), c);
    return c[mu](0, 0).imag();
  };
  Vec px = m, qx = m, py = m, qy = m;
  px[ax0] += off;
  qx[ax0] -= off;
  py[ax1] += off;
  qy[ax1] -= off;
  return (a_comp(px, ax1) - a_comp(qx, ax1)) / (2 * off) - (a_comp(py, ax0) - a_comp(qy, ax0)) / (2 * off);
}

}  // namespace detail

// Abelian Stokes oracle: the holonomy phase of a closed u(1) loop must equal
// minus the curvature flux through the enclosed region, mod 2 pi.  The flux
// side is a 2-D quadrature of the curvature.  Axis-aligned rectangular loops
// get the exact region (composite Simpson over the rectangle); general loops
// fall back to winding-number-weighted midpoint quadrature over the bounding
// box, which carries the orientation sign automatically but converges slower
// near the boundary.
inline StokesCheck loop_phase_stokes_check(const ChartDomain& dom, const SmoothConnection& nabla,
                                           const Curve& loop, int quad_points = 65) {
  if (nabla.fiber_dim != 1) throw NumericError("loop_phase_stokes_check needs a u(1) connection");
  double close_tol = 1e-9 * std::max(1.0, dom.scale());
  if (!loop.is_closed(dom, close_tol)) throw OpenCurveError("loop_phase_stokes_check: curve is not closed");

  // Identify the coordinate plane of the loop (axes with nonzero span).
  int d = dom.dim;
  Vec lo = loop.points.front(), hi = loop.points.front();
  for (const auto& p : loop.points) {
    for (int a = 0; a < d; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int ax0 = -1, ax1 = -1;
  for (int a = 0; a < d; ++a) {
    if (hi[a] - lo[a] > close_tol) {
      if (ax0 < 0)
        ax0 = a;
      else if (ax1 < 0)
        ax1 = a;
      else
        throw NumericError("loop_phase_stokes_check: loop is not planar along coordinate axes");
    }
  }
  if (ax0 < 0 || ax1 < 0) throw NumericError("loop_phase_stokes_check: degenerate loop");

  double phase = std::arg(holonomy(dom, nabla, loop).matrix(0, 0));

  // Signed area (shoelace) fixes the orientation.
  double area2 = 0.0;
  for (std::size_t k = 0; k + 1 < loop.points.size(); ++k) {
    const Vec& p = loop.points[k];
    const Vec& q = loop.points[k + 1];
    area2 += p[ax0] * q[ax1] - q[ax0] * p[ax1];
  }
  double orient = (area2 >= 0.0) ? 1.0 : -1.0;

  double fd_off = 1e-5 * std::max(1.0, dom.scale());
  int Q = quad_points | 1;  // Simpson needs an odd count

  // Rectangle fast path: every sample on the bounding-box boundary.
  bool rect = true;
  double edge_tol = 1e-7 * std::max(1.0, dom.scale());
  for (const auto& p : loop.points) {
    bool on0 = std::abs(p[ax0] - lo[ax0]) < edge_tol || std::abs(p[ax0] - hi[ax0]) < edge_tol;
    bool on1 = std::abs(p[ax1] - lo[ax1]) < edge_tol || std::abs(p[ax1] - hi[ax1]) < edge_tol;
    if (!(on0 || on1)) {
      rect = false;
      break;
    }
  }

  double flux = 0.0;
  Vec probe = loop.points.front();
  if (rect) {
    double hx = (hi[ax0] - lo[ax0]) / (Q - 1);
    double hy = (hi[ax1] - lo[ax1]) / (Q - 1);
    auto simpson_w = [Q](int i) { return (i == 0 || i == Q - 1) ? 1.0 : ((i % 2) ? 4.0 : 2.0); };
    for (int i = 0; i < Q; ++i) {
      for (int j = 0; j < Q; ++j) {
        probe[ax0] = lo[ax0] + i * hx;
        probe[ax1] = lo[ax1] + j * hy;
        flux += simpson_w(i) * simpson_w(j) * detail::u1_curvature(dom, nabla, probe, ax0, ax1, fd_off);
      }
    }
    flux *= orient * hx * hy / 9.0;
  } else {
    // Winding-number weights: sum over interior cells of w(x) F(x).
    double hx = (hi[ax0] - lo[ax0]) / Q;
    double hy = (hi[ax1] - lo[ax1]) / Q;
    for (int i = 0; i < Q; ++i) {
      for (int j = 0; j < Q; ++j) {
        probe[ax0] = lo[ax0] + (i + 0.5) * hx;
        probe[ax1] = lo[ax1] + (j + 0.5) * hy;
        double ang = 0.0;
        for (std::size_t k = 0; k + 1 < loop.points.size(); ++k) {
          double vx = loop.points[k][ax0] - probe[ax0];
          double vy = loop.points[k][ax1] - probe[ax1];
          double wx = loop.points[k + 1][ax0] - probe[ax0];
          double wy = loop.points[k + 1][ax1] - probe[ax1];
          ang += std::atan2(vx * wy - vy * wx, vx * wx + vy * wy);
        }
        double w = std::round(ang / (2.0 * M_PI));
        if (w != 0.0) flux += w * detail::u1_curvature(dom, nabla, probe, ax0, ax1, fd_off);
      }
    }
    flux *= hx * hy;
  }

  StokesCheck out;
  out.phase = detail::wrap_angle(phase);
  out.flux = flux;
  out.oracle_phase = detail::wrap_angle(-flux);
  return out;
}

}  // namespace holoflow
