// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/geometry.hpp"

#include <memory>
#include <numeric>

namespace holoflow {

// Uniform tensor grid over the chart.  Torus axes carry N nodes at
// lo + i*h (h = L/N, periodic wrap); box axes use cell centers
// lo + (i+1/2)*h, which keeps interpolation stencils and quadrature away
// from the boundary.  Node storage order: axis 0 fastest.
struct GridSpec {
  ChartDomain domain;
  std::array<int, 3> res{{1, 1, 1}};
  std::array<double, 3> h{{1.0, 1.0, 1.0}};
  std::int64_t total = 1;
  Eigen::VectorXd weights;  // quadrature weight per node: density * prod(h)

  static constexpr std::int64_t kDefaultCap = std::int64_t(1) << 24;

  GridSpec(const ChartDomain& dom, std::array<int, 3> resolution, std::int64_t cap = kDefaultCap)
      : domain(dom), res(resolution) {
    total = 1;
    for (int a = 0; a < dom.dim; ++a) {
      if (res[a] < 4) throw CatalogueError("grid resolution must be at least 4 per axis");
      h[a] = dom.side(a) / res[a];
      total *= res[a];
    }
    for (int a = dom.dim; a < 3; ++a) res[a] = 1;
    if (total > cap) {
      throw CatalogueError("grid of " + std::to_string(total) + " nodes exceeds the configured cap of " +
                           std::to_string(cap));
    }
    double cell = 1.0;
    for (int a = 0; a < dom.dim; ++a) cell *= h[a];
    weights.resize(total);
    for (std::int64_t i = 0; i < total; ++i) {
      double w = cell * dom.metric.density(node(i));
      if (!(w > 0.0)) throw CatalogueError("non-positive quadrature weight; metric density must be > 0");
      weights[i] = w;
    }
  }

  double axis_origin(int a) const {
    return domain.topology == Topology::Torus ? domain.extent[a].lo : domain.extent[a].lo + 0.5 * h[a];
  }

  Vec node(std::int64_t idx) const {
    Vec p(domain.dim);
    for (int a = 0; a < domain.dim; ++a) {
      std::int64_t i = idx % res[a];
      idx /= res[a];
      p[a] = axis_origin(a) + i * h[a];
    }
    return p;
  }

  std::int64_t index(const std::array<int, 3>& mi) const {
    std::int64_t idx = 0;
    for (int a = domain.dim - 1; a >= 0; --a) idx = idx * res[a] + mi[a];
    return idx;
  }

  std::string key() const {
    std::string k = domain.metric.id + ":" + (domain.topology == Topology::Torus ? "t" : "b");
    for (int a = 0; a < domain.dim; ++a) k += ":" + std::to_string(res[a]);
    return k;
  }
};

using GridPtr = std::shared_ptr<const GridSpec>;

struct GridSection {
  GridPtr grid;
  int fiber = 1;
  Eigen::VectorXcd values;  // fiber-major per node: values[fiber*idx + c]

  GridSection() = default;
  GridSection(GridPtr g, int n) : grid(std::move(g)), fiber(n), values(Eigen::VectorXcd::Zero(fiber * grid->total)) {}

  Complex inner(const GridSection& other) const {
    Complex s = 0.0;
    for (std::int64_t i = 0; i < grid->total; ++i) {
      Complex block = 0.0;
      for (int c = 0; c < fiber; ++c) {
        block += std::conj(values[fiber * i + c]) * other.values[fiber * i + c];
      }
      s += grid->weights[i] * block;
    }
    return s;
  }

  double norm() const { return std::sqrt(std::abs(inner(*this).real())); }
};

// Samples a per-component smooth function into a section.
inline GridSection sample_section(const GridPtr& grid, int fiber,
                                  const std::function<CVec(const Vec&)>& func) {
  GridSection s(grid, fiber);
  for (std::int64_t i = 0; i < grid->total; ++i) {
    CVec v = func(grid->node(i));
    for (int c = 0; c < fiber; ++c) s.values[fiber * i + c] = v[c];
  }
  return s;
}

// Tensor-product cubic Lagrange stencil at an off-grid point: up to 4^d
// node/weight pairs.  Torus axes wrap; box axes drop out-of-range nodes
// (zero extension).  Weights sum to 1 on interior points and the stencil is
// exact (single unit weight) when the target sits on a node.
struct Stencil {
  int count = 0;
  std::array<std::int64_t, 64> idx;
  std::array<double, 64> w;
};

inline void build_stencil(const GridSpec& g, const Vec& p, Stencil& out) {
  int d = g.domain.dim;
  std::array<std::array<double, 4>, 3> wts;
  std::array<std::array<std::int64_t, 4>, 3> ids;
  for (int a = 0; a < d; ++a) {
    double u = (p[a] - g.axis_origin(a)) / g.h[a];
    double base = std::floor(u);
    double f = u - base;
    // Lagrange basis on stencil offsets {-1, 0, 1, 2}
    wts[a][0] = -f * (f - 1.0) * (f - 2.0) / 6.0;
    wts[a][1] = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    wts[a][2] = -(f + 1.0) * f * (f - 2.0) / 2.0;
    wts[a][3] = (f + 1.0) * f * (f - 1.0) / 6.0;
    std::int64_t b = static_cast<std::int64_t>(base);
    for (int s = 0; s < 4; ++s) {
      std::int64_t i = b - 1 + s;
      if (g.domain.topology == Topology::Torus) {
        std::int64_t N = g.res[a];
        i = ((i % N) + N) % N;
      } else if (i < 0 || i >= g.res[a]) {
        i = -1;  // zero extension
      }
      ids[a][s] = i;
    }
  }
  out.count = 0;
  int combos = 1;
  for (int a = 0; a < d; ++a) combos *= 4;
  std::array<std::int64_t, 3> stride{{1, g.res[0], std::int64_t(g.res[0]) * g.res[1]}};
  for (int c = 0; c < combos; ++c) {
    int digits = c;  // axis-a stencil offset = (c / 4^a) % 4
    double weight = 1.0;
    std::int64_t index = 0;
    bool drop = false;
    for (int a = 0; a < d; ++a) {
      int dg = digits % 4;
      digits /= 4;
      std::int64_t ia = ids[a][dg];
      if (ia < 0) {
        drop = true;
        break;
      }
      weight *= wts[a][dg];
      index += ia * stride[a];
    }
    if (drop || weight == 0.0) continue;
    out.idx[out.count] = index;
    out.w[out.count] = weight;
    ++out.count;
  }
}

inline CVec interpolate(const GridSection& s, const Stencil& st) {
  CVec v = CVec::Zero(s.fiber);
  for (int k = 0; k < st.count; ++k) {
    for (int c = 0; c < s.fiber; ++c) v[c] += st.w[k] * s.values[s.fiber * st.idx[k] + c];
  }
  return v;
}

}  // namespace holoflow
