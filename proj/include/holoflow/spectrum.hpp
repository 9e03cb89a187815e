// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/discrete.hpp"
#include "holoflow/representation.hpp"

namespace holoflow {

// Irreducibility diagnostics via holonomy-group commutants, and the probe
// comparing the counting-measure norm of a positive combination of linear
// maps against its L2 estimate.

struct HolonomySample {
  Vec basepoint;
  std::vector<Curve> loops;
  std::vector<CMat> matrices;        // holonomy per loop
  std::vector<CMat> group_elements;  // matrices plus seeded pair products and commutators
};

// Rectangle reached from the basepoint by a straight out-and-back tail: the
// holonomy is the rectangle's conjugated by the tail transport.  Plain
// rectangles through one point nearly commute (to leading order they all
// exponentiate the curvature at that point), so these conjugates are what
// actually probes the generated group.
inline Curve lasso_loop(const ChartDomain& dom, const Vec& base, const Vec& offset, int ax0, int ax1,
                        const std::array<double, 2>& sides, bool counterclockwise, int samples_per_side) {
  Curve rect = rectangle_loop(dom, Vec(base + offset), ax0, ax1, sides, counterclockwise, samples_per_side);
  Curve c;
  c.id = "lasso";
  int S = std::max(1, samples_per_side);
  for (int s = 0; s < S; ++s) c.points.push_back(base + (static_cast<double>(s) / S) * offset);
  for (std::size_t k = 0; k + 1 < rect.points.size(); ++k) c.points.push_back(rect.points[k]);
  for (int s = S; s >= 0; --s) c.points.push_back(base + (static_cast<double>(s) / S) * offset);
  c.params.resize(c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    c.params[i] = static_cast<double>(i) / (c.points.size() - 1);
  }
  return c;
}

// Loops through the basepoint: axis-aligned coordinate rectangles of seeded
// sizes and both orientations (these are the flow commutator loops of the
// coordinate shifts), alternating with lassos.  The sample is closed up a
// little by adding products and commutators of random pairs, probing the
// generated subgroup rather than just the generating set.
inline HolonomySample holonomy_group_sample(const ChartDomain& dom, const SmoothConnection& nabla,
                                            const Vec& basepoint, int loop_family_size, std::uint64_t seed,
                                            int samples_per_side = 129) {
  if (loop_family_size < 1) throw CatalogueError("holonomy sample needs at least one loop");
  HolonomySample s;
  s.basepoint = basepoint;
  Rng rng = seeded_rng(seed, "holonomy-sample");
  for (int k = 0; k < loop_family_size; ++k) {
    int ax0 = (dom.dim > 2) ? k % dom.dim : 0;
    int ax1 = (ax0 + 1) % std::max(dom.dim, 2);
    std::array<double, 2> sides{uniform(rng, 0.30, 0.85) * dom.side(ax0),
                                uniform(rng, 0.30, 0.85) * dom.side(ax1)};
    bool ccw = (k % 2 == 0);
    if (k % 2 == 1) {
      Vec offset = Vec::Zero(dom.dim);
      offset[ax0] = uniform(rng, -0.45, 0.45) * dom.side(ax0);
      offset[ax1] = uniform(rng, -0.45, 0.45) * dom.side(ax1);
      s.loops.push_back(lasso_loop(dom, basepoint, offset, ax0, ax1, sides, ccw, samples_per_side));
    } else {
      s.loops.push_back(rectangle_loop(dom, basepoint, ax0, ax1, sides, ccw, samples_per_side));
    }
    s.loops.back().id = "loop@" + std::to_string(k);
    s.matrices.push_back(holonomy(dom, nabla, s.loops.back()).matrix);
  }
  s.group_elements = s.matrices;
  int pairs = std::min<int>(loop_family_size, 6);
  for (int k = 0; k < pairs; ++k) {
    int i = static_cast<int>(uniform(rng, 0.0, 1.0) * s.matrices.size()) % s.matrices.size();
    int j = static_cast<int>(uniform(rng, 0.0, 1.0) * s.matrices.size()) % s.matrices.size();
    const CMat& u = s.matrices[i];
    const CMat& v = s.matrices[j];
    s.group_elements.push_back(CMat(u * v));
    s.group_elements.push_back(CMat(u * v * u.adjoint() * v.adjoint()));
  }
  return s;
}

// Complex dimension of {M : MU = UM for all U}, by the rank of the stacked
// commutation systems.  For one 2x2 fiber this lands in {1, 2, 4}: scalars
// only, a common eigenbasis, or the full matrix algebra.
inline int commutant_dimension(const std::vector<CMat>& mats, double cutoff = 1e-8) {
  if (mats.empty()) throw CatalogueError("commutant of an empty matrix set");
  int n = static_cast<int>(mats[0].rows());
  for (const auto& u : mats) {
    if (u.rows() != n || u.cols() != n) throw CatalogueError("commutant input sizes differ");
  }
  Eigen::MatrixXcd stacked(static_cast<int>(mats.size()) * n * n, n * n);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    stacked.middleRows(static_cast<int>(k) * n * n, n * n) =
        detail::intertwiner_rows(mats[k], mats[k]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
  const auto& sv = svd.singularValues();
  double cut = cutoff * std::max(sv(0), 1.0);
  int dim = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cut) ++dim;
  }
  return dim;
}

enum class ReducibilityKind { Irreducible, ReducibleWithSplitting, Inconclusive };

inline const char* to_string(ReducibilityKind k) {
  switch (k) {
    case ReducibilityKind::Irreducible: return "irreducible";
    case ReducibilityKind::ReducibleWithSplitting: return "reducible-with-splitting";
    default: return "inconclusive";
  }
}

struct IrreducibilityVerdict {
  ReducibilityKind kind = ReducibilityKind::Inconclusive;
  int commutant_dim = 0;
  HolonomySample sample;
  // Populated for reducible-with-splitting: the common eigenbasis and the
  // two abelian 1-forms read off in it.
  CMat eigenbasis;
  std::vector<SmoothConnection> parts;
  double holonomy_offdiag = 0.0;  // leak of the sampled holonomies in the eigenbasis
  double form_offdiag = 0.0;      // leak of the connection 1-form in the eigenbasis
};

namespace detail {

// Generic self-adjoint element of the commutant of `mats`, from the stacked
// nullspace; the carrier of the common eigenbasis when one exists.
inline CMat commutant_self_adjoint(const std::vector<CMat>& mats, int n, double cutoff,
                                   std::uint64_t seed) {
  Eigen::MatrixXcd stacked(static_cast<int>(mats.size()) * n * n, n * n);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    stacked.middleRows(static_cast<int>(k) * n * n, n * n) = intertwiner_rows(mats[k], mats[k]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cut = cutoff * std::max(sv(0), 1.0);
  Rng rng = seeded_rng(seed, "commutant-element");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n * n);
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cut) {
      v += Complex(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)) * svd.matrixV().col(i);
    }
  }
  Eigen::MatrixXcd t = Eigen::Map<Eigen::MatrixXcd>(v.data(), n, n);
  return CMat(0.5 * (t + t.adjoint()));
}

inline double offdiag_max(const CMat& m) {
  double r = 0.0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (i != j) r = std::max(r, std::abs(m(i, j)));
    }
  }
  return r;
}

}  // namespace detail

struct VerdictOptions {
  int budget = 8;
  std::uint64_t seed = 2;
  int samples_per_side = 129;
  // Rank decisions on sampled holonomies must clear the midpoint rule's
  // O(h^2) transport error (~1e-5 at the default resolution), so the verdict
  // runs a coarser cutoff than the 1e-8 used for exact matrix input.  Any
  // splitting claimed under it is re-certified through the 1-form below.
  double commutant_cutoff = 1e-4;
  double holonomy_diag_tol = 1e-4;
  double form_diag_tol = 1e-6;
};

// Schur-style verdict from a finite holonomy sample.  A trivial commutant is
// a certificate of irreducibility.  A larger commutant only ever supports
// reducibility: the verdict upgrades to reducible-with-splitting when the
// common eigenbasis also diagonalizes the connection 1-form itself (checked
// at seeded probe points), which certifies the splitting by construction;
// otherwise the budget is exhausted and the verdict stays inconclusive.
inline IrreducibilityVerdict irreducibility_verdict(const ChartDomain& dom, const SmoothConnection& nabla,
                                                    const Vec& basepoint, const VerdictOptions& opt = {}) {
  IrreducibilityVerdict v;
  v.sample = holonomy_group_sample(dom, nabla, basepoint, opt.budget, opt.seed, opt.samples_per_side);
  if (nabla.fiber_dim == 1) {
    v.kind = ReducibilityKind::Irreducible;  // scalars act irreducibly on a line
    v.commutant_dim = 1;
    return v;
  }
  const int n = nabla.fiber_dim;
  v.commutant_dim = commutant_dimension(v.sample.group_elements, opt.commutant_cutoff);
  if (v.commutant_dim == 1) {
    v.kind = ReducibilityKind::Irreducible;
    return v;
  }

  CMat h = detail::commutant_self_adjoint(v.sample.group_elements, n, opt.commutant_cutoff, opt.seed);
  Eigen::Matrix2cd h2 = h;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(h2);
  v.eigenbasis = CMat(eig.eigenvectors());

  for (const auto& u : v.sample.group_elements) {
    v.holonomy_offdiag =
        std::max(v.holonomy_offdiag, detail::offdiag_max(CMat(v.eigenbasis.adjoint() * u * v.eigenbasis)));
  }
  if (v.holonomy_offdiag > opt.holonomy_diag_tol) {
    v.kind = ReducibilityKind::Inconclusive;  // commutant said reducible but the basis disagrees
    return v;
  }

  // 1-form in the candidate basis at seeded probe points.
  Rng rng = seeded_rng(opt.seed, "split-probes");
  for (int k = 0; k < 48; ++k) {
    Vec p(dom.dim);
    for (int a = 0; a < dom.dim; ++a) p[a] = uniform(rng, dom.extent[a].lo, dom.extent[a].hi);
    OneForm c;
    nabla.components(p, c);
    for (int a = 0; a < dom.dim; ++a) {
      v.form_offdiag =
          std::max(v.form_offdiag, detail::offdiag_max(CMat(v.eigenbasis.adjoint() * c[a] * v.eigenbasis)));
    }
  }
  if (v.form_offdiag > opt.form_diag_tol) {
    v.kind = ReducibilityKind::Inconclusive;
    return v;
  }

  v.kind = ReducibilityKind::ReducibleWithSplitting;
  CMat basis = v.eigenbasis;
  SmoothConnection base = nabla;
  for (int part = 0; part < n; ++part) {
    SmoothConnection u1;
    u1.id = nabla.id + ".part" + std::to_string(part);
    u1.fiber_dim = 1;
    u1.dim = nabla.dim;
    u1.components = [basis, base, part](const Vec& m, OneForm& out) {
      OneForm full;
      base.components(m, full);
      for (int a = 0; a < base.dim; ++a) {
        CMat d = CMat(basis.adjoint() * full[a] * basis);
        CMat slot(1, 1);
        // anti-Hermitian projection keeps the part honestly u(1)
        slot(0, 0) = Complex(0.0, d(part, part).imag());
        out[a] = slot;
      }
    };
    v.parts.push_back(std::move(u1));
  }
  return v;
}

// phi of the original connection against the eigenbasis-conjugated direct
// sum of the split parts, measured on a smooth section family.
class DirectSumOp final : public LinearOperator {
 public:
  DirectSumOp(OpPtr a, OpPtr b) : LinearOperator(a->grid(), 2), a_(std::move(a)), b_(std::move(b)) {
    if (a_->fiber() != 1 || b_->fiber() != 1 || a_->grid()->total != b_->grid()->total) {
      throw CatalogueError("direct sum needs two scalar operators on one grid");
    }
  }

  GridSection apply(const GridSection& x) const override { return run(x, false); }
  GridSection apply_adjoint(const GridSection& x) const override { return run(x, true); }

 private:
  GridSection run(const GridSection& x, bool adj) const {
    check(x);
    GridSection xa(grid_, 1), xb(grid_, 1);
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      xa.values[i] = x.values[2 * i];
      xb.values[i] = x.values[2 * i + 1];
    }
    GridSection ya = adj ? a_->apply_adjoint(xa) : a_->apply(xa);
    GridSection yb = adj ? b_->apply_adjoint(xb) : b_->apply(xb);
    GridSection y(grid_, 2);
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      y.values[2 * i] = ya.values[i];
      y.values[2 * i + 1] = yb.values[i];
    }
    return y;
  }

  OpPtr a_, b_;
};

inline double splitting_reconstruction_residual(RepresentationContext& ctx, const SmoothConnection& nabla,
                                                const IrreducibilityVerdict& verdict, const FlowWord& word,
                                                const GridPtr& grid, int family_count = 4,
                                                std::uint64_t seed = 19) {
  if (verdict.kind != ReducibilityKind::ReducibleWithSplitting || verdict.parts.size() != 2) {
    throw CatalogueError("reconstruction needs a reducible-with-splitting verdict");
  }
  OpPtr full = represent_word(ctx, nabla, word, grid);
  OpPtr sum = std::make_shared<DirectSumOp>(represent_word(ctx, verdict.parts[0], word, grid),
                                            represent_word(ctx, verdict.parts[1], word, grid));
  std::vector<CMat> blocks(grid->total, verdict.eigenbasis);
  OpPtr v = std::make_shared<MatMultOp>(grid, 2, std::move(blocks));
  OpPtr rebuilt = op_compose(v, op_compose(sum, op_adjoint(v)));
  auto family = make_smooth_family(grid, 2, family_count, seed);
  return residual_on_family(*op_sub(full, rebuilt), family);
}

struct NormGapProbeConfig {
  std::vector<double> coefficients;  // all > 0
  std::vector<RMat> elements;        // real matrices acting on the chart, det > 0
  GridPtr grid;                      // centered flat box
  int iters = 40;
  std::uint64_t seed = 5;
};

struct NormGapProbeResult {
  double counting_norm = 0.0;  // sum of the coefficients, exact
  double l2_estimate = 0.0;
  int iters = 0;
  double last_delta = 0.0;
  bool support_leak = false;  // some g^{-1} pushes the inner box past the grid
};

namespace detail {

// (pi(g) xi)(x) = |det g|^{-1/2} xi(g^{-1} x), cut off outside the box by the
// stencil's zero extension, and the whole combination compressed to sections
// supported in the inner half of the box.  The compression can only lower
// the norm, keeping the reported estimate an honest lower bound of ||T||.
class GLCombinationOp final : public LinearOperator {
 public:
  GLCombinationOp(GridPtr grid, std::vector<double> coeff, std::vector<RMat> gs)
      : LinearOperator(std::move(grid), 1), coeff_(std::move(coeff)) {
    for (const auto& g : gs) {
      fwd_.push_back(g);
      inv_.push_back(RMat(g.inverse()));
      scale_.push_back(1.0 / std::sqrt(g.determinant()));
    }
    for (int a = 0; a < grid_->domain.dim; ++a) {
      double c = 0.5 * (grid_->domain.extent[a].lo + grid_->domain.extent[a].hi);
      double q = 0.25 * grid_->domain.side(a);
      inner_lo_[a] = c - q;
      inner_hi_[a] = c + q;
    }
  }

  GridSection apply(const GridSection& x) const override { return run(x, inv_, scale_); }

  GridSection apply_adjoint(const GridSection& x) const override {
    // pi(g)* = pi(g^{-1}): swap the pullback maps and invert the scales
    std::vector<double> s;
    s.reserve(scale_.size());
    for (double v : scale_) s.push_back(1.0 / v);
    return run(x, fwd_, s);
  }

 private:
  GridSection run(const GridSection& x, const std::vector<RMat>& pullback,
                  const std::vector<double>& scale) const {
    check(x);
    GridSection in = x;
    mask(in);
    GridSection out(grid_, 1);
    Stencil st;
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      Vec node = grid_->node(i);
      Complex acc = 0.0;
      for (std::size_t k = 0; k < pullback.size(); ++k) {
        Vec p = pullback[k] * node;
        if (!grid_->domain.inside(p)) continue;
        build_stencil(*grid_, p, st);
        Complex val = 0.0;
        for (int s = 0; s < st.count; ++s) val += st.w[s] * in.values[st.idx[s]];
        acc += coeff_[k] * scale[k] * val;
      }
      out.values[i] = acc;
    }
    mask(out);
    return out;
  }

  void mask(GridSection& s) const {
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      Vec node = grid_->node(i);
      for (int a = 0; a < grid_->domain.dim; ++a) {
        if (node[a] < inner_lo_[a] || node[a] > inner_hi_[a]) {
          s.values[i] = 0.0;
          break;
        }
      }
    }
  }

  std::vector<double> coeff_;
  std::vector<RMat> fwd_, inv_;
  std::vector<double> scale_;
  std::array<double, 3> inner_lo_{}, inner_hi_{};
};

}  // namespace detail

inline NormGapProbeResult norm_gap_probe(const NormGapProbeConfig& cfg) {
  if (cfg.coefficients.empty() || cfg.coefficients.size() != cfg.elements.size()) {
    throw CatalogueError("norm gap probe needs matching coefficient and element lists");
  }
  if (!cfg.grid) throw CatalogueError("norm gap probe needs a grid");
  const ChartDomain& dom = cfg.grid->domain;
  if (dom.topology != Topology::Box) {
    throw CatalogueError("norm gap probe runs on a box chart; linear maps do not act on a torus");
  }
  for (double a : cfg.coefficients) {
    if (!(a > 0.0)) throw CatalogueError("norm gap probe coefficients must be positive");
  }
  for (const auto& g : cfg.elements) {
    if (g.rows() != dom.dim || g.cols() != dom.dim) {
      throw CatalogueError("norm gap probe elements must match the chart dimension");
    }
    if (!(g.determinant() > 0.0)) {
      throw CatalogueError("norm gap probe elements must have positive determinant");
    }
  }

  NormGapProbeResult res;
  // Counting side: every element fixes the origin and the counting measure
  // needs no density correction, so the vector 1_0 is fixed by each pi(g)
  // and the combination acts on it by the plain coefficient sum.  The same
  // sum is the triangle-inequality upper bound for the L2 side.
  for (double a : cfg.coefficients) res.counting_norm += a;

  // Leak check: the inner-half corners must stay inside the box under every
  // inverse map, with a two-cell margin for the interpolation stencil.
  for (const auto& g : cfg.elements) {
    RMat inv = RMat(g.inverse());
    int corners = 1 << dom.dim;
    for (int c = 0; c < corners; ++c) {
      Vec corner(dom.dim);
      for (int a = 0; a < dom.dim; ++a) {
        double ctr = 0.5 * (dom.extent[a].lo + dom.extent[a].hi);
        double q = 0.25 * dom.side(a);
        corner[a] = ctr + (((c >> a) & 1) ? q : -q);
      }
      Vec image = inv * corner;
      for (int a = 0; a < dom.dim; ++a) {
        double margin = 2.0 * cfg.grid->h[a];
        if (image[a] < dom.extent[a].lo + margin || image[a] > dom.extent[a].hi - margin) {
          res.support_leak = true;
        }
      }
    }
  }

  detail::GLCombinationOp op(cfg.grid, cfg.coefficients, cfg.elements);
  NormEstimate est = operator_norm_estimate(op, cfg.iters, cfg.seed, "norm-gap");
  res.l2_estimate = est.value;
  res.iters = est.iters;
  res.last_delta = est.last_delta;
  return res;
}

}  // namespace holoflow
