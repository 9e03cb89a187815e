// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/algebra.hpp"
#include "holoflow/connection.hpp"
#include "holoflow/operator.hpp"

#include <map>
#include <memory>

namespace holoflow {

// k_F(m) = density(F(m)) |det DF(m)| / density(m): the density of the
// pushforward measure relative to the base measure, Jacobian by central
// differences.  Strictly positive (the two measures are equivalent).
inline double radon_nikodym_factor(const ChartDomain& dom, const FieldSet& fields, const FlowWord& F,
                                   const Vec& m, const FlowOptions& opt = {}) {
  double det = flow_jacobian_det(dom, fields, F, m, opt);
  Vec fm = dom.wrap(word_apply(dom, fields, F, m, opt));
  return dom.metric.density(fm) * det / dom.metric.density(dom.wrap(m));
}

// Precomputed action of phi(F) on a grid: per node m, the source point
// F^{-1}(m), the unitarizing factor sqrt(q(m)) with
// q(m) = density(F^{-1}(m)) |det D(F^{-1})(m)| / density(m), and the
// parallel transport along the flow trace from F^{-1}(m) to m.  The factor
// is the Radon-Nikodym factor of the inverse word: that (and not k_F itself)
// is what makes pullback-by-F^{-1} unitary; the Jacobian comes from the
// Liouville divergence integral along the same trajectory the holonomy uses.
struct WordTransport {
  GridPtr grid;
  int fiber = 1;
  std::string connection_id;
  FlowWord word;
  std::vector<double> src;     // dim doubles per node, unwrapped
  std::vector<double> factor;  // sqrt(q) per node
  std::vector<CMat> hol;       // per node

  Vec source(std::int64_t i) const {
    int d = grid->domain.dim;
    Vec p(d);
    for (int a = 0; a < d; ++a) p[a] = src[d * i + a];
    return p;
  }
};

using TransportPtr = std::shared_ptr<const WordTransport>;

struct RepresentationContext {
  ChartDomain domain;
  FieldSet fields;
  FlowOptions flow;
  int threads = 1;

  std::map<std::string, TransportPtr> transport_cache;
  std::map<std::string, std::shared_ptr<const Eigen::VectorXcd>> function_cache;

  std::string transport_key(const std::string& conn_id, const FlowWord& w, const GridSpec& g) const {
    return conn_id + "@" + w.key() + "@" + g.key() + "@" + std::to_string(flow.step);
  }
};

// Builds transports for several connections in one sweep: the backward word
// integration per node is shared, each connection accumulates its own
// path-ordered product along the streamed trajectory.
inline std::vector<TransportPtr> build_word_transports(RepresentationContext& ctx,
                                                       const std::vector<const SmoothConnection*>& conns,
                                                       const FlowWord& word, const GridPtr& grid) {
  std::vector<TransportPtr> out(conns.size());
  std::vector<std::size_t> missing;
  for (std::size_t c = 0; c < conns.size(); ++c) {
    auto it = ctx.transport_cache.find(ctx.transport_key(conns[c]->id, word, *grid));
    if (it != ctx.transport_cache.end()) {
      out[c] = it->second;
    } else {
      missing.push_back(c);
    }
  }
  if (missing.empty()) return out;
  if (word.empty()) throw NumericError("transports are only built for nonempty words");

  const ChartDomain& dom = ctx.domain;
  int d = dom.dim;
  std::int64_t N = grid->total;
  FlowWord winv = word.inverse();

  std::vector<std::shared_ptr<WordTransport>> built;
  for (std::size_t c : missing) {
    auto t = std::make_shared<WordTransport>();
    t->grid = grid;
    t->fiber = conns[c]->fiber_dim;
    t->connection_id = conns[c]->id;
    t->word = word;
    t->src.resize(static_cast<std::size_t>(d) * N);
    t->factor.resize(N);
    t->hol.resize(N);
    built.push_back(std::move(t));
  }

  parallel_for(N, ctx.threads, [&](std::int64_t i) {
    Vec m = grid->node(i);
    std::vector<CMat> U(built.size());
    for (std::size_t b = 0; b < built.size(); ++b) {
      U[b] = CMat::Identity(built[b]->fiber, built[b]->fiber);
    }
    Vec prev = m;
    bool first = true;
    // Backward trajectory m -> F^{-1}(m).  Its segments traversed in
    // reverse are the transport path, so each connection picks up
    // exp(+A(mid) . delta_backward) multiplied on the right.
    auto [srcpt, logdet] = word_apply_logdet(dom, ctx.fields, winv, m, ctx.flow, [&](const Vec& p) {
      if (first) {
        prev = p;
        first = false;
        return;
      }
      Vec delta = p - prev;
      Vec mid = dom.wrap(prev + 0.5 * delta);
      for (std::size_t b = 0; b < built.size(); ++b) {
        U[b] = U[b] * expm_antihermitian(conns[missing[b]]->contract(mid, delta));
      }
      prev = p;
    });

    double q = dom.metric.density(dom.wrap(srcpt)) * std::exp(logdet) / dom.metric.density(dom.wrap(m));
    if (!(q > 0.0) || !std::isfinite(q)) {
      throw DegenerateJacobianError("non-positive unitarizing factor at a grid node");
    }
    double f = std::sqrt(q);
    for (std::size_t b = 0; b < built.size(); ++b) {
      for (int a = 0; a < d; ++a) built[b]->src[d * i + a] = srcpt[a];
      built[b]->factor[i] = f;
      built[b]->hol[i] = polar_unitarize(U[b]);
    }
  });

  for (std::size_t b = 0; b < built.size(); ++b) {
    TransportPtr t = built[b];
    ctx.transport_cache[ctx.transport_key(t->connection_id, word, *grid)] = t;
    out[missing[b]] = t;
  }
  return out;
}

class TransportOp final : public LinearOperator {
 public:
  TransportOp(TransportPtr t, int threads = 1)
      : LinearOperator(t->grid, t->fiber), t_(std::move(t)), threads_(threads) {}

  const WordTransport& transport() const { return *t_; }

  GridSection apply(const GridSection& x) const override {
    check(x);
    GridSection y(grid_, fiber_);
    parallel_for(grid_->total, threads_, [&](std::int64_t i) {
      Stencil st;
      build_stencil(*grid_, t_->source(i), st);
      CVec v = interpolate(x, st);
      CVec w = t_->factor[i] * (t_->hol[i] * v);
      for (int c = 0; c < fiber_; ++c) y.values[fiber_ * i + c] = w[c];
    });
    return y;
  }

  // Adjoint with respect to the weighted inner product: scatter with the
  // quadrature-weight ratio.  Sequential: deterministic accumulation order.
  GridSection apply_adjoint(const GridSection& x) const override {
    check(x);
    GridSection y(grid_, fiber_);
    Stencil st;
    CVec v(fiber_);
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      build_stencil(*grid_, t_->source(i), st);
      for (int c = 0; c < fiber_; ++c) v[c] = x.values[fiber_ * i + c];
      CVec w = t_->factor[i] * (t_->hol[i].adjoint() * v);
      double rho_i = grid_->weights[i];
      for (int k = 0; k < st.count; ++k) {
        double r = rho_i / grid_->weights[st.idx[k]] * st.w[k];
        for (int c = 0; c < fiber_; ++c) y.values[fiber_ * st.idx[k] + c] += r * w[c];
      }
    }
    return y;
  }

 private:
  TransportPtr t_;
  int threads_;
};

// phi(F) as a grid operator; the empty word is the identity exactly.
inline OpPtr represent_word(RepresentationContext& ctx, const SmoothConnection& nabla, const FlowWord& F,
                            const GridPtr& grid) {
  if (F.empty()) return op_identity(grid, nabla.fiber_dim);
  auto ts = build_word_transports(ctx, {&nabla}, F, grid);
  return std::make_shared<TransportOp>(ts[0], ctx.threads);
}

// Grid samples of a test function, cached across operators and elements.
inline std::shared_ptr<const Eigen::VectorXcd> sample_function(RepresentationContext& ctx,
                                                               const TestFunction& f, const GridPtr& grid) {
  std::string key = f.id + "@" + grid->key();
  auto it = ctx.function_cache.find(key);
  if (it != ctx.function_cache.end()) return it->second;
  auto vals = std::make_shared<Eigen::VectorXcd>(grid->total);
  parallel_for(grid->total, ctx.threads, [&](std::int64_t i) { (*vals)[i] = f.eval(grid->node(i)); });
  ctx.function_cache[key] = vals;
  return vals;
}

inline std::string describe(const AlgebraElement& a) {
  if (a.zero()) return "0";
  std::string s;
  for (const auto& t : a.terms()) {
    if (!s.empty()) s += " + ";
    s += fmt_complex(t.coeff) + "*" + t.func.id + "*[" + t.word.key() + "]";
  }
  return s;
}

struct RepresentationOperator {
  OpPtr op;
  std::string connection_id;
  std::string element_desc;
};

// phi(sum_i c_i f_i F_i) = sum_i Mult(c_i f_i) phi(F_i).  Pure
// multiplication elements collapse to a single diagonal operator (whose
// norm is then exact).
inline RepresentationOperator represent_element(RepresentationContext& ctx, const SmoothConnection& nabla,
                                                const AlgebraElement& a, const GridPtr& grid) {
  RepresentationOperator rep;
  rep.connection_id = nabla.id;
  rep.element_desc = describe(a);
  int n = nabla.fiber_dim;

  Eigen::VectorXcd mult = Eigen::VectorXcd::Zero(grid->total);
  bool have_mult = false;
  std::vector<OpPtr> terms;
  for (const auto& t : a.terms()) {
    auto vals = sample_function(ctx, t.func, grid);
    if (t.word.empty()) {
      mult += t.coeff * (*vals);
      have_mult = true;
    } else {
      OpPtr T = represent_word(ctx, nabla, t.word, grid);
      terms.push_back(op_compose(op_mult(grid, n, t.coeff * (*vals)), T));
    }
  }
  if (terms.empty()) {
    if (!have_mult) mult.setZero();
    rep.op = op_mult(grid, n, std::move(mult));
    return rep;
  }
  if (have_mult) terms.insert(terms.begin(), op_mult(grid, n, std::move(mult)));
  rep.op = (terms.size() == 1) ? terms[0] : op_sum(std::move(terms));
  return rep;
}

// Fiber norms of phi(F) applied to the constant unit section: the
// operator-side measurement of sqrt(k) (the paper reads k off exactly this
// way).  Compare against radon_nikodym_factor of the inverse word.
inline Eigen::VectorXd measured_sqrt_k(RepresentationContext& ctx, const SmoothConnection& nabla,
                                       const FlowWord& F, const GridPtr& grid) {
  OpPtr T = represent_word(ctx, nabla, F, grid);
  int n = nabla.fiber_dim;
  GridSection xi(grid, n);
  for (std::int64_t i = 0; i < grid->total; ++i) xi.values[n * i] = 1.0;
  GridSection y = T->apply(xi);
  Eigen::VectorXd out(grid->total);
  for (std::int64_t i = 0; i < grid->total; ++i) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) s += std::norm(y.values[n * i + c]);
    out[i] = std::sqrt(s);
  }
  return out;
}

struct FamilyNorm {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> per_connection;
};

// Supremum of the represented norm over a finite connection family: a
// certified lower bound for the C*-norm (never the exact norm).
inline FamilyNorm sup_norm_over_family(RepresentationContext& ctx, const AlgebraElement& a,
                                       const std::vector<const SmoothConnection*>& family,
                                       const GridPtr& grid, int iters, std::uint64_t seed = 1) {
  if (family.empty()) throw NumericError("sup_norm_over_family needs a nonempty family");
  FamilyNorm out;
  for (const auto* nabla : family) {
    RepresentationOperator rep = represent_element(ctx, *nabla, a, grid);
    NormEstimate est = operator_norm_estimate(*rep.op, iters, seed, "supnorm|" + nabla->id);
    out.per_connection.emplace_back(nabla->id, est.value);
    out.value = std::max(out.value, est.value);
  }
  return out;
}

// Smooth seeded section families: the measuring sticks for unitarity and
// residual checks.  Torus sections are low-frequency Fourier combinations;
// box sections are bump-localized so all boundary terms vanish.
inline std::vector<GridSection> make_smooth_family(const GridPtr& grid, int fiber, int count,
                                                   std::uint64_t seed, int max_wave = 2) {
  std::vector<GridSection> fam;
  const ChartDomain& dom = grid->domain;
  Rng rng = seeded_rng(seed, "sections");
  for (int s = 0; s < count; ++s) {
    if (dom.topology == Topology::Torus) {
      struct Mode {
        double kx[3];
        Complex amp;
      };
      std::vector<std::vector<Mode>> comp_modes(fiber);
      for (int c = 0; c < fiber; ++c) {
        for (int mx = -max_wave; mx <= max_wave; ++mx) {
          for (int my = -max_wave; my <= max_wave; ++my) {
            Mode md;
            md.kx[0] = 2.0 * M_PI * mx / dom.side(0);
            md.kx[1] = 2.0 * M_PI * my / dom.side(1);
            md.kx[2] = 0.0;
            double damp = 1.0 + mx * mx + my * my;
            md.amp = Complex(uniform(rng, -1, 1), uniform(rng, -1, 1)) / damp;
            comp_modes[c].push_back(md);
          }
        }
      }
      fam.push_back(sample_section(grid, fiber, [comp_modes, fiber](const Vec& p) {
        CVec v(fiber);
        for (int c = 0; c < fiber; ++c) {
          Complex z = 0.0;
          for (const auto& md : comp_modes[c]) {
            double ph = md.kx[0] * p[0] + md.kx[1] * p[1] + (p.size() > 2 ? md.kx[2] * p[2] : 0.0);
            z += md.amp * Complex(std::cos(ph), std::sin(ph));
          }
          v[c] = z;
        }
        return v;
      }));
    } else {
      Vec c0 = dom.center();
      Vec c(dom.dim);
      double R = 0.0;
      for (int a = 0; a < dom.dim; ++a) {
        c[a] = c0[a] + uniform(rng, -0.15, 0.15) * dom.side(a);
        R = std::max(R, 0.30 * dom.side(a));
      }
      std::vector<std::array<double, 4>> waves(fiber);
      for (int cc = 0; cc < fiber; ++cc) {
        waves[cc] = {uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -1, 1), uniform(rng, -1, 1)};
      }
      fam.push_back(sample_section(grid, fiber, [c, R, waves, fiber](const Vec& p) {
        double u = (p - c).squaredNorm() / (R * R);
        double chi = (u >= 1.0) ? 0.0 : std::exp(-u / (1.0 - u));
        CVec v(fiber);
        for (int cc = 0; cc < fiber; ++cc) {
          double ph = waves[cc][0] * (p[0] - c[0]) + waves[cc][1] * (p[1] - c[1]);
          v[cc] = chi * Complex(std::cos(ph) + waves[cc][2], std::sin(ph) + waves[cc][3]);
        }
        return v;
      }));
    }
  }
  return fam;
}

// max over the family of ||D xi|| / ||xi||: a certified lower bound for
// ||D||, and the natural smooth-section residual for discretized identities
// whose true operator norm is dominated by grid-scale modes.
inline double residual_on_family(const LinearOperator& D, const std::vector<GridSection>& family) {
  double worst = 0.0;
  for (const auto& xi : family) {
    double nx = xi.norm();
    if (nx == 0.0) continue;
    worst = std::max(worst, D.apply(xi).norm() / nx);
  }
  return worst;
}

// max over family pairs of |<D xi, eta>| / (||xi|| ||eta||): the operator
// norm of D restricted to the family in both slots, again a certified lower
// bound.  This is the right measurement when D has a scatter (adjoint)
// factor: the exact discrete adjoint of a gather carries grid-scale jitter
// whose section norm does not shrink under refinement, but which is
// orthogonal to smooth sections up to the interpolation order.
inline double weak_residual_on_family(const LinearOperator& D, const std::vector<GridSection>& family) {
  double worst = 0.0;
  for (const auto& xi : family) {
    double nx = xi.norm();
    if (nx == 0.0) continue;
    GridSection dxi = D.apply(xi);
    for (const auto& eta : family) {
      double ne = eta.norm();
      if (ne == 0.0) continue;
      worst = std::max(worst, std::abs(dxi.inner(eta)) / (nx * ne));
    }
  }
  return worst;
}

// Operator-norm estimate of phi(F1 f - F2 f): the representation must
// annihilate the reparametrization ideal.
inline NormEstimate ideal_residual(RepresentationContext& ctx, const SmoothConnection& nabla,
                                   const FlowWord& F1, const FlowWord& F2, const TestFunction& f,
                                   const GridPtr& grid, int iters, std::uint64_t seed = 1) {
  AlgebraElement a1 =
      algebra_multiply(ctx.domain, ctx.fields, AlgebraElement::from_word(F1), AlgebraElement::from_function(f), ctx.flow);
  AlgebraElement a2 =
      algebra_multiply(ctx.domain, ctx.fields, AlgebraElement::from_word(F2), AlgebraElement::from_function(f), ctx.flow);
  OpPtr D = op_sub(represent_element(ctx, nabla, a1, grid).op, represent_element(ctx, nabla, a2, grid).op);
  return operator_norm_estimate(*D, iters, seed, "ideal");
}

}  // namespace holoflow
