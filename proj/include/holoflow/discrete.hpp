// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/flow_word.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <map>
#include <queue>
#include <utility>

namespace holoflow {

// Discrete side of the comparison: finite orbits carry the counting measure,
// so representations are exact permutation-times-unitary block matrices and
// every identity below holds to rounding, not to discretization order.

struct DiscreteEdge {
  int id = -1;
  int generator = -1;  // index into the orbit's generator list
  int source = -1;     // point indices
  int target = -1;
};

struct OrbitOptions {
  std::int64_t cap = 10000;
  double snap_rel = 1e-9;  // times the domain scale
  FlowOptions flow;
};

// Orbit closure of seed points under a fixed list of flow-word generators,
// applied forward and backward.  Images within the snap tolerance of a stored
// point are identified with it; everything else is appended until closure or
// the cap trips.  Points are stored wrapped; discovery order is deterministic,
// so edge ids are too.
class FinitePointSet {
 public:
  FinitePointSet(ChartDomain dom, std::vector<FlowWord> generators, double snap_abs)
      : dom_(std::move(dom)), generators_(std::move(generators)), snap_(snap_abs) {
    for (const auto& g : generators_) inverse_letters_.push_back(g.inverse().letters());
  }

  const ChartDomain& domain() const { return dom_; }
  const std::vector<FlowWord>& generators() const { return generators_; }
  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<Vec>& points() const { return points_; }
  const std::vector<DiscreteEdge>& edges() const { return edges_; }
  double snap_tolerance() const { return snap_; }

  // Snap lookup; -1 when no stored point is within tolerance.  Linear scan,
  // orbits are capped small enough that an index is not worth it.
  int find(const Vec& p) const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (dom_.distance(points_[i], p) <= snap_) return static_cast<int>(i);
    }
    return -1;
  }

  int forward_edge(int gen, int source) const { return out_.at(gen).at(source); }
  int backward_edge(int gen, int target) const { return in_.at(gen).at(target); }

  // Image point of one generator step; sign -1 walks the edge backwards.
  int step(int gen, int point, int sign) const {
    if (sign > 0) return edges_[forward_edge(gen, point)].target;
    return edges_[backward_edge(gen, point)].source;
  }

  // Factors a flow word into generator steps by longest suffix match (the
  // rightmost letters act first).  Returns (generator, sign) pairs in the
  // order they act.  Throws when the word does not decompose over the
  // generator alphabet; such a word has no action on the orbit.
  std::vector<std::pair<int, int>> factor(const FlowWord& w) const {
    std::vector<Letter> rest = w.letters();
    std::vector<std::pair<int, int>> steps;
    while (!rest.empty()) {
      int best_gen = -1, best_sign = 0;
      std::size_t best_len = 0;
      for (std::size_t g = 0; g < generators_.size(); ++g) {
        for (int sign : {1, -1}) {
          const auto& gl = (sign > 0) ? generators_[g].letters() : inverse_letters_[g];
          if (gl.size() > best_len && gl.size() <= rest.size() &&
              std::equal(gl.begin(), gl.end(), rest.end() - gl.size())) {
            best_gen = static_cast<int>(g);
            best_sign = sign;
            best_len = gl.size();
          }
        }
      }
      if (best_gen < 0) {
        throw CatalogueError("flow word does not factor over the orbit generators: '" + w.key() + "'");
      }
      steps.emplace_back(best_gen, best_sign);
      rest.erase(rest.end() - best_len, rest.end());
    }
    return steps;
  }

 private:
  friend FinitePointSet build_orbit(const ChartDomain&, const FieldSet&, const std::vector<Vec>&,
                                    const std::vector<FlowWord>&, const OrbitOptions&);

  int append(const Vec& p, std::int64_t cap) {
    if (static_cast<std::int64_t>(points_.size()) >= cap) {
      throw OrbitCapError("orbit closure exceeded the cap of " + std::to_string(cap) + " points");
    }
    points_.push_back(p);
    return static_cast<int>(points_.size()) - 1;
  }

  ChartDomain dom_;
  std::vector<FlowWord> generators_;
  std::vector<std::vector<Letter>> inverse_letters_;
  double snap_;
  std::vector<Vec> points_;
  std::vector<DiscreteEdge> edges_;
  // out_[g][source] / in_[g][target] -> edge id; total on a closed orbit
  // because time-1 flows are bijections.
  std::vector<std::vector<int>> out_, in_;
};

inline FinitePointSet build_orbit(const ChartDomain& dom, const FieldSet& fields,
                                  const std::vector<Vec>& seeds, const std::vector<FlowWord>& generators,
                                  const OrbitOptions& opt = {}) {
  if (opt.cap < static_cast<std::int64_t>(seeds.size())) {
    throw CatalogueError("orbit cap is smaller than the seed set");
  }
  FinitePointSet pts(dom, generators, opt.snap_rel * dom.scale());
  for (const auto& s : seeds) {
    Vec w = dom.wrap(s);
    if (pts.find(w) < 0) pts.append(w, opt.cap);
  }
  // Closure sweep: discovery order is the processing order, so the edge list
  // only depends on seeds and generators.
  for (int i = 0; i < pts.size(); ++i) {  // pts grows while iterating
    for (std::size_t g = 0; g < generators.size(); ++g) {
      Vec fwd = dom.wrap(word_apply(dom, fields, generators[g], pts.points_[i], opt.flow));
      int j = pts.find(fwd);
      if (j < 0) j = pts.append(fwd, opt.cap);
      pts.edges_.push_back(DiscreteEdge{static_cast<int>(pts.edges_.size()), static_cast<int>(g), i, j});
      Vec bwd = dom.wrap(word_apply(dom, fields, generators[g].inverse(), pts.points_[i], opt.flow));
      if (pts.find(bwd) < 0) pts.append(bwd, opt.cap);
    }
  }
  // Index the edges; injectivity can only fail when snapping has merged two
  // distinct trajectories, which the tolerance is chosen to exclude.
  std::size_t ng = generators.size();
  pts.out_.assign(ng, std::vector<int>(pts.size(), -1));
  pts.in_.assign(ng, std::vector<int>(pts.size(), -1));
  for (const auto& e : pts.edges_) {
    if (pts.in_[e.generator][e.target] >= 0) {
      throw NumericError("two orbit points flow to the same target within snap tolerance");
    }
    pts.out_[e.generator][e.source] = e.id;
    pts.in_[e.generator][e.target] = e.id;
  }
  return pts;
}

// Haar distribution via QR of a complex Gaussian matrix with the R-diagonal
// phases absorbed into Q.
inline CMat haar_unitary(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd z(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) z(i, j) = Complex(gauss(rng), gauss(rng)) / std::sqrt(2.0);
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    Complex d = r(j, j);
    q.col(j) *= (std::abs(d) > 0.0) ? d / std::abs(d) : Complex(1.0, 0.0);
  }
  return CMat(q);
}

// Assignment of one unitary per primitive orbit edge; composites and inverse
// edges are derived, so the composition axioms hold by construction.
class GeneralizedConnection {
 public:
  GeneralizedConnection(std::string id, int fiber_dim, std::vector<CMat> edge_unitaries)
      : id_(std::move(id)), n_(fiber_dim), edge_(std::move(edge_unitaries)) {
    if (n_ < 1 || n_ > 2) throw CatalogueError("generalized connection fiber dimension must be 1 or 2");
    for (const auto& u : edge_) {
      if (u.rows() != n_ || u.cols() != n_) {
        throw CatalogueError("edge unitary size does not match the fiber dimension");
      }
    }
  }

  const std::string& id() const { return id_; }
  int fiber_dim() const { return n_; }
  std::size_t edge_count() const { return edge_.size(); }

  const CMat& edge_unitary(int edge_id) const { return edge_.at(edge_id); }

  // Unitary across one generator step; a backward step inverts the stored
  // edge value, identifying l^{-1} compose l with the trivial path.
  CMat step_unitary(const FinitePointSet& pts, int gen, int point, int sign) const {
    if (sign > 0) return edge_.at(pts.forward_edge(gen, point));
    return CMat(edge_.at(pts.backward_edge(gen, point)).adjoint());
  }

  // Derived composite: the unitary of the edge w defines from m to w(m),
  // later steps multiplying from the left.
  std::pair<CMat, int> word_unitary(const FinitePointSet& pts, const FlowWord& w, int m) const {
    CMat u = CMat::Identity(n_, n_);
    int p = m;
    for (const auto& [gen, sign] : pts.factor(w)) {
      u = step_unitary(pts, gen, p, sign) * u;
      p = pts.step(gen, p, sign);
    }
    return {u, p};
  }

 private:
  std::string id_;
  int n_;
  std::vector<CMat> edge_;
};

inline GeneralizedConnection random_generalized_connection(const FinitePointSet& pts, int n,
                                                           std::uint64_t seed) {
  Rng rng = seeded_rng(seed, "generalized-connection");
  std::vector<CMat> assign;
  assign.reserve(pts.edges().size());
  for (std::size_t e = 0; e < pts.edges().size(); ++e) assign.push_back(haar_unitary(n, rng));
  return GeneralizedConnection("random-generalized@" + std::to_string(seed), n, std::move(assign));
}

// Block operator on the counting-measure space over the orbit: the m-th fiber
// block is sent to slot target[m] after multiplication by block[m].  Words
// give permutations with unitary blocks, functions give target[m] = m with
// scalar blocks; composition is exact in both cases.
struct DiscreteOperator {
  int points = 0;
  int fiber = 1;
  std::vector<int> target;
  std::vector<CMat> block;

  static DiscreteOperator identity(int points, int fiber) {
    DiscreteOperator op{points, fiber, {}, {}};
    op.target.resize(points);
    op.block.assign(points, CMat::Identity(fiber, fiber));
    for (int m = 0; m < points; ++m) op.target[m] = m;
    return op;
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& xi) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(points * fiber);
    for (int m = 0; m < points; ++m) {
      out.segment(target[m] * fiber, fiber) += block[m] * xi.segment(m * fiber, fiber);
    }
    return out;
  }

  Eigen::MatrixXcd to_dense() const {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(points * fiber, points * fiber);
    for (int m = 0; m < points; ++m) a.block(target[m] * fiber, m * fiber, fiber, fiber) += block[m];
    return a;
  }

  // Valid whenever target is injective (permutations, diagonals).
  DiscreteOperator adjoint() const {
    DiscreteOperator adj{points, fiber, std::vector<int>(points, -1),
                         std::vector<CMat>(points, CMat::Zero(fiber, fiber))};
    for (int m = 0; m < points; ++m) {
      if (adj.target[target[m]] >= 0) {
        throw NumericError("adjoint of a non-injective discrete operator is not block form");
      }
      adj.target[target[m]] = m;
      adj.block[target[m]] = block[m].adjoint();
    }
    return adj;
  }
};

// a after b; exact because targets compose as integer maps.
inline DiscreteOperator compose(const DiscreteOperator& a, const DiscreteOperator& b) {
  if (a.points != b.points || a.fiber != b.fiber) {
    throw CatalogueError("discrete operators live on different spaces");
  }
  DiscreteOperator c{a.points, a.fiber, std::vector<int>(a.points), std::vector<CMat>(a.points)};
  for (int m = 0; m < a.points; ++m) {
    c.target[m] = a.target[b.target[m]];
    c.block[m] = a.block[b.target[m]] * b.block[m];
  }
  return c;
}

inline double operator_distance(const DiscreteOperator& a, const DiscreteOperator& b) {
  return (a.to_dense() - b.to_dense()).cwiseAbs().maxCoeff();
}

// 1_m as an operator block; idempotent and self-adjoint by construction.
inline DiscreteOperator point_projection_op(const FinitePointSet& pts, int m, int fiber) {
  DiscreteOperator op = DiscreteOperator::identity(pts.size(), fiber);
  for (int i = 0; i < pts.size(); ++i) {
    if (i != m) op.block[i] = CMat::Zero(fiber, fiber);
  }
  return op;
}

// Multiplication by a finitely supported function, one value per orbit point;
// these span the function part of the discrete algebra.
inline DiscreteOperator discrete_function_op(const FinitePointSet& pts, const std::vector<Complex>& values,
                                             int fiber) {
  if (static_cast<int>(values.size()) != pts.size()) {
    throw CatalogueError("discrete function needs one value per orbit point");
  }
  DiscreteOperator op = DiscreteOperator::identity(pts.size(), fiber);
  for (int i = 0; i < pts.size(); ++i) op.block[i] = values[i] * CMat::Identity(fiber, fiber);
  return op;
}

// (psi(F) xi)(F(m)) = nabla(F_m) xi(m): no density factor under the counting
// measure, so psi is unitary and multiplicative to rounding.
inline DiscreteOperator discrete_represent(const GeneralizedConnection& nabla, const FlowWord& F,
                                           const FinitePointSet& pts) {
  DiscreteOperator op{pts.size(), nabla.fiber_dim(), std::vector<int>(pts.size()),
                      std::vector<CMat>(pts.size())};
  for (int m = 0; m < pts.size(); ++m) {
    auto [u, p] = nabla.word_unitary(pts, F, m);
    op.target[m] = p;
    op.block[m] = u;
  }
  return op;
}

// U(e(l)) nabla1(l) U*(s(l)) = nabla2(l) for a pointwise unitary U; used both
// to construct equivalent pairs and as the relation gauge solving inverts.
inline GeneralizedConnection generalized_gauge_transform(const FinitePointSet& pts,
                                                         const GeneralizedConnection& nabla,
                                                         const std::vector<CMat>& U) {
  if (static_cast<int>(U.size()) != pts.size()) {
    throw CatalogueError("generalized gauge transform needs one unitary per orbit point");
  }
  std::vector<CMat> assign;
  assign.reserve(pts.edges().size());
  for (const auto& e : pts.edges()) {
    assign.push_back(CMat(U[e.target] * nabla.edge_unitary(e.id) * U[e.source].adjoint()));
  }
  return GeneralizedConnection("gauge." + nabla.id(), nabla.fiber_dim(), std::move(assign));
}

inline std::vector<CMat> random_point_gauge(const FinitePointSet& pts, int n, std::uint64_t seed) {
  Rng rng = seeded_rng(seed, "point-gauge");
  std::vector<CMat> u;
  u.reserve(pts.size());
  for (int m = 0; m < pts.size(); ++m) u.push_back(haar_unitary(n, rng));
  return u;
}

struct GaugeSolveOptions {
  double edge_tol = 1e-12;     // residual bound for acceptance
  double rank_cutoff = 1e-8;   // relative singular-value cutoff for the intertwiner space
  std::uint64_t seed = 11;     // generic combination inside the intertwiner space
};

struct GaugeSolveResult {
  bool equivalent = false;
  std::vector<CMat> U;        // per point, when equivalent
  double max_residual = 0.0;  // worst edge residual of the returned U
  // Failure certificate: a fundamental cycle whose holonomies obstruct
  // equivalence, with both traces (they differ whenever traces can tell the
  // connections apart; conjugation-compatible traces fall through to the
  // intertwiner test and the cycle reported is the worst verified one).
  std::vector<int> cycle_edges;
  Complex trace1{0.0, 0.0}, trace2{0.0, 0.0};
  std::string reason;
};

namespace detail {

inline Eigen::MatrixXcd intertwiner_rows(const CMat& h1, const CMat& h2) {
  // vec(R) nullspace rows of R h1 - h2 R = 0, i.e. (h1^T kron I - I kron h2).
  int n = static_cast<int>(h1.rows());
  Eigen::MatrixXcd rows = Eigen::MatrixXcd::Zero(n * n, n * n);
  Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      // column-major vec: R(i,j) sits at j*n + i
      for (int k = 0; k < n; ++k) {
        rows(j * n + i, k * n + i) += h1(k, j);       // (R h1)(i,j) term
        rows(j * n + i, j * n + k) -= h2(i, k);       // (h2 R)(i,j) term
      }
    }
  }
  return rows;
}

}  // namespace detail

// Spanning-tree solve per connected component: transport both connections
// along the tree, reduce the edge equations to a root intertwiner problem on
// the fundamental-cycle holonomies, extract a unitary intertwiner from the
// stacked nullspace (polar factor of a generic element), then verify every
// edge exhaustively.  Fixing the root to the identity alone would miss
// solutions whose root value conjugates the cycle holonomies, so the
// intertwiner step is not optional.
inline GaugeSolveResult generalized_gauge_solve(const GeneralizedConnection& nabla1,
                                                const GeneralizedConnection& nabla2,
                                                const FinitePointSet& pts,
                                                const GaugeSolveOptions& opt = {}) {
  if (nabla1.fiber_dim() != nabla2.fiber_dim()) {
    throw CatalogueError("gauge solve needs matching fiber dimensions");
  }
  if (nabla1.edge_count() != pts.edges().size() || nabla2.edge_count() != pts.edges().size()) {
    throw CatalogueError("gauge solve needs connections defined on the orbit's edge set");
  }
  const int n = nabla1.fiber_dim();
  const int N = pts.size();

  // Undirected adjacency over primitive edges.
  std::vector<std::vector<int>> adj(N);
  for (const auto& e : pts.edges()) {
    adj[e.source].push_back(e.id);
    if (e.target != e.source) adj[e.target].push_back(e.id);
  }

  GaugeSolveResult res;
  res.U.assign(N, CMat::Identity(n, n));
  std::vector<int> parent_edge(N, -1), depth(N, 0);
  std::vector<char> seen(N, 0);

  struct Cycle {
    int closing_edge;
    CMat h1, h2;
  };

  for (int root = 0; root < N; ++root) {
    if (seen[root]) continue;
    // BFS tree with transports P_i(m): fiber at root -> fiber at m.
    std::vector<int> comp;
    std::vector<CMat> P1(N), P2(N);
    P1[root] = CMat::Identity(n, n);
    P2[root] = CMat::Identity(n, n);
    seen[root] = 1;
    std::queue<int> q;
    q.push(root);
    std::vector<char> tree_edge(pts.edges().size(), 0);
    while (!q.empty()) {
      int m = q.front();
      q.pop();
      comp.push_back(m);
      for (int eid : adj[m]) {
        const auto& e = pts.edges()[eid];
        int other = (e.source == m) ? e.target : e.source;
        if (seen[other]) continue;
        seen[other] = 1;
        tree_edge[eid] = 1;
        parent_edge[other] = eid;
        depth[other] = depth[m] + 1;
        if (e.source == m) {
          P1[other] = CMat(nabla1.edge_unitary(eid) * P1[m]);
          P2[other] = CMat(nabla2.edge_unitary(eid) * P2[m]);
        } else {
          P1[other] = CMat(nabla1.edge_unitary(eid).adjoint() * P1[m]);
          P2[other] = CMat(nabla2.edge_unitary(eid).adjoint() * P2[m]);
        }
        q.push(other);
      }
    }

    // Fundamental cycles of this component, holonomies based at the root.
    std::vector<Cycle> cycles;
    for (int m : comp) {
      for (int eid : adj[m]) {
        const auto& e = pts.edges()[eid];
        if (e.source != m || tree_edge[eid]) continue;  // visit each edge once, from its source
        cycles.push_back(Cycle{eid, CMat(P1[e.target].adjoint() * nabla1.edge_unitary(eid) * P1[e.source]),
                               CMat(P2[e.target].adjoint() * nabla2.edge_unitary(eid) * P2[e.source])});
      }
    }

    // Root unitary: identity when the holonomies already match (this is the
    // root convention for solving a connection against itself), otherwise a
    // unitary intertwiner R with R h1 R* = h2 for all cycles.
    CMat R = CMat::Identity(n, n);
    bool identity_ok = true;
    for (const auto& c : cycles) {
      if ((c.h1 - c.h2).cwiseAbs().maxCoeff() > opt.edge_tol) identity_ok = false;
    }
    bool have_root = identity_ok;
    if (!identity_ok) {
      Eigen::MatrixXcd stacked(static_cast<int>(cycles.size()) * n * n, n * n);
      for (std::size_t c = 0; c < cycles.size(); ++c) {
        stacked.middleRows(static_cast<int>(c) * n * n, n * n) =
            detail::intertwiner_rows(cycles[c].h1, cycles[c].h2);
      }
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      double cut = opt.rank_cutoff * std::max(sv(0), 1.0);
      int null_dim = 0;
      for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) <= cut) ++null_dim;
      }
      if (null_dim > 0) {
        // A generic element of the intertwiner space is invertible exactly
        // when the representations are equivalent; its polar factor is then
        // a unitary intertwiner because the space is closed under the polar
        // correction (the cycle matrices are unitary).
        Rng rng = seeded_rng(opt.seed, "gauge-solve");
        for (int attempt = 0; attempt < 3 && !have_root; ++attempt) {
          Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n * n);
          for (int k = 0; k < null_dim; ++k) {
            v += Complex(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)) *
                 svd.matrixV().col(n * n - 1 - k);
          }
          Eigen::MatrixXcd T = Eigen::Map<Eigen::MatrixXcd>(v.data(), n, n);
          Eigen::JacobiSVD<Eigen::MatrixXcd> polar(T, Eigen::ComputeFullU | Eigen::ComputeFullV);
          if (polar.singularValues()(n - 1) > opt.rank_cutoff * polar.singularValues()(0)) {
            R = CMat(polar.matrixU() * polar.matrixV().adjoint());
            have_root = true;
          }
        }
      }
    }

    auto climb = [&](int x, std::vector<int>& out) {
      int pe = parent_edge[x];
      out.push_back(pe);
      const auto& pedge = pts.edges()[pe];
      return (pedge.source == x) ? pedge.target : pedge.source;
    };
    auto tree_cycle_edges = [&](int closing) {
      // Ordered closed walk: the closing edge from s to t, then the tree
      // path t -> ancestor -> s.  Edge orientation varies along the walk.
      const auto& e = pts.edges()[closing];
      std::vector<int> up_s, up_t;
      int a = e.source, b = e.target;
      while (depth[a] > depth[b]) a = climb(a, up_s);
      while (depth[b] > depth[a]) b = climb(b, up_t);
      while (a != b) {
        a = climb(a, up_s);
        b = climb(b, up_t);
      }
      std::vector<int> walk{closing};
      walk.insert(walk.end(), up_t.begin(), up_t.end());
      walk.insert(walk.end(), up_s.rbegin(), up_s.rend());
      return walk;
    };

    auto fail_with_certificate = [&](const std::string& reason, const Cycle* pinned) {
      res.equivalent = false;
      res.reason = reason;
      const Cycle* pick = pinned;
      if (!pick && !cycles.empty()) {
        // Prefer a cycle whose traces witness the obstruction directly.
        double best_gap = -1.0;
        for (const auto& c : cycles) {
          double gap = std::abs(c.h1.trace() - c.h2.trace());
          if (gap > best_gap) {
            best_gap = gap;
            pick = &c;
          }
        }
      }
      if (pick) {
        res.cycle_edges = tree_cycle_edges(pick->closing_edge);
        res.trace1 = pick->h1.trace();
        res.trace2 = pick->h2.trace();
      }
      return res;
    };

    if (!have_root) {
      return fail_with_certificate("cycle holonomies admit no unitary intertwiner", nullptr);
    }

    for (int m : comp) res.U[m] = CMat(P2[m] * R * P1[m].adjoint());

    // Exhaustive verification of this component; soundness rests here, the
    // tree only proposes.  Tree edges hold to rounding by construction, so a
    // violation always names a non-tree edge and hence a fundamental cycle.
    for (int m : comp) {
      for (int eid : adj[m]) {
        const auto& e = pts.edges()[eid];
        if (e.source != m) continue;
        double r = (res.U[e.target] * nabla1.edge_unitary(eid) * res.U[e.source].adjoint() -
                    nabla2.edge_unitary(eid))
                       .cwiseAbs()
                       .maxCoeff();
        res.max_residual = std::max(res.max_residual, r);
        if (r > opt.edge_tol) {
          const Cycle* pinned = nullptr;
          for (const auto& c : cycles) {
            if (c.closing_edge == eid) pinned = &c;
          }
          return fail_with_certificate("propagated gauge fails on a non-tree edge", pinned);
        }
      }
    }
  }
  res.equivalent = true;
  return res;
}

}  // namespace holoflow
