// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "holoflow/discrete.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>

#include "test_helpers.hpp"

using namespace holoflow;

namespace {

// Rational torus shifts flow exactly (RK4 is exact on constant fields), so
// orbit arithmetic is an independent oracle for everything in this file.
struct DiscreteFixture {
  ChartDomain dom = hft::unit_torus2();
  FieldSet fields;

  DiscreteFixture() {
    fields.add(hft::constant_field("a", hft::pt(1.0 / 3.0, 0.0)));
    fields.add(hft::constant_field("b", hft::pt(0.0, 0.5)));
    fields.add(hft::constant_field("c", hft::pt(1.0 / 3.0, 0.5)));
    fields.add(hft::constant_field("g", hft::pt(0.6180339887498949, 0.0)));
  }

  FinitePointSet orbit(const std::vector<std::string>& gen_ids, const Vec& seed,
                       std::int64_t cap = 10000) const {
    std::vector<FlowWord> gens;
    for (const auto& id : gen_ids) gens.push_back(FlowWord::single(id));
    OrbitOptions opt;
    opt.cap = cap;
    return build_orbit(dom, fields, {seed}, gens, opt);
  }
};

Eigen::VectorXcd random_section(int dim, std::uint64_t seed) {
  Rng rng = seeded_rng(seed, "discrete-section");
  Eigen::VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(uniform(rng, -1, 1), uniform(rng, -1, 1));
  return v;
}

double unitary_defect(const Eigen::MatrixXcd& u) {
  return (u.adjoint() * u - Eigen::MatrixXcd::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

// Walks a certificate cycle as an undirected closed walk and returns the
// holonomy trace; an independent check that the certificate is honest.
Complex walk_cycle_trace(const FinitePointSet& pts, const GeneralizedConnection& nabla,
                         const std::vector<int>& cycle) {
  REQUIRE_FALSE(cycle.empty());
  int n = nabla.fiber_dim();
  CMat u = CMat::Identity(n, n);
  int cur = pts.edges()[cycle.front()].source;
  int start = cur;
  for (int eid : cycle) {
    const auto& e = pts.edges()[eid];
    if (e.source == cur) {
      u = CMat(nabla.edge_unitary(eid) * u);
      cur = e.target;
    } else {
      REQUIRE(e.target == cur);
      u = CMat(nabla.edge_unitary(eid).adjoint() * u);
      cur = e.source;
    }
  }
  REQUIRE(cur == start);
  return u.trace();
}

}  // namespace

TEST_CASE("orbit closure of rational torus shifts") {
  DiscreteFixture fx;

  SECTION("rotation-number arithmetic fixes the cyclic orbit length") {
    // shift (1/3, 1/2): the orbit closes after lcm(3, 2) = 6 steps
    auto pts = fx.orbit({"c"}, hft::pt(0.1, 0.2));
    REQUIRE(pts.size() == 6);
    REQUIRE(pts.edges().size() == 6);
    for (int k = 0; k < 6; ++k) {
      Vec expect = fx.dom.wrap(hft::pt(0.1 + k / 3.0, 0.2 + k * 0.5));
      int idx = pts.find(expect);
      REQUIRE(idx >= 0);
    }
    // forward edges form a single 6-cycle
    int cur = 0;
    for (int k = 0; k < 6; ++k) cur = pts.step(0, cur, +1);
    REQUIRE(cur == 0);
    int back = 0;
    for (int k = 0; k < 6; ++k) back = pts.step(0, back, -1);
    REQUIRE(back == 0);
  }

  SECTION("empty generator list keeps the seeds") {
    auto pts = build_orbit(fx.dom, fx.fields, {hft::pt(0.3, 0.3), hft::pt(0.7, 0.1)}, {});
    REQUIRE(pts.size() == 2);
    REQUIRE(pts.edges().empty());
  }

  SECTION("adding the inverse generator changes no points") {
    auto only = fx.orbit({"a"}, hft::pt(0.05, 0.4));
    std::vector<FlowWord> both{FlowWord::single("a"), FlowWord::single("a", -1)};
    auto with_inverse = build_orbit(fx.dom, fx.fields, {hft::pt(0.05, 0.4)}, both);
    REQUIRE(only.size() == 3);
    REQUIRE(with_inverse.size() == 3);
    for (const auto& p : only.points()) REQUIRE(with_inverse.find(p) >= 0);
    for (const auto& p : with_inverse.points()) REQUIRE(only.find(p) >= 0);
  }

  SECTION("two commuting shifts give the product orbit") {
    auto pts = fx.orbit({"a", "b"}, hft::pt(0.1, 0.2));
    REQUIRE(pts.size() == 6);             // 3 x 2 lattice
    REQUIRE(pts.edges().size() == 12);    // one edge per point per generator
  }

  SECTION("an irrational shift trips the cap") {
    REQUIRE_THROWS_AS(fx.orbit({"g"}, hft::pt(0.0, 0.0), 50), OrbitCapError);
  }

  SECTION("cap below the seed count is a catalogue error") {
    OrbitOptions opt;
    opt.cap = 1;
    REQUIRE_THROWS_AS(
        build_orbit(fx.dom, fx.fields, {hft::pt(0.1, 0.1), hft::pt(0.2, 0.2)}, {}, opt),
        CatalogueError);
  }
}

TEST_CASE("random generalized connections") {
  DiscreteFixture fx;
  auto pts = fx.orbit({"a", "b"}, hft::pt(0.1, 0.2));

  SECTION("unit phases in fiber dimension one") {
    auto nabla = random_generalized_connection(pts, 1, 7);
    REQUIRE(nabla.edge_count() == pts.edges().size());
    for (std::size_t e = 0; e < nabla.edge_count(); ++e) {
      REQUIRE(nabla.edge_unitary(static_cast<int>(e)).rows() == 1);
      REQUIRE(std::abs(std::abs(nabla.edge_unitary(static_cast<int>(e))(0, 0)) - 1.0) < 1e-14);
    }
  }

  SECTION("edge values are unitary and seed-deterministic") {
    auto n1 = random_generalized_connection(pts, 2, 7);
    auto n2 = random_generalized_connection(pts, 2, 7);
    auto n3 = random_generalized_connection(pts, 2, 8);
    double same = 0.0, other = 0.0;
    for (std::size_t e = 0; e < n1.edge_count(); ++e) {
      int id = static_cast<int>(e);
      REQUIRE(unitary_defect(n1.edge_unitary(id)) < 1e-14);
      same = std::max(same, (n1.edge_unitary(id) - n2.edge_unitary(id)).cwiseAbs().maxCoeff());
      other = std::max(other, (n1.edge_unitary(id) - n3.edge_unitary(id)).cwiseAbs().maxCoeff());
    }
    REQUIRE(same == 0.0);
    REQUIRE(other > 1e-2);
  }

  SECTION("derived composites are the stored primitive products") {
    auto nabla = random_generalized_connection(pts, 2, 7);
    FlowWord ab = word_multiply(FlowWord::single("a"), FlowWord::single("b"));
    auto [u, p] = nabla.word_unitary(pts, ab, 0);
    // b acts first from point 0
    int mid = pts.step(1, 0, +1);
    CMat expect = CMat(nabla.step_unitary(pts, 0, mid, +1) * nabla.step_unitary(pts, 1, 0, +1));
    REQUIRE(p == pts.step(0, mid, +1));
    REQUIRE((u - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("counting-measure representation is exactly multiplicative") {
  DiscreteFixture fx;
  auto pts = fx.orbit({"a", "b"}, hft::pt(0.1, 0.2));
  auto nabla = random_generalized_connection(pts, 2, 21);

  SECTION("empty word represents as the identity") {
    auto psi = discrete_represent(nabla, FlowWord(), pts);
    REQUIRE(operator_distance(psi, DiscreteOperator::identity(pts.size(), 2)) == 0.0);
  }

  SECTION("psi(F) is a block permutation with unitary blocks") {
    FlowWord w = word_multiply(FlowWord::single("a"), FlowWord::single("b", -1));
    auto psi = discrete_represent(nabla, w, pts);
    std::vector<int> hit(pts.size(), 0);
    for (int m = 0; m < pts.size(); ++m) {
      hit[psi.target[m]] += 1;
      REQUIRE(unitary_defect(psi.block[m]) < 1e-13);
    }
    REQUIRE(std::accumulate(hit.begin(), hit.end(), 0) == pts.size());
    REQUIRE(*std::min_element(hit.begin(), hit.end()) == 1);

    Eigen::VectorXcd xi = random_section(pts.size() * 2, 3);
    REQUIRE(std::abs(psi.apply(xi).norm() / xi.norm() - 1.0) < 1e-14);
  }

  SECTION("homomorphism against the dense matrix oracle") {
    // 3-point orbit keeps the dense oracle readable: 6x6 products
    auto small = fx.orbit({"a"}, hft::pt(0.05, 0.4));
    auto nab = random_generalized_connection(small, 2, 5);
    FlowWord f1 = FlowWord::single("a");
    FlowWord f2 = FlowWord::single("a");
    auto lhs = discrete_represent(nab, word_multiply(f1, f2), small);
    Eigen::MatrixXcd rhs =
        discrete_represent(nab, f1, small).to_dense() * discrete_represent(nab, f2, small).to_dense();
    REQUIRE((lhs.to_dense() - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("free cancellation matches the operator inverse") {
    FlowWord f1 = FlowWord::single("a");
    FlowWord f2 = FlowWord::single("a", -1);
    REQUIRE(word_multiply(f1, f2).empty());
    Eigen::MatrixXcd prod =
        discrete_represent(nabla, f1, pts).to_dense() * discrete_represent(nabla, f2, pts).to_dense();
    REQUIRE(unitary_defect(prod) < 1e-12);
    REQUIRE((prod - Eigen::MatrixXcd::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff() <
            1e-12);
  }

  SECTION("mixed-generator words stay multiplicative") {
    FlowWord f1 = word_multiply(FlowWord::single("a"), FlowWord::single("b"));
    FlowWord f2 = word_multiply(FlowWord::single("b"), FlowWord::single("a", -1));
    auto lhs = discrete_represent(nabla, word_multiply(f1, f2), pts);
    Eigen::MatrixXcd rhs =
        discrete_represent(nabla, f1, pts).to_dense() * discrete_represent(nabla, f2, pts).to_dense();
    REQUIRE((lhs.to_dense() - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("unitarity is exact: psi(F) adjoint equals psi of the inverse word") {
    FlowWord w = word_multiply(FlowWord::single("b"), FlowWord::single("a"));
    auto psi = discrete_represent(nabla, w, pts);
    auto inv = discrete_represent(nabla, w.inverse(), pts);
    REQUIRE(operator_distance(psi.adjoint(), inv) < 1e-13);
    REQUIRE(unitary_defect(psi.to_dense()) < 1e-13);
  }

  SECTION("words outside the generator alphabet have no orbit action") {
    REQUIRE_THROWS_AS(discrete_represent(nabla, FlowWord::single("c"), pts), CatalogueError);
  }
}

TEST_CASE("point projections and the discrete function algebra") {
  DiscreteFixture fx;
  auto pts = fx.orbit({"a", "b"}, hft::pt(0.1, 0.2));
  auto nabla = random_generalized_connection(pts, 2, 33);

  SECTION("1_m is an orthogonal projection and the family resolves the identity") {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(pts.size() * 2, pts.size() * 2);
    for (int m = 0; m < pts.size(); ++m) {
      auto p = point_projection_op(pts, m, 2);
      Eigen::MatrixXcd d = p.to_dense();
      REQUIRE((d * d - d).cwiseAbs().maxCoeff() == 0.0);
      REQUIRE((d - d.adjoint()).cwiseAbs().maxCoeff() == 0.0);
      sum += d;
    }
    REQUIRE((sum - Eigen::MatrixXcd::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("conjugation moves the projection along the word") {
    FlowWord w = word_multiply(FlowWord::single("a"), FlowWord::single("b"));
    auto psi = discrete_represent(nabla, w, pts);
    for (int m = 0; m < pts.size(); ++m) {
      auto moved = compose(psi, compose(point_projection_op(pts, m, 2), psi.adjoint()));
      int image = psi.target[m];
      REQUIRE(operator_distance(moved, point_projection_op(pts, image, 2)) < 1e-12);
    }
  }

  SECTION("conjugating a function transports its values") {
    std::vector<Complex> values;
    for (int m = 0; m < pts.size(); ++m) values.push_back(Complex(0.3 * m, 1.0 - 0.1 * m));
    FlowWord w = FlowWord::single("b");
    auto psi = discrete_represent(nabla, w, pts);
    auto conj = compose(psi, compose(discrete_function_op(pts, values, 2), psi.adjoint()));
    std::vector<Complex> pushed(pts.size());
    for (int m = 0; m < pts.size(); ++m) pushed[psi.target[m]] = values[m];
    REQUIRE(operator_distance(conj, discrete_function_op(pts, pushed, 2)) < 1e-12);
  }

  SECTION("function products are pointwise") {
    std::vector<Complex> f, g, fg;
    for (int m = 0; m < pts.size(); ++m) {
      f.push_back(Complex(std::sin(1.0 + m), 0.2));
      g.push_back(Complex(0.5, std::cos(2.0 + m)));
      fg.push_back(f.back() * g.back());
    }
    auto lhs = compose(discrete_function_op(pts, f, 2), discrete_function_op(pts, g, 2));
    REQUIRE(operator_distance(lhs, discrete_function_op(pts, fg, 2)) < 1e-15);
  }
}

TEST_CASE("generalized gauge equivalence is decided exactly") {
  DiscreteFixture fx;
  auto pts = fx.orbit({"a", "b"}, hft::pt(0.1, 0.2));
  auto nabla = random_generalized_connection(pts, 2, 41);

  SECTION("a connection against itself returns the identity gauge") {
    auto res = generalized_gauge_solve(nabla, nabla, pts);
    REQUIRE(res.equivalent);
    REQUIRE(res.max_residual < 1e-14);
    for (const auto& u : res.U) {
      REQUIRE((u - CMat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  SECTION("round trip: a random point gauge is recovered") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      auto u0 = random_point_gauge(pts, 2, seed);
      auto moved = generalized_gauge_transform(pts, nabla, u0);
      auto res = generalized_gauge_solve(nabla, moved, pts);
      REQUIRE(res.equivalent);
      REQUIRE(res.max_residual < 1e-12);
    }
  }

  SECTION("round trip in fiber dimension one") {
    auto ab = random_generalized_connection(pts, 1, 4);
    auto moved = generalized_gauge_transform(pts, ab, random_point_gauge(pts, 1, 9));
    auto res = generalized_gauge_solve(ab, moved, pts);
    REQUIRE(res.equivalent);
    REQUIRE(res.max_residual < 1e-12);
  }

  SECTION("independent random connections are rejected with a cycle certificate") {
    auto other = random_generalized_connection(pts, 2, 42);
    auto res = generalized_gauge_solve(nabla, other, pts);
    REQUIRE_FALSE(res.equivalent);
    REQUIRE_FALSE(res.reason.empty());
    REQUIRE_FALSE(res.cycle_edges.empty());
    REQUIRE(std::abs(res.trace1 - res.trace2) > 1e-6);
    // the certificate names a genuine closed walk with those holonomy traces
    Complex t1 = walk_cycle_trace(pts, nabla, res.cycle_edges);
    Complex t2 = walk_cycle_trace(pts, other, res.cycle_edges);
    REQUIRE(std::abs(t1 - res.trace1) < 1e-10);
    REQUIRE(std::abs(t2 - res.trace2) < 1e-10);
  }

  SECTION("equal traces do not fool the intertwiner test") {
    // one fundamental cycle; holonomies share the trace 0 but have different
    // eigenvalues, so no unitary can conjugate one into the other
    auto small = fx.orbit({"a"}, hft::pt(0.05, 0.4));
    std::vector<CMat> e1(3, CMat::Identity(2, 2)), e2(3, CMat::Identity(2, 2));
    CMat h1(2, 2), h2(2, 2);
    h1 << Complex(0, 1), 0, 0, Complex(0, -1);
    h2 << 1, 0, 0, -1;
    e1[2] = h1;
    e2[2] = h2;
    GeneralizedConnection n1("iso-spectral-1", 2, e1), n2("iso-spectral-2", 2, e2);
    auto res = generalized_gauge_solve(n1, n2, small);
    REQUIRE_FALSE(res.equivalent);
    REQUIRE(std::abs(res.trace1 - res.trace2) < 1e-12);
    REQUIRE(res.reason == "cycle holonomies admit no unitary intertwiner");
    REQUIRE_FALSE(res.cycle_edges.empty());
  }

  SECTION("components are solved independently") {
    // two disjoint 3-cycles under the same shift
    std::vector<FlowWord> gens{FlowWord::single("a")};
    auto two = build_orbit(fx.dom, fx.fields, {hft::pt(0.1, 0.2), hft::pt(0.1, 0.7)}, gens);
    REQUIRE(two.size() == 6);
    auto base = random_generalized_connection(two, 2, 50);
    auto moved = generalized_gauge_transform(two, base, random_point_gauge(two, 2, 51));
    auto res = generalized_gauge_solve(base, moved, two);
    REQUIRE(res.equivalent);
    REQUIRE(res.max_residual < 1e-12);

    // breaking one component's cycle holonomy is detected
    std::vector<CMat> tampered;
    for (std::size_t e = 0; e < moved.edge_count(); ++e) {
      tampered.push_back(moved.edge_unitary(static_cast<int>(e)));
    }
    Rng rng = seeded_rng(52, "tamper");
    tampered[0] = CMat(haar_unitary(2, rng) * tampered[0]);
    GeneralizedConnection broken("tampered", 2, tampered);
    auto bad = generalized_gauge_solve(base, broken, two);
    REQUIRE_FALSE(bad.equivalent);
    REQUIRE_FALSE(bad.cycle_edges.empty());
  }
}
