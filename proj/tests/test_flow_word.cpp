// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace holoflow;
using hft::pt;

namespace {

FieldSet make_fields() {
  FieldSet fs;
  fs.add(hft::constant_field("tx", pt(0.3, 0.0)));
  fs.add(hft::constant_field("ty", pt(0.0, 0.2)));
  fs.add(hft::bump_field("b", pt(0.5, 0.5), 0.42, pt(0.18, -0.1)));
  return fs;
}

}  // namespace

TEST_CASE("free cancellation") {
  FlowWord w = word_multiply(FlowWord::single("x"), FlowWord::single("x", -1));
  REQUIRE(w.empty());

  FlowWord a({{"x", 1}, {"y", 1}});
  FlowWord b({{"y", -1}, {"z", 1}});
  FlowWord ab = word_multiply(a, b);
  REQUIRE(ab == FlowWord({{"x", 1}, {"z", 1}}));

  // cascading cancellation down to the identity
  FlowWord c({{"x", 1}, {"y", 1}});
  REQUIRE(word_multiply(c, c.inverse()).empty());
  REQUIRE(word_multiply(c.inverse(), c).empty());
}

TEST_CASE("group axioms at the symbolic level") {
  Rng rng = seeded_rng(11, "word-axioms");
  std::vector<std::string> ids = {"x", "y", "z"};
  auto random_word = [&](int len) {
    std::vector<Letter> ls;
    for (int i = 0; i < len; ++i) {
      ls.push_back({ids[static_cast<std::size_t>(uniform(rng, 0, 2.999))],
                    uniform(rng, 0, 1) < 0.5 ? 1 : -1});
    }
    return FlowWord(ls);
  };
  for (int trial = 0; trial < 50; ++trial) {
    FlowWord a = random_word(4), b = random_word(3), c = random_word(5);
    REQUIRE(word_multiply(word_multiply(a, b), c) == word_multiply(a, word_multiply(b, c)));
    REQUIRE(word_multiply(a, FlowWord()) == a);
    REQUIRE(word_multiply(FlowWord(), a) == a);
    REQUIRE(word_multiply(a, a.inverse()).empty());
  }
}

TEST_CASE("word_apply basics") {
  auto dom = hft::unit_torus2();
  auto fs = make_fields();
  Vec m = pt(0.15, 0.4);

  REQUIRE(word_apply(dom, fs, FlowWord(), m).isApprox(m, 0.0));

  Vec one = word_apply(dom, fs, FlowWord::single("tx"), m);
  Vec direct = flow_at(dom, fs.at("tx"), m, 1.0);
  REQUIRE((one - direct).norm() == 0.0);

  // rightmost letter acts first: [ty, tx] means tx then ty
  Vec two = dom.wrap(word_apply(dom, fs, FlowWord({{"ty", 1}, {"tx", 1}}), m));
  REQUIRE(std::abs(two[0] - 0.45) < 1e-12);
  REQUIRE(std::abs(two[1] - 0.6) < 1e-12);
}

TEST_CASE("word inverse law on points") {
  auto dom = hft::unit_torus2();
  auto fs = make_fields();
  Rng rng = seeded_rng(3, "word-inverse");
  FlowWord w({{"b", 1}, {"tx", 1}, {"b", -1}, {"ty", 1}});
  for (int i = 0; i < 8; ++i) {
    Vec m = pt(uniform(rng, 0, 1), uniform(rng, 0, 1));
    Vec back = word_apply(dom, fs, word_multiply(w.inverse(), w), m);
    // symbolic cancellation makes this exact
    REQUIRE(back.isApprox(m, 0.0));
    // semantic round trip through the integrator
    Vec fwd = word_apply(dom, fs, w, m);
    Vec inv = word_apply(dom, fs, w.inverse(), fwd);
    REQUIRE(dom.distance(inv, m) < 1e-9);
  }
}

TEST_CASE("jacobian chain rule across words") {
  auto dom = hft::unit_torus2();
  auto fs = make_fields();
  FlowWord F({{"b", 1}, {"tx", 1}});
  FlowWord G({{"ty", 1}, {"b", -1}});
  Rng rng = seeded_rng(5, "word-chain");
  for (int i = 0; i < 5; ++i) {
    Vec m = pt(uniform(rng, 0, 1), uniform(rng, 0, 1));
    double lhs = flow_jacobian_det(dom, fs, word_multiply(F, G), m);
    double rhs = flow_jacobian_det(dom, fs, F, word_apply(dom, fs, G, m)) * flow_jacobian_det(dom, fs, G, m);
    REQUIRE(std::abs(lhs - rhs) < 1e-4);
  }
}

TEST_CASE("liouville route agrees with central differences on words") {
  auto dom = hft::unit_torus2();
  auto fs = make_fields();
  FlowWord w({{"b", 1}, {"ty", -1}, {"b", 1}});
  Vec m = pt(0.52, 0.47);
  auto [p, logdet] = word_apply_logdet(dom, fs, w, m);
  double fd = flow_jacobian_det(dom, fs, w, m);
  REQUIRE(std::abs(std::exp(logdet) - fd) < 1e-4);
  REQUIRE((p - word_apply(dom, fs, w, m)).norm() == 0.0);
}

TEST_CASE("word_apply sink visits a continuous trajectory") {
  auto dom = hft::unit_torus2();
  auto fs = make_fields();
  FlowWord w({{"ty", 1}, {"tx", -1}});
  Vec m = pt(0.8, 0.1);
  std::vector<Vec> samples;
  Vec out = word_apply(dom, fs, w, m, {}, [&](const Vec& p) { samples.push_back(p); });
  REQUIRE(samples.size() >= 3);
  REQUIRE(samples.front().isApprox(m, 0.0));
  REQUIRE(samples.back().isApprox(out, 0.0));
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    REQUIRE((samples[k + 1] - samples[k]).norm() < 0.02);  // no junction jumps
  }
}

TEST_CASE("word_trace parameterization") {
  auto dom = hft::unit_torus2();
  auto fs = make_fields();

  SECTION("empty word is the constant curve") {
    Curve c = word_trace(dom, fs, FlowWord(), pt(0.3, 0.3), 10);
    REQUIRE(c.size() == 2);
    REQUIRE(c.points[0].isApprox(c.points[1], 0.0));
  }

  SECTION("two-letter word splits the parameter interval at 1/2") {
    FlowWord w({{"ty", 1}, {"tx", 1}});  // tx on [0,1/2], ty on [1/2,1]
    Curve c = word_trace(dom, fs, w, pt(0.1, 0.2), 8);
    REQUIRE(c.params.front() == 0.0);
    REQUIRE(c.params.back() == 1.0);
    for (std::size_t k = 0; k + 1 < c.size(); ++k) REQUIRE(c.params[k] < c.params[k + 1]);
    // at t = 1/2 the tx translation is complete
    Vec mid = c.points[8];
    REQUIRE(std::abs(c.params[8] - 0.5) < 1e-14);
    REQUIRE(std::abs(mid[0] - 0.4) < 1e-12);
    REQUIRE(std::abs(mid[1] - 0.2) < 1e-12);
  }

  SECTION("trace endpoints agree with word_apply") {
    FlowWord w({{"b", 1}, {"tx", 1}});
    Vec a = pt(0.35, 0.55);
    Curve c = word_trace(dom, fs, w, a, 32);
    REQUIRE(c.start().isApprox(a, 0.0));
    REQUIRE(dom.distance(c.end(), word_apply(dom, fs, w, a)) < 1e-10);
  }
}

TEST_CASE("field set rejects duplicates and unknowns") {
  FieldSet fs;
  fs.add(hft::zero_field(2));
  REQUIRE_THROWS_AS(fs.add(hft::zero_field(2)), CatalogueError);
  REQUIRE_THROWS_AS(fs.at("nope"), CatalogueError);
}
