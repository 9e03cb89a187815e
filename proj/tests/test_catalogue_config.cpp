// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "holoflow/config.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "test_helpers.hpp"

using namespace holoflow;
using Catch::Matchers::ContainsSubstring;

namespace {

Json minimal_config(const std::string& suite) {
  return Json{{"suite", suite}};
}

// A config exercising every block the parser knows.
Json full_config() {
  return Json::parse(R"({
    "description": "parser round trip",
    "suite": "unitarity",
    "seed": 7,
    "threads": 2,
    "strict": true,
    "out": "scratch",
    "domain": {
      "topology": "torus",
      "dim": 2,
      "extent": [[0.0, 1.0], [0.0, 1.0]],
      "metric": {"id": "g", "family": "conformal-metric", "params": {"amp": 0.05}}
    },
    "grids": [16, 32],
    "tolerances": {"unitarity": 0.02},
    "catalogue": {
      "fields": [
        {"id": "v", "family": "constant-field", "params": {"x": 0.25, "y": 0.5}},
        {"id": "w", "family": "bump-field",
         "params": {"cx": 0.5, "cy": 0.5, "radius": 0.3, "vx": 0.2}}
      ],
      "connections": [{"id": "A", "family": "u1-trig", "params": {"a": 0.4, "b": 0.3}}],
      "gauges": [{"id": "u", "family": "phase-gauge", "params": {"amp": 0.2}}],
      "functions": [{"id": "f", "family": "trig-function", "params": {"kx": 1, "ky": 2}}]
    },
    "elements": [
      {"function": "f", "coefficient": [0.5, -1.0], "word": [["v", 1], ["w", -1]]}
    ],
    "norm_gap": {
      "coefficients": [1.0, 0.5],
      "elements": [[[1.0, 0.0], [0.0, 1.0]], [[2.0, 0.0], [0.0, 0.5]]],
      "iters": 30
    }
  })");
}

}  // namespace

TEST_CASE("catalogue listing is stable and validated") {
  const auto& fams = catalogue_families();

  SECTION("kinds are listed in blocks, fields first") {
    std::vector<std::string> kind_order;
    for (const auto& f : fams) {
      if (kind_order.empty() || kind_order.back() != f.kind) kind_order.push_back(f.kind);
    }
    REQUIRE(kind_order == std::vector<std::string>{"field", "connection", "metric", "gauge", "function"});
  }

  SECTION("the advertised families exist") {
    for (const std::string id : {"constant-field", "rotation-field", "su2-two-axis"}) {
      bool found = false;
      for (const auto& f : fams) found = found || f.id == id;
      REQUIRE(found);
    }
  }

  SECTION("unknown families and kind mismatches are refused") {
    ChartDomain dom = hft::unit_torus2();
    REQUIRE_THROWS_MATCHES(make_field(dom, "no-such-family", "x", {}), CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("unknown catalogue field")));
    // a real family of the wrong kind
    REQUIRE_THROWS_MATCHES(make_field(dom, "constant-u1", "x", {}), CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("is a connection")));
  }

  SECTION("unknown parameters are refused") {
    ChartDomain dom = hft::unit_torus2();
    REQUIRE_THROWS_MATCHES(
        make_field(dom, "constant-field", "x", {{"vx", 1.0}}), CatalogueError,
        Catch::Matchers::MessageMatches(ContainsSubstring("unknown parameter 'vx'")));
  }

  SECTION("fiber dimensions are restricted to 1 and 2") {
    ChartDomain dom = hft::unit_torus2();
    REQUIRE_THROWS_MATCHES(make_connection(dom, "trivial-connection", "A", {{"fiber", 3.0}}),
                           CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("must be 1 or 2")));
    REQUIRE(make_connection(dom, "trivial-connection", "A", {{"fiber", 2.0}}).fiber_dim == 2);
  }
}

TEST_CASE("catalogue field families match their formulas") {
  ChartDomain torus = hft::unit_torus2();
  ChartDomain box = hft::box2(1.0);

  SECTION("constant field") {
    VectorFieldSpec f = make_field(torus, "constant-field", "v", {{"x", 0.25}, {"y", -0.5}});
    Vec v = f.eval(hft::pt(0.3, 0.9));
    REQUIRE(v[0] == 0.25);
    REQUIRE(v[1] == -0.5);
    REQUIRE(f.divergence(hft::pt(0.1, 0.1)) == 0.0);
  }

  SECTION("linear field has divergence tr A and is box-only") {
    VectorFieldSpec f = make_field(
        box, "linear-field", "L", {{"a00", 0.2}, {"a01", 0.7}, {"a10", -0.4}, {"a11", 0.1}});
    Vec x = hft::pt(0.3, -0.2);
    Vec v = f.eval(x);
    REQUIRE_THAT(v[0], Catch::Matchers::WithinAbs(0.2 * 0.3 + 0.7 * -0.2, 1e-15));
    REQUIRE_THAT(v[1], Catch::Matchers::WithinAbs(-0.4 * 0.3 + 0.1 * -0.2, 1e-15));
    REQUIRE_THAT(f.divergence(x), Catch::Matchers::WithinAbs(0.3, 1e-15));
    REQUIRE_THROWS_MATCHES(make_field(torus, "linear-field", "L", {}), CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("box chart")));
  }

  SECTION("rotation field is divergence free and tangent to circles") {
    VectorFieldSpec f = make_field(box, "rotation-field", "R", {{"omega", 2.0}});
    Vec x = hft::pt(0.4, 0.3);
    Vec v = f.eval(x);
    REQUIRE_THAT(v.dot(x), Catch::Matchers::WithinAbs(0.0, 1e-15));
    REQUIRE(f.divergence(x) == 0.0);
    REQUIRE_THROWS_AS(make_field(torus, "rotation-field", "R", {}), CatalogueError);
  }

  SECTION("bump field vanishes outside its ball and matches finite-difference divergence") {
    CatalogueParams p{{"cx", 0.5}, {"cy", 0.5}, {"radius", 0.2}, {"vx", 0.3}, {"vy", -0.1}};
    VectorFieldSpec f = make_field(torus, "bump-field", "B", p);
    REQUIRE(f.eval(hft::pt(0.9, 0.9)).norm() == 0.0);
    Vec x = hft::pt(0.55, 0.45);
    double h = 1e-5;
    double div_fd = 0.0;
    for (int a = 0; a < 2; ++a) {
      Vec xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      div_fd += (f.eval(xp)[a] - f.eval(xm)[a]) / (2 * h);
    }
    REQUIRE_THAT(f.divergence(x), Catch::Matchers::WithinAbs(div_fd, 1e-7));
    REQUIRE_THROWS_MATCHES(make_field(torus, "bump-field", "B", {{"radius", -1.0}, {"vx", 1.0}}),
                           CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("radius")));
  }
}

TEST_CASE("catalogue connection families") {
  ChartDomain torus = hft::unit_torus2();
  ChartDomain box = hft::box2(1.0);
  OneForm A;

  SECTION("constant u(1) components are anti-Hermitian constants") {
    SmoothConnection c = make_connection(torus, "constant-u1", "A", {{"cx", 0.3}, {"cy", -0.7}});
    c.components(hft::pt(0.2, 0.8), A);
    REQUIRE(A[0](0, 0) == Complex(0.0, 0.3));
    REQUIRE(A[1](0, 0) == Complex(0.0, -0.7));
  }

  SECTION("u1-trig is periodic and refuses non-integer torus sides") {
    SmoothConnection c = make_connection(torus, "u1-trig", "A", {{"a", 0.4}, {"b", 0.3}});
    OneForm B;
    c.components(hft::pt(0.17, 0.37), A);
    c.components(hft::pt(1.17, 1.37), B);
    REQUIRE(std::abs(A[0](0, 0) - B[0](0, 0)) < 1e-15);
    REQUIRE(std::abs(A[1](0, 0) - B[1](0, 0)) < 1e-15);

    ChartDomain stretched = hft::unit_torus2();
    stretched.extent[0].hi = 1.5;
    REQUIRE_THROWS_MATCHES(make_connection(stretched, "u1-trig", "A", {}), CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("integer torus sides")));
  }

  SECTION("abelian-curvature is box-only with A_y = i b x") {
    REQUIRE_THROWS_MATCHES(make_connection(torus, "abelian-curvature", "A", {}), CatalogueError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("box chart")));
    SmoothConnection c = make_connection(box, "abelian-curvature", "A", {{"b", 2.5}});
    c.components(hft::pt(0.4, -0.9), A);
    REQUIRE(A[0](0, 0) == Complex(0.0, 0.0));
    REQUIRE(A[1](0, 0) == Complex(0.0, 2.5 * 0.4));
  }

  SECTION("diag-abelian stays diagonal, su2-two-axis does not commute") {
    SmoothConnection d = make_connection(torus, "diag-abelian", "D", {{"a", 0.5}, {"b", 0.2}});
    d.components(hft::pt(0.3, 0.6), A);
    REQUIRE(std::abs(A[0](0, 1)) + std::abs(A[0](1, 0)) == 0.0);
    REQUIRE(std::abs(A[1](1, 1)) == 0.0);  // second fiber entry is flat

    SmoothConnection s = make_connection(torus, "su2-two-axis", "S", {{"a", 0.4}, {"b", 0.3}});
    s.components(hft::pt(0.3, 0.6), A);
    CMat comm = A[0] * A[1] - A[1] * A[0];
    REQUIRE(operator_norm(comm) > 0.1);
    REQUIRE(operator_norm(CMat(A[0] + A[0].adjoint())) < 1e-15);
  }

  SECTION("su2-trig components are anti-Hermitian everywhere sampled") {
    SmoothConnection s = make_connection(torus, "su2-trig", "S", {{"a", 0.6}, {"b", 0.4}});
    for (double x : {0.1, 0.45, 0.8}) {
      s.components(hft::pt(x, 1.0 - x), A);
      for (int k = 0; k < 2; ++k) REQUIRE(operator_norm(CMat(A[k] + A[k].adjoint())) < 1e-15);
    }
  }
}

TEST_CASE("catalogue metric, gauge, and function families") {
  ChartDomain torus = hft::unit_torus2();

  SECTION("metric densities are consistent with the tensor") {
    Metric flat = make_metric(torus, "flat-metric", "g", {});
    REQUIRE(flat.density_fn(hft::pt(0.2, 0.9)) == 1.0);

    Metric conf = make_metric(torus, "conformal-metric", "g", {{"amp", 0.1}});
    Vec p = hft::pt(0.3, 0.7);
    double det = conf.tensor(p).determinant();
    REQUIRE_THAT(conf.density_fn(p), Catch::Matchers::WithinRel(std::sqrt(det), 1e-12));
  }

  SECTION("gauges are unitary; analytic partials match central differences") {
    GaugeTransform cg = make_gauge(torus, "constant-gauge", "u", {{"a", 0.4}, {"b", 0.2}});
    REQUIRE(cg.fiber_dim == 2);
    REQUIRE(unitarity_defect(cg.eval(hft::pt(0.1, 0.2))) < 1e-14);
    std::array<CMat, 3> parts;
    cg.partials(hft::pt(0.1, 0.2), parts);
    REQUIRE(operator_norm(parts[0]) == 0.0);

    GaugeTransform pg = make_gauge(torus, "phase-gauge", "u", {{"amp", 0.3}});
    Vec p = hft::pt(0.37, 0.61);
    pg.partials(p, parts);
    double h = 1e-6;
    for (int a = 0; a < 2; ++a) {
      Vec pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      CMat fd = (pg.eval(pp) - pg.eval(pm)) / (2 * h);
      REQUIRE(operator_norm(CMat(fd - parts[a])) < 1e-8);
    }

    GaugeTransform sg = make_gauge(torus, "su2-rotation-gauge", "u", {{"a", 0.5}, {"b", 0.3}});
    REQUIRE(unitarity_defect(sg.eval(p)) < 1e-14);
    REQUIRE_FALSE(sg.partials);  // derivatives fall back to central differences
  }

  SECTION("trig functions enforce integer waves on the torus only") {
    REQUIRE_THROWS_MATCHES(
        make_function(torus, "trig-function", "f", {{"kx", 1.5}}), CatalogueError,
        Catch::Matchers::MessageMatches(ContainsSubstring("must be an integer")));
    ChartDomain box = hft::box2(1.0);
    TestFunction f = make_function(box, "trig-function", "f", {{"kx", 2.0}, {"ky", 1.0}});
    REQUIRE(std::abs(f.eval(hft::pt(0.25, 0.5))) > 0.99);
  }

  SECTION("bump functions carry their support ball") {
    TestFunction f = make_function(
        torus, "bump-function", "f", {{"cx", 0.5}, {"cy", 0.5}, {"radius", 0.25}, {"re", 2.0}});
    REQUIRE(f.support.has_value());
    REQUIRE(f.support->radius == 0.25);
    REQUIRE(std::abs(f.eval(hft::pt(0.5, 0.5))) == 2.0);
    REQUIRE(std::abs(f.eval(hft::pt(0.0, 0.0))) == 0.0);
  }
}

TEST_CASE("experiment config parsing") {
  SECTION("full round trip") {
    ExperimentConfig cfg = parse_config_json(full_config());
    REQUIRE(cfg.suite == "unitarity");
    REQUIRE(cfg.seed == 7);
    REQUIRE(cfg.threads == 2);
    REQUIRE(cfg.strict);
    REQUIRE(cfg.out_dir == "scratch");
    REQUIRE(cfg.topology == Topology::Torus);
    REQUIRE(cfg.grids == std::vector<int>{16, 32});
    REQUIRE(cfg.tolerances.at("unitarity") == 0.02);
    REQUIRE(cfg.fields.size() == 2);
    REQUIRE(cfg.fields[1].params.at("radius") == 0.3);
    REQUIRE(cfg.metric.family == "conformal-metric");
    REQUIRE(cfg.elements.size() == 1);
    REQUIRE(cfg.elements[0].coeff == Complex(0.5, -1.0));
    REQUIRE(cfg.elements[0].word.size() == 2);
    REQUIRE(cfg.elements[0].word[1] == std::pair<std::string, int>{"w", -1});
    REQUIRE(cfg.norm_gap.coefficients.size() == 2);
    REQUIRE(cfg.norm_gap.elements[1](1, 1) == 0.5);
    REQUIRE(cfg.norm_gap.iters == 30);
  }

  SECTION("defaults apply when keys are omitted") {
    ExperimentConfig cfg = parse_config_json(minimal_config("ideal"));
    REQUIRE(cfg.seed == 1);
    REQUIRE(cfg.threads == 1);
    REQUIRE_FALSE(cfg.strict);
    REQUIRE(cfg.grids == std::vector<int>{64});
    REQUIRE(cfg.metric.family == "flat-metric");
    REQUIRE(cfg.dim == 2);
  }

  SECTION("json comments are accepted through the file reader") {
    std::string path = "parse_comments.json";
    {
      std::ofstream out(path);
      out << "{\n  // the suite under test\n  \"suite\": \"unitarity\",\n"
             "  /* block comment */ \"seed\": 3\n}\n";
    }
    ExperimentConfig cfg = parse_config_file(path);
    REQUIRE(cfg.suite == "unitarity");
    REQUIRE(cfg.seed == 3);
    std::remove(path.c_str());
  }

  SECTION("parse failures carry a config prefix and the offending path") {
    auto fails = [](Json j, const std::string& needle) {
      REQUIRE_THROWS_MATCHES(parse_config_json(j), ConfigParseError,
                             Catch::Matchers::MessageMatches(ContainsSubstring(needle)));
    };
    fails(Json{{"suite", "unitarity"}, {"typo", 1}}, "unknown key 'typo'");
    fails(Json{{"suite", "no-such-suite"}}, "unknown suite");
    fails(Json{{"suite", "ideal"}, {"seed", -4}}, "non-negative");
    fails(Json{{"suite", "ideal"}, {"threads", 0}}, "threads");
    fails(Json{{"suite", "ideal"}, {"domain", {{"topology", "sphere"}}}}, "'torus' or 'box'");
    fails(Json{{"suite", "ideal"}, {"domain", {{"dim", 4}}}}, "dim");
    fails(Json::parse(R"({"suite":"ideal","domain":{"extent":[[1.0,0.0],[0.0,1.0]]}})"),
          "hi > lo");
    fails(Json::parse(R"({"suite":"ideal","grids":[]})"), "non-empty");
    fails(Json::parse(R"({"suite":"ideal","elements":[{"function":"f","word":[["v",2]]}]})"),
          "sign must be 1 or -1");
    fails(Json::parse(R"({"suite":"ideal","elements":[{"function":"f","extra":1}]})"),
          "unknown key 'extra'");
    fails(Json::parse(R"({"suite":"norm-gap","norm_gap":{"coefficients":[1.0],"elements":[[[1.0,0.0]]]}})"),
          "dim x dim");
    REQUIRE_THROWS_AS(parse_config_file("does-not-exist.json"), ConfigParseError);
  }
}

TEST_CASE("experiment resolution builds the declared catalogue") {
  SECTION("a full declaration resolves") {
    ExperimentConfig cfg = parse_config_json(full_config());
    ResolvedExperiment r = resolve_experiment(cfg);
    REQUIRE(r.domain.topology == Topology::Torus);
    REQUIRE(r.fields.all().size() == 2);
    REQUIRE(r.connections.size() == 1);
    REQUIRE(r.gauges.size() == 1);
    REQUIRE(r.functions.size() == 1);
    REQUIRE(r.elements.size() == 1);
    REQUIRE(r.elements[0].terms().size() == 1);
    REQUIRE(r.elements[0].terms()[0].word.letters().size() == 2);
    REQUIRE(r.grids == std::vector<int>{16, 32});
    // the declared metric reaches the domain
    REQUIRE(r.domain.metric.density(hft::pt(0.3, 0.7)) != 1.0);
  }

  SECTION("resolution failures are catalogue errors, not parse errors") {
    auto fails = [](Json patch, const std::string& needle) {
      Json j = full_config();
      for (const auto& kv : patch.items()) j[kv.key()] = kv.value();
      ExperimentConfig cfg = parse_config_json(j);
      REQUIRE_THROWS_MATCHES(resolve_experiment(cfg), CatalogueError,
                             Catch::Matchers::MessageMatches(ContainsSubstring(needle)));
    };
    fails(Json{{"grids", {2}}}, "outside the supported 4..1024");
    fails(Json{{"grids", {2048}}}, "outside the supported 4..1024");
    fails(Json::parse(R"({"catalogue": {"fields": [
            {"id": "r", "family": "rotation-field"}]}})"),
          "box chart");
    fails(Json::parse(R"({"catalogue": {"connections": [
            {"id": "A", "family": "u1-trig"}, {"id": "A", "family": "constant-u1"}]}})"),
          "duplicate connection id");
    fails(Json::parse(R"({"elements": [{"function": "nope"}]})"), "unknown function id");
    fails(Json::parse(R"({"elements": [{"function": "f", "word": [["nope", 1]]}]})"),
          "unknown field id");
  }
}

TEST_CASE("report serialization is deterministic") {
  SECTION("complex and matrix dumps") {
    REQUIRE(complex_to_json(Complex(1.5, -2.0)).dump() == "[1.5,-2.0]");
    CMat m(1, 1);
    m(0, 0) = Complex(0.0, 1.0);
    REQUIRE(cmat_to_json(m).dump() == "[[[0.0,1.0]]]");
  }

  SECTION("element dumps carry function, coefficient, and word") {
    ExperimentConfig cfg = parse_config_json(full_config());
    ResolvedExperiment r = resolve_experiment(cfg);
    Json e = element_to_json(r.elements[0]);
    REQUIRE(e.is_array());
    REQUIRE(e[0]["function"] == "f");
    REQUIRE(e[0]["coefficient"][0] == 0.5);
    REQUIRE(e[0]["word"].size() == 2);
    REQUIRE(e[0]["word"][1][0] == "w");
    REQUIRE(e.dump() == element_to_json(r.elements[0]).dump());
  }

  SECTION("orbit, connection, and certificate dumps") {
    ChartDomain dom = hft::unit_torus2();
    FieldSet fields;
    fields.add(hft::constant_field("s", hft::pt(0.5, 0.0)));
    FinitePointSet orbit =
        build_orbit(dom, fields, {hft::pt(0.1, 0.2)}, {FlowWord::single("s")});
    Json oj = orbit_to_json(orbit);
    REQUIRE(oj["points"].size() == 2);
    REQUIRE(oj["edges"].size() == 2);
    REQUIRE(oj["edges"][0]["generator"] == FlowWord::single("s").key());

    GeneralizedConnection con = random_generalized_connection(orbit, 2, 11);
    Json cj = generalized_connection_to_json(con);
    REQUIRE(cj["fiber"] == 2);
    REQUIRE(cj["edges"].size() == 2);

    GaugeSolveResult res;
    res.equivalent = false;
    res.cycle_edges = {0, 1};
    res.reason = "trace mismatch";
    Json gj = gauge_certificate_to_json(res);
    REQUIRE(gj["cycle"].size() == 2);
    REQUIRE(gj["reason"] == "trace mismatch");
    REQUIRE(gj["equivalent"] == false);
  }

  SECTION("csv output is byte stable") {
    std::vector<DataRow> rows{{"a", 1.0, 1.0 / 3.0}, {"b", 2.0, 0.1}};
    std::ostringstream s1, s2;
    write_csv(s1, rows);
    write_csv(s2, rows);
    REQUIRE(s1.str() == s2.str());
    REQUIRE(s1.str() ==
            "series,x,y\na,1,0.33333333333333331\nb,2,0.10000000000000001\n");
  }
}
