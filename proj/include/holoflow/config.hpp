// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/catalogue.hpp"
#include "holoflow/discrete.hpp"
#include "holoflow/representation.hpp"

#include "json.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace holoflow {

// Experiment configs are JSON (with // and /* */ comments allowed).  Parsing
// (schema shape, exit code 2) is separated from resolution (catalogue ids,
// chart compatibility, resolution caps; exit code 3): a config can be
// well-formed yet unresolvable.

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "unitarity",     "homomorphism",   "ideal",          "radon-nikodym", "holonomy-oracle",
      "gauge-equivalence", "discrete-lqg", "irreducibility", "norm-gap",      "convergence"};
  return names;
}

struct CatalogueDecl {
  std::string id;
  std::string family;
  CatalogueParams params;
};

struct ElementDecl {
  std::string function_id;
  Complex coeff{1.0, 0.0};
  std::vector<std::pair<std::string, int>> word;  // (field id, sign), leftmost acts last
};

struct NormGapDecl {
  std::vector<double> coefficients;
  std::vector<RMat> elements;
  int iters = 40;
};

struct ExperimentConfig {
  std::string suite;
  std::uint64_t seed = 1;
  int threads = 1;
  bool strict = false;
  std::string out_dir = "reports";

  Topology topology = Topology::Torus;
  int dim = 2;
  std::array<Interval, 3> extent{{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}};
  CatalogueDecl metric{"metric", "flat-metric", {}};

  std::vector<int> grids{64};
  std::map<std::string, double> tolerances;

  std::vector<CatalogueDecl> fields, connections, gauges, functions;
  std::vector<ElementDecl> elements;
  NormGapDecl norm_gap;

  Json echo;  // the parsed config, embedded verbatim in reports
};

namespace detail {

[[noreturn]] inline void cfg_fail(const std::string& msg) { throw ConfigParseError("config: " + msg); }

inline const Json& member(const Json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) cfg_fail(ctx + " is missing required key '" + key + "'");
  return *it;
}

inline void check_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) cfg_fail(ctx + " must be an object");
  for (const auto& kv : j.items()) {
    bool ok = false;
    for (const auto& k : allowed) {
      if (kv.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) cfg_fail(ctx + " has unknown key '" + kv.key() + "'");
  }
}

inline double cfg_number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) cfg_fail(ctx + " must be a number");
  return j.get<double>();
}

inline std::string cfg_string(const Json& j, const std::string& ctx) {
  if (!j.is_string()) cfg_fail(ctx + " must be a string");
  return j.get<std::string>();
}

inline int cfg_int(const Json& j, const std::string& ctx) {
  if (!j.is_number_integer()) cfg_fail(ctx + " must be an integer");
  return j.get<int>();
}

inline CatalogueDecl parse_decl(const Json& j, const std::string& ctx) {
  check_keys(j, {"id", "family", "params"}, ctx);
  CatalogueDecl d;
  d.id = cfg_string(member(j, "id", ctx), ctx + ".id");
  d.family = cfg_string(member(j, "family", ctx), ctx + ".family");
  if (j.contains("params")) {
    const Json& p = j["params"];
    if (!p.is_object()) cfg_fail(ctx + ".params must be an object");
    for (const auto& kv : p.items()) d.params[kv.key()] = cfg_number(kv.value(), ctx + ".params." + kv.key());
  }
  return d;
}

inline std::vector<CatalogueDecl> parse_decl_list(const Json& j, const std::string& ctx) {
  if (!j.is_array()) cfg_fail(ctx + " must be an array");
  std::vector<CatalogueDecl> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_decl(j[i], ctx + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::pair<std::string, int>> parse_word(const Json& j, const std::string& ctx) {
  if (!j.is_array()) cfg_fail(ctx + " must be an array of [field id, sign] pairs");
  std::vector<std::pair<std::string, int>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& l = j[i];
    std::string lctx = ctx + "[" + std::to_string(i) + "]";
    if (!l.is_array() || l.size() != 2) cfg_fail(lctx + " must be a [field id, sign] pair");
    int sign = cfg_int(l[1], lctx + "[1]");
    if (sign != 1 && sign != -1) cfg_fail(lctx + " sign must be 1 or -1");
    out.emplace_back(cfg_string(l[0], lctx + "[0]"), sign);
  }
  return out;
}

inline Complex parse_complex(const Json& j, const std::string& ctx) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (!j.is_array() || j.size() != 2) cfg_fail(ctx + " must be a number or an [re, im] pair");
  return Complex(cfg_number(j[0], ctx + "[0]"), cfg_number(j[1], ctx + "[1]"));
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const Json& j) {
  using detail::cfg_fail;
  detail::check_keys(j,
                     {"description", "suite", "seed", "threads", "strict", "out", "domain", "grids",
                      "tolerances", "catalogue", "elements", "norm_gap"},
                     "config");
  ExperimentConfig cfg;
  cfg.echo = j;

  cfg.suite = detail::cfg_string(detail::member(j, "suite", "config"), "config.suite");
  bool known = false;
  for (const auto& s : suite_names()) known = known || s == cfg.suite;
  if (!known) cfg_fail("unknown suite '" + cfg.suite + "'");

  if (j.contains("seed")) {
    const Json& s = j["seed"];
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0) cfg_fail("config.seed must be a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    cfg.threads = detail::cfg_int(j["threads"], "config.threads");
    if (cfg.threads < 1) cfg_fail("config.threads must be >= 1");
  }
  if (j.contains("strict")) {
    if (!j["strict"].is_boolean()) cfg_fail("config.strict must be a boolean");
    cfg.strict = j["strict"].get<bool>();
  }
  if (j.contains("out")) cfg.out_dir = detail::cfg_string(j["out"], "config.out");
  if (j.contains("description")) detail::cfg_string(j["description"], "config.description");

  if (j.contains("domain")) {
    const Json& d = j["domain"];
    detail::check_keys(d, {"topology", "dim", "extent", "metric"}, "config.domain");
    if (d.contains("topology")) {
      std::string t = detail::cfg_string(d["topology"], "config.domain.topology");
      if (t == "torus")
        cfg.topology = Topology::Torus;
      else if (t == "box")
        cfg.topology = Topology::Box;
      else
        cfg_fail("config.domain.topology must be 'torus' or 'box'");
    }
    if (d.contains("dim")) {
      cfg.dim = detail::cfg_int(d["dim"], "config.domain.dim");
      if (cfg.dim != 2 && cfg.dim != 3) cfg_fail("config.domain.dim must be 2 or 3");
    }
    if (d.contains("extent")) {
      const Json& e = d["extent"];
      if (!e.is_array() || static_cast<int>(e.size()) != cfg.dim) {
        cfg_fail("config.domain.extent must be an array of dim [lo, hi] pairs");
      }
      for (int a = 0; a < cfg.dim; ++a) {
        const Json& iv = e[a];
        std::string ctx = "config.domain.extent[" + std::to_string(a) + "]";
        if (!iv.is_array() || iv.size() != 2) cfg_fail(ctx + " must be a [lo, hi] pair");
        cfg.extent[a].lo = detail::cfg_number(iv[0], ctx + "[0]");
        cfg.extent[a].hi = detail::cfg_number(iv[1], ctx + "[1]");
        if (!(cfg.extent[a].hi > cfg.extent[a].lo)) cfg_fail(ctx + " must have hi > lo");
      }
    }
    if (d.contains("metric")) cfg.metric = detail::parse_decl(d["metric"], "config.domain.metric");
  }

  if (j.contains("grids")) {
    const Json& g = j["grids"];
    if (!g.is_array() || g.empty()) cfg_fail("config.grids must be a non-empty array of integers");
    cfg.grids.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
      cfg.grids.push_back(detail::cfg_int(g[i], "config.grids[" + std::to_string(i) + "]"));
    }
  }

  if (j.contains("tolerances")) {
    const Json& t = j["tolerances"];
    if (!t.is_object()) cfg_fail("config.tolerances must be an object");
    for (const auto& kv : t.items()) {
      cfg.tolerances[kv.key()] = detail::cfg_number(kv.value(), "config.tolerances." + kv.key());
    }
  }

  if (j.contains("catalogue")) {
    const Json& c = j["catalogue"];
    detail::check_keys(c, {"fields", "connections", "gauges", "functions"}, "config.catalogue");
    if (c.contains("fields")) cfg.fields = detail::parse_decl_list(c["fields"], "config.catalogue.fields");
    if (c.contains("connections"))
      cfg.connections = detail::parse_decl_list(c["connections"], "config.catalogue.connections");
    if (c.contains("gauges")) cfg.gauges = detail::parse_decl_list(c["gauges"], "config.catalogue.gauges");
    if (c.contains("functions"))
      cfg.functions = detail::parse_decl_list(c["functions"], "config.catalogue.functions");
  }

  if (j.contains("elements")) {
    const Json& e = j["elements"];
    if (!e.is_array()) cfg_fail("config.elements must be an array");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const Json& t = e[i];
      std::string ctx = "config.elements[" + std::to_string(i) + "]";
      detail::check_keys(t, {"function", "coefficient", "word"}, ctx);
      ElementDecl decl;
      decl.function_id = detail::cfg_string(detail::member(t, "function", ctx), ctx + ".function");
      if (t.contains("coefficient")) decl.coeff = detail::parse_complex(t["coefficient"], ctx + ".coefficient");
      if (t.contains("word")) decl.word = detail::parse_word(t["word"], ctx + ".word");
      cfg.elements.push_back(std::move(decl));
    }
  }

  if (j.contains("norm_gap")) {
    const Json& ng = j["norm_gap"];
    detail::check_keys(ng, {"coefficients", "elements", "iters"}, "config.norm_gap");
    const Json& co = detail::member(ng, "coefficients", "config.norm_gap");
    if (!co.is_array()) cfg_fail("config.norm_gap.coefficients must be an array");
    for (std::size_t i = 0; i < co.size(); ++i) {
      cfg.norm_gap.coefficients.push_back(
          detail::cfg_number(co[i], "config.norm_gap.coefficients[" + std::to_string(i) + "]"));
    }
    const Json& el = detail::member(ng, "elements", "config.norm_gap");
    if (!el.is_array()) cfg_fail("config.norm_gap.elements must be an array of matrices");
    for (std::size_t k = 0; k < el.size(); ++k) {
      const Json& m = el[k];
      std::string ctx = "config.norm_gap.elements[" + std::to_string(k) + "]";
      if (!m.is_array() || static_cast<int>(m.size()) != cfg.dim) cfg_fail(ctx + " must be a dim x dim matrix");
      RMat g(cfg.dim, cfg.dim);
      for (int r = 0; r < cfg.dim; ++r) {
        const Json& row = m[r];
        if (!row.is_array() || static_cast<int>(row.size()) != cfg.dim) cfg_fail(ctx + " rows must have dim entries");
        for (int c = 0; c < cfg.dim; ++c) g(r, c) = detail::cfg_number(row[c], ctx);
      }
      cfg.norm_gap.elements.push_back(std::move(g));
    }
    if (ng.contains("iters")) cfg.norm_gap.iters = detail::cfg_int(ng["iters"], "config.norm_gap.iters");
  }

  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("config: cannot read '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError(std::string("config: ") + e.what());
  }
  return parse_config_json(j);
}

// Catalogue resolution: every declared id is built, duplicates and unknown
// references rejected, grid resolutions checked against the cap.
struct ResolvedExperiment {
  ChartDomain domain;
  FieldSet fields;
  std::vector<SmoothConnection> connections;
  std::vector<GaugeTransform> gauges;
  std::vector<TestFunction> functions;
  std::vector<AlgebraElement> elements;
  std::vector<int> grids;
};

namespace detail {

template <typename T>
const T& find_by_id(const std::vector<T>& items, const std::string& id, const std::string& kind) {
  for (const auto& x : items) {
    if (x.id == id) return x;
  }
  throw CatalogueError("unknown " + kind + " id '" + id + "'");
}

template <typename T>
void reject_duplicate(const std::vector<T>& items, const std::string& id, const std::string& kind) {
  for (const auto& x : items) {
    if (x.id == id) throw CatalogueError("duplicate " + kind + " id '" + id + "'");
  }
}

}  // namespace detail

inline ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg) {
  ResolvedExperiment r;
  r.domain.dim = cfg.dim;
  r.domain.topology = cfg.topology;
  r.domain.extent = cfg.extent;
  r.domain.metric = make_metric(r.domain, cfg.metric.family, cfg.metric.id, cfg.metric.params);

  for (int n : cfg.grids) {
    if (n < 4 || n > 1024) {
      throw CatalogueError("grid resolution " + std::to_string(n) + " is outside the supported 4..1024");
    }
    r.grids.push_back(n);
  }

  for (const auto& d : cfg.fields) r.fields.add(make_field(r.domain, d.family, d.id, d.params));
  for (const auto& d : cfg.connections) {
    detail::reject_duplicate(r.connections, d.id, "connection");
    r.connections.push_back(make_connection(r.domain, d.family, d.id, d.params));
  }
  for (const auto& d : cfg.gauges) {
    detail::reject_duplicate(r.gauges, d.id, "gauge");
    r.gauges.push_back(make_gauge(r.domain, d.family, d.id, d.params));
  }
  for (const auto& d : cfg.functions) {
    detail::reject_duplicate(r.functions, d.id, "function");
    r.functions.push_back(make_function(r.domain, d.family, d.id, d.params));
  }

  for (const auto& e : cfg.elements) {
    const TestFunction& f = detail::find_by_id(r.functions, e.function_id, "function");
    FlowWord w;
    for (const auto& [fid, sign] : e.word) {
      if (!r.fields.has(fid)) throw CatalogueError("element word references unknown field id '" + fid + "'");
      w = word_multiply(w, FlowWord::single(fid, sign));
    }
    r.elements.push_back(AlgebraElement::term(e.coeff, f, w));
  }

  return r;
}

// JSON dumps for reports and certificates.

inline Json complex_to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

inline Json cmat_to_json(const CMat& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json element_to_json(const AlgebraElement& a) {
  Json terms = Json::array();
  for (const auto& t : a.terms()) {
    Json word = Json::array();
    for (const auto& l : t.word.letters()) word.push_back(Json::array({l.field, l.sign}));
    terms.push_back(Json{{"function", t.func.id}, {"coefficient", complex_to_json(t.coeff)}, {"word", word}});
  }
  return terms;
}

inline Json orbit_to_json(const FinitePointSet& pts) {
  Json points = Json::array();
  for (const auto& p : pts.points()) {
    Json q = Json::array();
    for (int a = 0; a < p.size(); ++a) q.push_back(p[a]);
    points.push_back(std::move(q));
  }
  Json edges = Json::array();
  for (const auto& e : pts.edges()) {
    edges.push_back(Json{{"id", e.id},
                         {"generator", pts.generators()[e.generator].key()},
                         {"source", e.source},
                         {"target", e.target}});
  }
  return Json{{"points", std::move(points)}, {"edges", std::move(edges)}};
}

inline Json generalized_connection_to_json(const GeneralizedConnection& con) {
  Json mats = Json::array();
  for (std::size_t k = 0; k < con.edge_count(); ++k) mats.push_back(cmat_to_json(con.edge_unitary(static_cast<int>(k))));
  return Json{{"id", con.id()}, {"fiber", con.fiber_dim()}, {"edges", std::move(mats)}};
}

inline Json gauge_certificate_to_json(const GaugeSolveResult& res) {
  Json out{{"equivalent", res.equivalent},
           {"max_residual", res.max_residual},
           {"cycle", res.cycle_edges},
           {"trace1", complex_to_json(res.trace1)},
           {"trace2", complex_to_json(res.trace2)}};
  if (!res.reason.empty()) out["reason"] = res.reason;
  return out;
}

// Plot-ready CSV rows: one series name plus an (x, y) sample.  %.17g keeps
// the round trip exact and the byte stream deterministic.
struct DataRow {
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<DataRow>& rows) {
  os << "series,x,y\n";
  for (const auto& r : rows) os << r.series << "," << format_double(r.x) << "," << format_double(r.y) << "\n";
}

}  // namespace holoflow
