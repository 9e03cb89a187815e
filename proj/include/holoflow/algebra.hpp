// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/flow_word.hpp"

#include <algorithm>
#include <optional>

namespace holoflow {

// Ball support metadata; absent means "no compactness claim" (whole torus,
// or a derived function whose exact support we do not track).
struct SupportBall {
  Vec center;
  double radius = 0.0;
};

struct TestFunction {
  std::string id;
  std::function<Complex(const Vec&)> eval;
  std::optional<SupportBall> support;
};

inline TestFunction func_conj(const TestFunction& f) {
  TestFunction g;
  g.id = "conj(" + f.id + ")";
  auto fe = f.eval;
  g.eval = [fe](const Vec& m) { return std::conj(fe(m)); };
  g.support = f.support;
  return g;
}

inline TestFunction func_product(const TestFunction& f, const TestFunction& g) {
  TestFunction h;
  h.id = "(" + f.id + "*" + g.id + ")";
  auto fe = f.eval, ge = g.eval;
  h.eval = [fe, ge](const Vec& m) { return fe(m) * ge(m); };
  if (f.support && !g.support) h.support = f.support;
  if (g.support && !f.support) h.support = g.support;
  if (f.support && g.support) {
    h.support = (f.support->radius < g.support->radius) ? f.support : g.support;
  }
  return h;
}

// The flow action on functions: (w(f))(m) = f(w^{-1}(m)).
inline TestFunction word_action_on_function(const ChartDomain& dom, const FieldSet& fields,
                                            const FlowWord& w, const TestFunction& f,
                                            const FlowOptions& opt = {}) {
  if (w.empty()) return f;
  TestFunction g;
  g.id = "[" + w.key() + "](" + f.id + ")";
  FlowWord winv = w.inverse();
  auto fe = f.eval;
  g.eval = [&dom, &fields, winv, fe, opt](const Vec& m) {
    return fe(dom.wrap(word_apply(dom, fields, winv, m, opt)));
  };
  g.support = std::nullopt;  // transported support is not a ball; tracked by callers when needed
  return g;
}

struct AlgebraTerm {
  Complex coeff{1.0, 0.0};
  TestFunction func;
  FlowWord word;
};

// Finite sum of terms c * f * F in the cross product of the flow group with
// the test functions.  Terms with equal (function id, word) merge; function
// ids are structural, so the merge is sound for catalogue-derived functions.
class AlgebraElement {
 public:
  AlgebraElement() = default;

  static AlgebraElement term(Complex c, TestFunction f, FlowWord w) {
    AlgebraElement a;
    a.terms_.push_back({c, std::move(f), std::move(w)});
    return a;
  }

  static AlgebraElement from_function(TestFunction f) { return term(1.0, std::move(f), FlowWord()); }

  static AlgebraElement from_word(FlowWord w) {
    TestFunction one;
    one.id = "one";
    one.eval = [](const Vec&) { return Complex(1.0, 0.0); };
    return term(1.0, std::move(one), std::move(w));
  }

  const std::vector<AlgebraTerm>& terms() const { return terms_; }
  bool zero() const { return terms_.empty(); }

  void add_term(AlgebraTerm t) {
    for (auto& u : terms_) {
      if (u.word == t.word && u.func.id == t.func.id) {
        u.coeff += t.coeff;
        prune();
        return;
      }
    }
    terms_.push_back(std::move(t));
    sort();
  }

  friend AlgebraElement element_add(const AlgebraElement& a, const AlgebraElement& b) {
    AlgebraElement out = a;
    for (const auto& t : b.terms_) out.add_term(t);
    return out;
  }

  friend AlgebraElement element_scale(Complex c, const AlgebraElement& a) {
    AlgebraElement out = a;
    for (auto& t : out.terms_) t.coeff *= c;
    out.prune();
    return out;
  }

 private:
  void sort() {
    std::stable_sort(terms_.begin(), terms_.end(), [](const AlgebraTerm& x, const AlgebraTerm& y) {
      std::string kx = x.word.key(), ky = y.word.key();
      return kx != ky ? kx < ky : x.func.id < y.func.id;
    });
  }

  void prune() {
    terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                                [](const AlgebraTerm& t) { return t.coeff == Complex(0.0, 0.0); }),
                 terms_.end());
  }

  std::vector<AlgebraTerm> terms_;
};

// (f1 F1)(f2 F2) = (f1 * F1(f2)) (F1 F2), extended bilinearly.
inline AlgebraElement algebra_multiply(const ChartDomain& dom, const FieldSet& fields,
                                       const AlgebraElement& a, const AlgebraElement& b,
                                       const FlowOptions& opt = {}) {
  AlgebraElement out;
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      AlgebraTerm t;
      t.coeff = ta.coeff * tb.coeff;
      t.func = func_product(ta.func, word_action_on_function(dom, fields, ta.word, tb.func, opt));
      t.word = word_multiply(ta.word, tb.word);
      out.add_term(std::move(t));
    }
  }
  return out;
}

// (f F)^* = F^{-1}(conj f) F^{-1}, extended antilinearly.
inline AlgebraElement algebra_adjoint(const ChartDomain& dom, const FieldSet& fields,
                                      const AlgebraElement& a, const FlowOptions& opt = {}) {
  AlgebraElement out;
  for (const auto& t : a.terms()) {
    AlgebraTerm s;
    s.coeff = std::conj(t.coeff);
    s.word = t.word.inverse();
    s.func = word_action_on_function(dom, fields, s.word, func_conj(t.func), opt);
    out.add_term(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local reparametrization equivalence of two words over a support region.

struct ReparamOptions {
  int samples_per_letter = 160;
  double hausdorff_tol_rel = 1e-5;  // relative to chart scale
  double endpoint_tol_rel = 1e-7;
  FlowOptions flow;
};

struct MonotoneMap {
  Vec base_point;
  // samples (t in trace1 parameter, matched arc-length fraction on trace2)
  std::vector<std::pair<double, double>> samples;
};

struct ReparamVerdict {
  bool equivalent = false;
  std::vector<MonotoneMap> maps;  // one per sample point when equivalent
  std::string reason;             // failure description otherwise
  std::optional<Vec> violation_point;
};

namespace detail {

inline double point_segment_distance(const ChartDomain& dom, const Vec& p, const Vec& a, const Vec& b,
                                     double* arc_at_foot = nullptr) {
  Vec ab = dom.min_image(b - a);
  Vec ap = dom.min_image(p - a);
  double len2 = ab.squaredNorm();
  double t = (len2 > 0.0) ? std::clamp(ap.dot(ab) / len2, 0.0, 1.0) : 0.0;
  if (arc_at_foot) *arc_at_foot = t;
  return (ap - t * ab).norm();
}

struct TraceGeometry {
  const Curve* curve;
  std::vector<double> arc;  // cumulative arc length at each sample
  double total = 0.0;
};

inline TraceGeometry trace_geometry(const ChartDomain& dom, const Curve& c) {
  TraceGeometry g;
  g.curve = &c;
  g.arc.resize(c.size(), 0.0);
  for (std::size_t k = 1; k < c.size(); ++k) {
    g.arc[k] = g.arc[k - 1] + dom.min_image(c.points[k] - c.points[k - 1]).norm();
  }
  g.total = g.arc.back();
  return g;
}

// Distance from p to the polyline, plus the arc-length of the closest foot.
inline double distance_to_trace(const ChartDomain& dom, const Vec& p, const TraceGeometry& g,
                                double* arc = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  const auto& pts = g.curve->points;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    double t;
    double d = point_segment_distance(dom, p, pts[k], pts[k + 1], &t);
    if (d < best) {
      best = d;
      best_arc = g.arc[k] + t * (g.arc[k + 1] - g.arc[k]);
    }
  }
  if (arc) *arc = best_arc;
  return best;
}

}  // namespace detail

// Tests whether the parameterized traces of F1 and F2 from sample points of
// the support are monotone reparametrizations of one another: equal
// endpoints, equal traces as point sets (two-sided Hausdorff bound), and a
// monotone arc-length matching.  Produces the matching as a certificate, or
// the first violating sample.
inline ReparamVerdict is_local_reparametrization(const ChartDomain& dom, const FieldSet& fields,
                                                 const FlowWord& F1, const FlowWord& F2,
                                                 const SupportBall& support, int samples,
                                                 std::uint64_t seed = 1, const ReparamOptions& opt = {}) {
  if (samples < 1) throw NumericError("is_local_reparametrization needs samples >= 1");
  ReparamVerdict verdict;
  double scale = std::max(1.0, dom.scale());
  double htol = opt.hausdorff_tol_rel * scale;
  double etol = opt.endpoint_tol_rel * scale;
  Rng rng = seeded_rng(seed, "reparam|" + F1.key() + "|" + F2.key());

  for (int s = 0; s < samples; ++s) {
    Vec a = support.center;
    if (support.radius > 0.0) {
      // rejection sample in the ball
      Vec d(dom.dim);
      do {
        for (int ax = 0; ax < dom.dim; ++ax) d[ax] = uniform(rng, -1.0, 1.0);
      } while (d.squaredNorm() > 1.0);
      a = dom.wrap(support.center + support.radius * d);
    }

    Curve t1 = word_trace(dom, fields, F1, a, opt.samples_per_letter, opt.flow);
    Curve t2 = word_trace(dom, fields, F2, a, opt.samples_per_letter, opt.flow);

    if (dom.distance(t1.end(), t2.end()) > etol) {
      verdict.reason = "endpoint mismatch";
      verdict.violation_point = a;
      return verdict;
    }

    auto g1 = detail::trace_geometry(dom, t1);
    auto g2 = detail::trace_geometry(dom, t2);

    MonotoneMap map;
    map.base_point = a;
    if (g1.total < htol && g2.total < htol) {
      map.samples = {{0.0, 0.0}, {1.0, 1.0}};
      verdict.maps.push_back(std::move(map));
      continue;
    }
    if (g1.total < htol || g2.total < htol) {
      verdict.reason = "one trace is degenerate";
      verdict.violation_point = a;
      return verdict;
    }

    for (std::size_t k = 0; k < t1.size(); ++k) {
      if (detail::distance_to_trace(dom, t1.points[k], g2) > htol) {
        verdict.reason = "trace of F1 leaves the trace of F2";
        verdict.violation_point = a;
        return verdict;
      }
    }
    for (std::size_t k = 0; k < t2.size(); ++k) {
      if (detail::distance_to_trace(dom, t2.points[k], g1) > htol) {
        verdict.reason = "trace of F2 leaves the trace of F1";
        verdict.violation_point = a;
        return verdict;
      }
    }

    // Monotone matching of arc-length parameterizations.
    double prev = 0.0;
    double slack = 2.0 * htol;
    for (std::size_t k = 0; k < t1.size(); ++k) {
      double arc = 0.0;
      detail::distance_to_trace(dom, t1.points[k], g2, &arc);
      if (arc < prev - slack) {
        verdict.reason = "matching is not monotone";
        verdict.violation_point = a;
        return verdict;
      }
      prev = std::max(prev, arc);
      map.samples.emplace_back(t1.params[k], arc / g2.total);
    }
    if (map.samples.front().second > slack / g2.total * 2.0 + 1e-9 ||
        map.samples.back().second < 1.0 - slack / g2.total * 2.0 - 1e-9) {
      verdict.reason = "matching does not cover the full trace";
      verdict.violation_point = a;
      return verdict;
    }
    verdict.maps.push_back(std::move(map));
  }

  verdict.equivalent = true;
  return verdict;
}

}  // namespace holoflow
