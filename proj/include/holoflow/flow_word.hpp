// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/geometry.hpp"

#include <algorithm>
#include <map>

namespace holoflow {

struct Letter {
  std::string field;
  int sign = 1;  // +1 or -1
  bool operator==(const Letter&) const = default;
};

// Named vector fields available to words; ids are the stable keys used in
// configs and serialized elements.
class FieldSet {
 public:
  void add(VectorFieldSpec f) {
    if (index_.count(f.id)) throw CatalogueError("duplicate vector field id '" + f.id + "'");
    index_[f.id] = fields_.size();
    fields_.push_back(std::move(f));
  }

  bool has(const std::string& id) const { return index_.count(id) != 0; }

  const VectorFieldSpec& at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw CatalogueError("unknown vector field id '" + id + "'");
    return fields_[it->second];
  }

  const std::vector<VectorFieldSpec>& all() const { return fields_; }

 private:
  std::vector<VectorFieldSpec> fields_;
  std::map<std::string, std::size_t> index_;
};

// Free-group word over the field catalogue.  Only adjacent inverse pairs
// cancel; no other rewriting (word equality modulo reparametrization is a
// semantic question, handled elsewhere).  Letters are stored left to right;
// the rightmost letter acts first on points.
class FlowWord {
 public:
  FlowWord() = default;

  explicit FlowWord(const std::vector<Letter>& letters) {
    for (const auto& l : letters) push(l);
  }

  static FlowWord single(const std::string& field_id, int sign = 1) {
    return FlowWord({Letter{field_id, sign}});
  }

  const std::vector<Letter>& letters() const { return letters_; }
  bool empty() const { return letters_.empty(); }
  std::size_t size() const { return letters_.size(); }

  FlowWord inverse() const {
    FlowWord w;
    for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) {
      w.letters_.push_back(Letter{it->field, -it->sign});
    }
    return w;  // already reduced when *this is
  }

  bool operator==(const FlowWord&) const = default;
  bool operator!=(const FlowWord&) const = default;

  std::string key() const {
    std::string k;
    for (const auto& l : letters_) {
      k += l.field;
      k += (l.sign > 0) ? '+' : '-';
      k += '|';
    }
    return k.empty() ? std::string("1") : k;
  }

 private:
  friend FlowWord word_multiply(const FlowWord&, const FlowWord&);

  void push(const Letter& l) {
    if (l.sign != 1 && l.sign != -1) throw CatalogueError("letter sign must be +1 or -1");
    if (!letters_.empty() && letters_.back().field == l.field && letters_.back().sign == -l.sign) {
      letters_.pop_back();
    } else {
      letters_.push_back(l);
    }
  }

  std::vector<Letter> letters_;
};

// Concatenation followed by free cancellation (cascading).
inline FlowWord word_multiply(const FlowWord& w1, const FlowWord& w2) {
  FlowWord w = w1;
  for (const auto& l : w2.letters_) w.push(l);
  return w;
}

// Time-1 flows applied rightmost-first; sign -1 runs the flow backwards.
inline Vec word_apply(const ChartDomain& dom, const FieldSet& fields, const FlowWord& w, Vec m,
                      const FlowOptions& opt = {},
                      const std::function<void(const Vec&)>& sink = nullptr) {
  const auto& ls = w.letters();
  if (sink && ls.empty()) sink(m);
  for (auto it = ls.rbegin(); it != ls.rend(); ++it) {
    if (sink) {
      // Avoid duplicating the junction point between letters.
      bool first = (it == ls.rbegin());
      bool skipped = false;
      m = flow_at(dom, fields.at(it->field), m, it->sign, opt, [&](const Vec& p) {
        if (!skipped && !first) {
          skipped = true;
          return;
        }
        skipped = true;
        sink(p);
      });
    } else {
      m = flow_at(dom, fields.at(it->field), m, it->sign, opt);
    }
  }
  return m;
}

// word_apply plus the accumulated Liouville volume integral along the
// actual trajectory: det D(w)(m) = exp(logdet).
inline std::pair<Vec, double> word_apply_logdet(const ChartDomain& dom, const FieldSet& fields,
                                                const FlowWord& w, Vec m, const FlowOptions& opt = {},
                                                const std::function<void(const Vec&)>& sink = nullptr) {
  double logdet = 0.0;
  const auto& ls = w.letters();
  if (sink && ls.empty()) sink(m);
  bool first = true;
  for (auto it = ls.rbegin(); it != ls.rend(); ++it) {
    bool skip_head = !first;
    bool skipped = false;
    std::function<void(const Vec&)> local;
    if (sink) {
      local = [&](const Vec& p) {
        if (!skipped && skip_head) {
          skipped = true;
          return;
        }
        skipped = true;
        sink(p);
      };
    }
    auto [pt, ld] = flow_at_logdet(dom, fields.at(it->field), m, it->sign, opt, local);
    m = pt;
    logdet += ld;
    first = false;
  }
  return {m, logdet};
}

// |det D(w)(m)| by central differences on word_apply.
inline double flow_jacobian_det(const ChartDomain& dom, const FieldSet& fields, const FlowWord& w,
                                const Vec& m, const FlowOptions& opt = {}) {
  if (w.empty()) return 1.0;
  double off = opt.jacobian_offset_rel * dom.scale();
  return map_jacobian_det(
      dom, [&](const Vec& p) { return word_apply(dom, fields, w, p, opt); }, m, off);
}

// The parameterized trace t ∈ [0,1] ↦ w(a, t): concatenated per-letter
// trajectories, each letter on an equal parameter subinterval, rightmost
// letter first.  Empty words give the constant curve.
inline Curve word_trace(const ChartDomain& dom, const FieldSet& fields, const FlowWord& w, const Vec& a,
                        int samples_per_letter, const FlowOptions& opt = {}) {
  Curve c;
  c.id = "trace[" + w.key() + "]";
  if (w.empty()) {
    c.params = {0.0, 1.0};
    c.points = {a, a};
    return c;
  }
  int k = static_cast<int>(w.size());
  int P = std::max(1, samples_per_letter);
  c.params.reserve(static_cast<std::size_t>(k) * P + 1);
  c.points.reserve(static_cast<std::size_t>(k) * P + 1);
  Vec x = a;
  c.params.push_back(0.0);
  c.points.push_back(x);
  const auto& ls = w.letters();
  int j = 0;
  for (auto it = ls.rbegin(); it != ls.rend(); ++it, ++j) {
    const auto& X = fields.at(it->field);
    for (int s = 1; s <= P; ++s) {
      x = flow_at(dom, X, x, it->sign / static_cast<double>(P), opt);
      c.params.push_back((j + s / static_cast<double>(P)) / k);
      c.points.push_back(x);
    }
  }
  return c;
}

}  // namespace holoflow
