// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "holoflow/grid.hpp"

#include <memory>
#include <optional>
#include <utility>

namespace holoflow {

// Linear map on grid sections.  Adjoints are taken with respect to the
// quadrature-weighted inner product, so <T x, y> = <x, T^T y> holds to
// roundoff for every implementation here.
class LinearOperator {
 public:
  LinearOperator(GridPtr grid, int fiber) : grid_(std::move(grid)), fiber_(fiber) {}
  virtual ~LinearOperator() = default;

  const GridPtr& grid() const { return grid_; }
  int fiber() const { return fiber_; }

  virtual GridSection apply(const GridSection& x) const = 0;
  virtual GridSection apply_adjoint(const GridSection& x) const = 0;

  // Exact operator norm for the shapes that have one (diagonal and
  // block-diagonal maps); power iteration takes this fast path.
  virtual std::optional<double> exact_norm() const { return std::nullopt; }

 protected:
  void check(const GridSection& x) const {
    if (x.fiber != fiber_ || x.grid->total != grid_->total) {
      throw NumericError("operator applied to a section of mismatched shape");
    }
  }

  GridPtr grid_;
  int fiber_;
};

using OpPtr = std::shared_ptr<const LinearOperator>;

class IdentityOp final : public LinearOperator {
 public:
  using LinearOperator::LinearOperator;
  GridSection apply(const GridSection& x) const override {
    check(x);
    return x;
  }
  GridSection apply_adjoint(const GridSection& x) const override {
    check(x);
    return x;
  }
  std::optional<double> exact_norm() const override { return 1.0; }
};

// Pointwise scalar multiplication (acts on every fiber component).
class MultOp final : public LinearOperator {
 public:
  MultOp(GridPtr grid, int fiber, Eigen::VectorXcd values)
      : LinearOperator(std::move(grid), fiber), values_(std::move(values)) {
    if (values_.size() != grid_->total) throw NumericError("MultOp: one value per node required");
  }

  const Eigen::VectorXcd& values() const { return values_; }

  GridSection apply(const GridSection& x) const override {
    check(x);
    GridSection y = x;
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      for (int c = 0; c < fiber_; ++c) y.values[fiber_ * i + c] *= values_[i];
    }
    return y;
  }

  GridSection apply_adjoint(const GridSection& x) const override {
    check(x);
    GridSection y = x;
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      Complex v = std::conj(values_[i]);
      for (int c = 0; c < fiber_; ++c) y.values[fiber_ * i + c] *= v;
    }
    return y;
  }

  std::optional<double> exact_norm() const override { return values_.cwiseAbs().maxCoeff(); }

 private:
  Eigen::VectorXcd values_;
};

// Pointwise matrix multiplication by u(m) (gauge transforms as operators).
class MatMultOp final : public LinearOperator {
 public:
  MatMultOp(GridPtr grid, int fiber, std::vector<CMat> blocks)
      : LinearOperator(std::move(grid), fiber), blocks_(std::move(blocks)) {
    if (static_cast<std::int64_t>(blocks_.size()) != grid_->total) {
      throw NumericError("MatMultOp: one block per node required");
    }
  }

  const std::vector<CMat>& blocks() const { return blocks_; }

  GridSection apply(const GridSection& x) const override { return mul(x, false); }
  GridSection apply_adjoint(const GridSection& x) const override { return mul(x, true); }

  std::optional<double> exact_norm() const override {
    double m = 0.0;
    for (const auto& b : blocks_) {
      Eigen::JacobiSVD<CMat> svd(b);
      m = std::max(m, svd.singularValues()(0));
    }
    return m;
  }

 private:
  GridSection mul(const GridSection& x, bool adj) const {
    check(x);
    GridSection y(x.grid, x.fiber);
    CVec v(fiber_);
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      for (int c = 0; c < fiber_; ++c) v[c] = x.values[fiber_ * i + c];
      CVec w = adj ? CVec(blocks_[i].adjoint() * v) : CVec(blocks_[i] * v);
      for (int c = 0; c < fiber_; ++c) y.values[fiber_ * i + c] = w[c];
    }
    return y;
  }

  std::vector<CMat> blocks_;
};

class ScaleOp final : public LinearOperator {
 public:
  ScaleOp(Complex c, OpPtr op) : LinearOperator(op->grid(), op->fiber()), c_(c), op_(std::move(op)) {}
  GridSection apply(const GridSection& x) const override {
    GridSection y = op_->apply(x);
    y.values *= c_;
    return y;
  }
  GridSection apply_adjoint(const GridSection& x) const override {
    GridSection y = op_->apply_adjoint(x);
    y.values *= std::conj(c_);
    return y;
  }
  std::optional<double> exact_norm() const override {
    if (auto n = op_->exact_norm()) return std::abs(c_) * *n;
    return std::nullopt;
  }

 private:
  Complex c_;
  OpPtr op_;
};

class SumOp final : public LinearOperator {
 public:
  SumOp(std::vector<OpPtr> terms) : LinearOperator(terms.at(0)->grid(), terms.at(0)->fiber()), terms_(std::move(terms)) {}
  GridSection apply(const GridSection& x) const override {
    GridSection y = terms_[0]->apply(x);
    for (std::size_t k = 1; k < terms_.size(); ++k) y.values += terms_[k]->apply(x).values;
    return y;
  }
  GridSection apply_adjoint(const GridSection& x) const override {
    GridSection y = terms_[0]->apply_adjoint(x);
    for (std::size_t k = 1; k < terms_.size(); ++k) y.values += terms_[k]->apply_adjoint(x).values;
    return y;
  }

 private:
  std::vector<OpPtr> terms_;
};

// a after b  (apply = a(b(x)))
class ComposeOp final : public LinearOperator {
 public:
  ComposeOp(OpPtr a, OpPtr b) : LinearOperator(a->grid(), a->fiber()), a_(std::move(a)), b_(std::move(b)) {}
  GridSection apply(const GridSection& x) const override { return a_->apply(b_->apply(x)); }
  GridSection apply_adjoint(const GridSection& x) const override {
    return b_->apply_adjoint(a_->apply_adjoint(x));
  }

 private:
  OpPtr a_, b_;
};

class AdjointOp final : public LinearOperator {
 public:
  explicit AdjointOp(OpPtr op) : LinearOperator(op->grid(), op->fiber()), op_(std::move(op)) {}
  GridSection apply(const GridSection& x) const override { return op_->apply_adjoint(x); }
  GridSection apply_adjoint(const GridSection& x) const override { return op_->apply(x); }
  std::optional<double> exact_norm() const override { return op_->exact_norm(); }

 private:
  OpPtr op_;
};

// Orthogonal projection onto a node mask (fiber-wide).
class ProjectOp final : public LinearOperator {
 public:
  ProjectOp(GridPtr grid, int fiber, std::vector<bool> mask)
      : LinearOperator(std::move(grid), fiber), mask_(std::move(mask)) {
    if (static_cast<std::int64_t>(mask_.size()) != grid_->total) {
      throw NumericError("ProjectOp: one flag per node required");
    }
  }
  GridSection apply(const GridSection& x) const override {
    check(x);
    GridSection y = x;
    for (std::int64_t i = 0; i < grid_->total; ++i) {
      if (!mask_[i]) {
        for (int c = 0; c < fiber_; ++c) y.values[fiber_ * i + c] = 0.0;
      }
    }
    return y;
  }
  GridSection apply_adjoint(const GridSection& x) const override { return apply(x); }

 private:
  std::vector<bool> mask_;
};

inline OpPtr op_identity(GridPtr g, int fiber) { return std::make_shared<IdentityOp>(std::move(g), fiber); }
inline OpPtr op_mult(GridPtr g, int fiber, Eigen::VectorXcd v) {
  return std::make_shared<MultOp>(std::move(g), fiber, std::move(v));
}
inline OpPtr op_scale(Complex c, OpPtr op) { return std::make_shared<ScaleOp>(c, std::move(op)); }
inline OpPtr op_sum(std::vector<OpPtr> terms) { return std::make_shared<SumOp>(std::move(terms)); }
inline OpPtr op_compose(OpPtr a, OpPtr b) { return std::make_shared<ComposeOp>(std::move(a), std::move(b)); }
inline OpPtr op_adjoint(OpPtr op) { return std::make_shared<AdjointOp>(std::move(op)); }
inline OpPtr op_sub(OpPtr a, OpPtr b) {
  return op_sum({std::move(a), op_scale(-1.0, std::move(b))});
}

struct NormEstimate {
  double value = 0.0;
  double last_delta = 0.0;  // relative change of the estimate in the final iteration
  int iters = 0;
  std::vector<double> series;
};

// Largest singular value by power iteration on T^T T with a seeded start.
// The estimate ||T x_k|| (x_k normalized) is the square root of the Rayleigh
// quotient of T^T T, nondecreasing in k.  Operators that know their exact
// norm short-circuit.
inline NormEstimate operator_norm_estimate(const LinearOperator& T, int iters, std::uint64_t seed = 1,
                                           const std::string& stream = "power") {
  if (auto n = T.exact_norm()) {
    return NormEstimate{*n, 0.0, 0, {*n}};
  }
  if (iters < 1) throw NumericError("operator_norm_estimate needs iters >= 1");
  GridSection x(T.grid(), T.fiber());
  Rng rng = seeded_rng(seed, stream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values[i] = Complex(gauss(rng), gauss(rng));
  double nx = x.norm();
  if (nx == 0.0) throw NumericError("power iteration started from the zero section");
  x.values /= nx;

  NormEstimate est;
  est.series.reserve(iters);
  double prev = 0.0;
  for (int k = 0; k < iters; ++k) {
    GridSection y = T.apply(x);
    double ny = y.norm();
    est.series.push_back(ny);
    est.last_delta = (ny > 0.0) ? (ny - prev) / ny : 0.0;
    prev = ny;
    est.value = ny;
    est.iters = k + 1;
    if (ny == 0.0) break;  // x in the kernel: T^T T x = 0, stuck at an exact zero
    GridSection z = T.apply_adjoint(y);
    double nz = z.norm();
    if (nz == 0.0) break;
    z.values /= nz;
    x = std::move(z);
  }
  return est;
}

// Dense assembly for small spaces (adjoint and residual cross-checks).
inline Eigen::MatrixXcd to_dense(const LinearOperator& T, std::int64_t cap = 4096) {
  std::int64_t dim = T.fiber() * T.grid()->total;
  if (dim > cap) throw NumericError("refusing to assemble a dense operator of dimension " + std::to_string(dim));
  Eigen::MatrixXcd M(dim, dim);
  GridSection e(T.grid(), T.fiber());
  for (std::int64_t j = 0; j < dim; ++j) {
    e.values.setZero();
    e.values[j] = 1.0;
    M.col(j) = T.apply(e).values;
  }
  return M;
}

}  // namespace holoflow
