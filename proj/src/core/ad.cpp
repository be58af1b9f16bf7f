// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/core/ad.h"

#include "mtse/core/errors.h"

namespace mtse::ad {

namespace {

void CheckSameTape(const Var &a, const Var &b) {
  MTSE_REQUIRE(a.valid() && b.valid() && a.tape() == b.tape(), InvalidInput,
               "variables live on different tapes");
}

void CheckSameShape(const Var &a, const Var &b, const char *op) {
  CheckSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput(std::string(op) + ": shape mismatch " +
                       std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " +
                       std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
}

}  // namespace

Var Tape::Constant(Matrix value) {
  Node &n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Param(Parameter &p) {
  Node &n = nodes_.emplace_back();
  n.ref = &p.value;
  if (record_) {
    n.param = &p;
    n.needs_grad = true;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.ZeroGrad();
  }
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Emit(Matrix value, std::initializer_list<Var> parents,
               BackwardFn backward) {
  bool needs = false;
  if (record_)
    for (const Var &p : parents) needs = needs || nodes_[p.index()].needs_grad;
  Node &n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Emit(Matrix value, const std::vector<Var> &parents,
               BackwardFn backward) {
  bool needs = false;
  if (record_)
    for (const Var &p : parents) needs = needs || nodes_[p.index()].needs_grad;
  Node &n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::Accumulate(const Var &v, const Matrix &grad) {
  Node &n = nodes_[v.index()];
  if (!n.needs_grad) return;
  if (n.param != nullptr) {
    n.param->grad += grad;
  } else if (n.grad.size() == 0) {
    n.grad = grad;
  } else {
    n.grad += grad;
  }
}

void Tape::Backward(const Var &out, double seed) {
  MTSE_REQUIRE(record_, InvalidInput, "Backward() on a non-recording tape");
  MTSE_REQUIRE(out.rows() == 1 && out.cols() == 1, InvalidInput,
               "Backward() expects a scalar output");
  Accumulate(out, Matrix::Constant(1, 1, seed));
  for (int i = out.index(); i >= 0; --i) {
    Node &n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(n.grad);
    // Intermediate gradients are not needed after propagation.
    n.grad.resize(0, 0);
  }
}

const Matrix &Tape::ValueOf(int index) const {
  const Node &n = nodes_[index];
  return n.ref != nullptr ? *n.ref : n.value;
}

Matrix Tape::GradOf(const Var &v) const {
  const Node &n = nodes_[v.index()];
  if (n.grad.size() == 0) return Matrix::Zero(v.rows(), v.cols());
  return n.grad;
}

// ---- primitives --------------------------------------------------------

Var MatMul(const Var &a, const Var &b) {
  CheckSameTape(a, b);
  MTSE_REQUIRE(a.cols() == b.rows(), InvalidInput, "MatMul: inner dims");
  Tape *t = a.tape();
  Matrix out = a.value() * b.value();
  return t->Emit(std::move(out), {a, b}, [t, a, b](const Matrix &g) {
    if (t->NeedsGrad(a)) t->Accumulate(a, g * b.value().transpose());
    if (t->NeedsGrad(b)) t->Accumulate(b, a.value().transpose() * g);
  });
}

Var Add(const Var &a, const Var &b) {
  CheckSameShape(a, b, "Add");
  Tape *t = a.tape();
  return t->Emit(a.value() + b.value(), {a, b}, [t, a, b](const Matrix &g) {
    t->Accumulate(a, g);
    t->Accumulate(b, g);
  });
}

Var Sub(const Var &a, const Var &b) {
  CheckSameShape(a, b, "Sub");
  Tape *t = a.tape();
  return t->Emit(a.value() - b.value(), {a, b}, [t, a, b](const Matrix &g) {
    t->Accumulate(a, g);
    if (t->NeedsGrad(b)) t->Accumulate(b, -g);
  });
}

Var Mul(const Var &a, const Var &b) {
  CheckSameShape(a, b, "Mul");
  Tape *t = a.tape();
  Matrix out = a.value().cwiseProduct(b.value());
  return t->Emit(std::move(out), {a, b}, [t, a, b](const Matrix &g) {
    if (t->NeedsGrad(a)) t->Accumulate(a, g.cwiseProduct(b.value()));
    if (t->NeedsGrad(b)) t->Accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var Scale(const Var &a, double c) {
  Tape *t = a.tape();
  return t->Emit(a.value() * c, {a},
                 [t, a, c](const Matrix &g) { t->Accumulate(a, g * c); });
}

Var AddScalar(const Var &a, double c) {
  Tape *t = a.tape();
  Matrix out = a.value().array() + c;
  return t->Emit(std::move(out), {a},
                 [t, a](const Matrix &g) { t->Accumulate(a, g); });
}

Var AddColBroadcast(const Var &a, const Var &v) {
  CheckSameTape(a, v);
  MTSE_REQUIRE(v.cols() == 1 && v.rows() == a.rows(), InvalidInput,
               "AddColBroadcast: shape mismatch");
  Tape *t = a.tape();
  Matrix out = a.value().colwise() + v.value().col(0);
  return t->Emit(std::move(out), {a, v}, [t, a, v](const Matrix &g) {
    t->Accumulate(a, g);
    if (t->NeedsGrad(v)) t->Accumulate(v, g.rowwise().sum());
  });
}

Var MulRowBroadcast(const Var &a, const Var &r) {
  CheckSameTape(a, r);
  MTSE_REQUIRE(r.rows() == 1 && r.cols() == a.cols(), InvalidInput,
               "MulRowBroadcast: shape mismatch");
  Tape *t = a.tape();
  Matrix out = a.value() * r.value().row(0).asDiagonal();
  return t->Emit(std::move(out), {a, r}, [t, a, r](const Matrix &g) {
    if (t->NeedsGrad(a))
      t->Accumulate(a, g * r.value().row(0).asDiagonal());
    if (t->NeedsGrad(r))
      t->Accumulate(r, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var Affine(const Var &w, const Var &x, const Var &b) {
  CheckSameTape(w, x);
  CheckSameTape(w, b);
  MTSE_REQUIRE(w.cols() == x.rows() && b.rows() == w.rows() && b.cols() == 1,
               InvalidInput, "Affine: shape mismatch");
  Tape *t = w.tape();
  Matrix out = w.value() * x.value();
  out.colwise() += b.value().col(0);
  return t->Emit(std::move(out), {w, x, b}, [t, w, x, b](const Matrix &g) {
    if (t->NeedsGrad(w)) t->Accumulate(w, g * x.value().transpose());
    if (t->NeedsGrad(x)) t->Accumulate(x, w.value().transpose() * g);
    if (t->NeedsGrad(b)) t->Accumulate(b, g.rowwise().sum());
  });
}

Var Tanh(const Var &a) {
  Tape *t = a.tape();
  Matrix out = a.value().array().tanh();
  if (!t->recording() || !t->NeedsGrad(a))
    return t->Emit(std::move(out), {a}, nullptr);
  auto y = std::make_shared<Matrix>(out);
  return t->Emit(std::move(out), {a}, [t, a, y](const Matrix &g) {
    t->Accumulate(a, (g.array() * (1.0 - y->array().square())).matrix());
  });
}

Var Sigmoid(const Var &a) {
  Tape *t = a.tape();
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse();
  if (!t->recording() || !t->NeedsGrad(a))
    return t->Emit(std::move(out), {a}, nullptr);
  auto y = std::make_shared<Matrix>(out);
  return t->Emit(std::move(out), {a}, [t, a, y](const Matrix &g) {
    t->Accumulate(a, (g.array() * y->array() * (1.0 - y->array())).matrix());
  });
}

Var Relu(const Var &a) {
  Tape *t = a.tape();
  Matrix out = a.value().cwiseMax(0.0);
  return t->Emit(std::move(out), {a}, [t, a](const Matrix &g) {
    t->Accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var Sum(const Var &a) {
  Tape *t = a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto r = a.rows(), c = a.cols();
  return t->Emit(std::move(out), {a}, [t, a, r, c](const Matrix &g) {
    t->Accumulate(a, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var RowMean(const Var &a) {
  Tape *t = a.tape();
  const auto c = a.cols();
  Matrix out = a.value().rowwise().mean();
  return t->Emit(std::move(out), {a}, [t, a, c](const Matrix &g) {
    t->Accumulate(a, g.col(0).replicate(1, c) / static_cast<double>(c));
  });
}

Var BroadcastCols(const Var &v, Eigen::Index cols) {
  MTSE_REQUIRE(v.cols() == 1, InvalidInput, "BroadcastCols: need a column");
  Tape *t = v.tape();
  Matrix out = v.value().col(0).replicate(1, cols);
  return t->Emit(std::move(out), {v}, [t, v](const Matrix &g) {
    t->Accumulate(v, g.rowwise().sum());
  });
}

Var Transpose(const Var &a) {
  Tape *t = a.tape();
  Matrix out = a.value().transpose();
  return t->Emit(std::move(out), {a}, [t, a](const Matrix &g) {
    t->Accumulate(a, g.transpose());
  });
}

Var ConcatRows(const Var &a, const Var &b) {
  CheckSameTape(a, b);
  MTSE_REQUIRE(a.cols() == b.cols(), InvalidInput, "ConcatRows: cols");
  Tape *t = a.tape();
  const auto ra = a.rows(), rb = b.rows();
  Matrix out(ra + rb, a.cols());
  out.topRows(ra) = a.value();
  out.bottomRows(rb) = b.value();
  return t->Emit(std::move(out), {a, b}, [t, a, b, ra, rb](const Matrix &g) {
    if (t->NeedsGrad(a)) t->Accumulate(a, g.topRows(ra));
    if (t->NeedsGrad(b)) t->Accumulate(b, g.bottomRows(rb));
  });
}

Var SliceCols(const Var &a, Eigen::Index start, Eigen::Index count) {
  MTSE_REQUIRE(start >= 0 && count >= 0 && start + count <= a.cols(),
               InvalidInput, "SliceCols: out of range");
  Tape *t = a.tape();
  const auto r = a.rows(), c = a.cols();
  Matrix out = a.value().middleCols(start, count);
  return t->Emit(std::move(out), {a},
                 [t, a, start, count, r, c](const Matrix &g) {
                   Matrix full = Matrix::Zero(r, c);
                   full.middleCols(start, count) = g;
                   t->Accumulate(a, full);
                 });
}

Var PermuteCols(const Var &a, std::shared_ptr<const std::vector<int>> perm) {
  MTSE_REQUIRE(static_cast<Eigen::Index>(perm->size()) == a.cols(),
               InvalidInput, "PermuteCols: permutation size");
  Tape *t = a.tape();
  const Matrix &x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = x.col((*perm)[j]);
  return t->Emit(std::move(out), {a}, [t, a, perm](const Matrix &g) {
    Matrix back(g.rows(), g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) back.col((*perm)[j]) = g.col(j);
    t->Accumulate(a, back);
  });
}

Var WeightedSum(const std::vector<Var> &terms,
                const std::vector<double> &weights) {
  MTSE_REQUIRE(!terms.empty() && terms.size() == weights.size(), InvalidInput,
               "WeightedSum: terms/weights mismatch");
  Tape *t = terms.front().tape();
  Matrix out = Matrix::Zero(1, 1);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    MTSE_REQUIRE(terms[i].rows() == 1 && terms[i].cols() == 1, InvalidInput,
                 "WeightedSum: terms must be scalars");
    out(0, 0) += weights[i] * terms[i].value()(0, 0);
  }
  return t->Emit(std::move(out), terms, [t, terms, weights](const Matrix &g) {
    for (std::size_t i = 0; i < terms.size(); ++i)
      t->Accumulate(terms[i], g * weights[i]);
  });
}

}  // namespace mtse::ad
