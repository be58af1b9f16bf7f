// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// A small reverse-mode automatic differentiation tape over dense Eigen
// matrices. Every tensor in the model is a 2-D matrix (channels x frames);
// batching happens outside the tape, one tape per example.

#ifndef MTSE_CORE_AD_H_
#define MTSE_CORE_AD_H_

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mtse::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A trainable tensor. `grad` accumulates across Backward() calls until
// ZeroGrad().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix &value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape *tape() const { return tape_; }
  int index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape *tape, int index) : tape_(tape), index_(index) {}

  Tape *tape_ = nullptr;
  int index_ = -1;
};

class Tape {
 public:
  // With record == false no backward closures are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool recording() const { return record_; }

  Var Constant(Matrix value);
  // Leaf bound to a parameter; gradients flow straight into p.grad.
  Var Param(Parameter &p);

  using BackwardFn = std::function<void(const Matrix &grad)>;
  // Adds a computed node. `parents` decide whether the node needs a
  // gradient; `backward` receives d(loss)/d(node) and must route it into
  // the parents via Accumulate().
  Var Emit(Matrix value, std::initializer_list<Var> parents,
           BackwardFn backward);
  Var Emit(Matrix value, const std::vector<Var> &parents, BackwardFn backward);

  bool NeedsGrad(const Var &v) const { return nodes_[v.index()].needs_grad; }
  void Accumulate(const Var &v, const Matrix &grad);

  // Seeds d(out)/d(out) = seed (out must be 1x1) and runs the reverse sweep.
  void Backward(const Var &out, double seed = 1.0);

  const Matrix &ValueOf(int index) const;
  // Gradient of a non-parameter node after Backward(); zero if untouched.
  Matrix GradOf(const Var &v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix *ref = nullptr;
    Matrix grad;
    Parameter *param = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::deque<Node> nodes_;
};

inline const Matrix &Var::value() const { return tape_->ValueOf(index_); }

// ---- elementwise and linear-algebra primitives ------------------------

Var MatMul(const Var &a, const Var &b);
Var Add(const Var &a, const Var &b);
Var Sub(const Var &a, const Var &b);
Var Mul(const Var &a, const Var &b);  // Hadamard
Var Scale(const Var &a, double c);
Var AddScalar(const Var &a, double c);
// a (R x C) + v (R x 1) broadcast over columns.
Var AddColBroadcast(const Var &a, const Var &v);
// a (R x C) .* r (1 x C) broadcast over rows.
Var MulRowBroadcast(const Var &a, const Var &r);
// W x + b, with b broadcast over columns.
Var Affine(const Var &w, const Var &x, const Var &b);

Var Tanh(const Var &a);
Var Sigmoid(const Var &a);
Var Relu(const Var &a);

Var Sum(const Var &a);       // 1 x 1
Var RowMean(const Var &a);   // R x 1, mean over columns
Var BroadcastCols(const Var &v, Eigen::Index cols);
Var Transpose(const Var &a);
Var ConcatRows(const Var &a, const Var &b);
Var SliceCols(const Var &a, Eigen::Index start, Eigen::Index count);
// out.col(j) = a.col(perm[j]).
Var PermuteCols(const Var &a, std::shared_ptr<const std::vector<int>> perm);
// Mean of 1x1 scalars with optional per-term weights.
Var WeightedSum(const std::vector<Var> &terms,
                const std::vector<double> &weights);

}  // namespace mtse::ad

#endif  // MTSE_CORE_AD_H_
