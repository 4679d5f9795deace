#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "spbs/common.hpp"

namespace spbs::ad {

using Matrix = Eigen::MatrixXd;

// A named trainable parameter. Gradients accumulate across graph backward
// passes until zero_grad().
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;

  Tensor() = default;
  Tensor(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

// Reverse-mode tape over dense matrices. Nodes are created in forward order,
// so reverse creation order is a valid topological order for backward.
class Graph {
 public:
  using Var = int;

  Var input(Matrix v);
  Var param(Tensor* t);

  const Matrix& value(Var v) const { return recs_[static_cast<std::size_t>(v)].value; }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_rowwise(Var a, Var bias);  // bias is 1 x cols
  Var scale(Var a, double s);
  Var transpose(Var a);
  Var gather_rows(Var a, std::vector<int> rows);
  Var slice_cols(Var a, int start, int count);
  Var concat_cols(const std::vector<Var>& parts);
  Var softmax_rows(Var a);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

  // Mean over rows of the multi-label cross-entropy against 0/1 target rows,
  // each row normalized by `denom`; probabilities clamped to [eps, 1-eps].
  Var multilabel_bce(Var logits, Matrix targets, double denom, double eps = 1e-7);

  // Seeds the (1x1) root with `seed` and propagates to all parameters.
  void backward(Var root, double seed = 1.0);

 private:
  struct Rec {
    Matrix value;
    Matrix grad;
    std::function<void(Graph&, Rec&)> back;
    Tensor* tensor = nullptr;
  };

  Var push(Matrix value, std::function<void(Graph&, Rec&)> back);
  Matrix& grad(Var v) { return recs_[static_cast<std::size_t>(v)].grad; }

  std::vector<Rec> recs_;
};

}  // namespace spbs::ad
