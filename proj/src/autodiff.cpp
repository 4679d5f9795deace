#include "spbs/autodiff.hpp"

#include <cmath>

namespace spbs::ad {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Graph::Var Graph::push(Matrix value, std::function<void(Graph&, Rec&)> back) {
  Rec rec;
  rec.value = std::move(value);
  rec.grad = Matrix::Zero(rec.value.rows(), rec.value.cols());
  rec.back = std::move(back);
  recs_.push_back(std::move(rec));
  return static_cast<Var>(recs_.size()) - 1;
}

Graph::Var Graph::input(Matrix v) { return push(std::move(v), nullptr); }

Graph::Var Graph::param(Tensor* t) {
  Var v = push(t->value, [](Graph&, Rec& rec) { rec.tensor->grad += rec.grad; });
  recs_.back().tensor = t;
  return v;
}

Graph::Var Graph::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) throw ContractError("matmul: inner dimensions differ");
  return push(av * bv, [a, b](Graph& g, Rec& rec) {
    g.grad(a) += rec.grad * g.value(b).transpose();
    g.grad(b) += g.value(a).transpose() * rec.grad;
  });
}

Graph::Var Graph::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw ContractError("add: shape mismatch");
  return push(value(a) + value(b), [a, b](Graph& g, Rec& rec) {
    g.grad(a) += rec.grad;
    g.grad(b) += rec.grad;
  });
}

Graph::Var Graph::add_rowwise(Var a, Var bias) {
  const Matrix& av = value(a);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) throw ContractError("add_rowwise: bias must be 1 x cols");
  Matrix out = av;
  out.rowwise() += bv.row(0);
  return push(std::move(out), [a, bias](Graph& g, Rec& rec) {
    g.grad(a) += rec.grad;
    g.grad(bias).row(0) += rec.grad.colwise().sum();
  });
}

Graph::Var Graph::scale(Var a, double s) {
  return push(value(a) * s, [a, s](Graph& g, Rec& rec) { g.grad(a) += s * rec.grad; });
}

Graph::Var Graph::transpose(Var a) {
  return push(value(a).transpose(),
              [a](Graph& g, Rec& rec) { g.grad(a) += rec.grad.transpose(); });
}

Graph::Var Graph::gather_rows(Var a, std::vector<int> rows) {
  const Matrix& av = value(a);
  Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows()) throw ContractError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
  }
  return push(std::move(out), [a, rows = std::move(rows)](Graph& g, Rec& rec) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      g.grad(a).row(rows[i]) += rec.grad.row(static_cast<Eigen::Index>(i));
  });
}

Graph::Var Graph::slice_cols(Var a, int start, int count) {
  const Matrix& av = value(a);
  if (start < 0 || count < 0 || start + count > av.cols())
    throw ContractError("slice_cols: range out of bounds");
  return push(av.middleCols(start, count), [a, start, count](Graph& g, Rec& rec) {
    g.grad(a).middleCols(start, count) += rec.grad;
  });
}

Graph::Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ContractError("concat_cols: row mismatch");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), [parts](Graph& g, Rec& rec) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      Eigen::Index w = g.value(p).cols();
      g.grad(p) += rec.grad.middleCols(at, w);
      at += w;
    }
  });
}

Graph::Var Graph::softmax_rows(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    double mx = av.row(r).maxCoeff();
    Eigen::ArrayXd e = (av.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return push(std::move(out), [a](Graph& g, Rec& rec) {
    const Matrix& y = rec.value;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = rec.grad.row(r).cwiseProduct(y.row(r)).sum();
      g.grad(a).row(r) += (rec.grad.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
    }
  });
}

Graph::Var Graph::gelu(Var a) {
  const Matrix& av = value(a);
  Matrix out = av.unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return push(std::move(out), [a](Graph& g, Rec& rec) {
    const Matrix& x = g.value(a);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double v = x(i, j);
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        g.grad(a)(i, j) += rec.grad(i, j) * (cdf + v * pdf);
      }
  });
}

Graph::Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = value(x);
  const Matrix& gv = value(gain);
  const Matrix& bv = value(bias);
  if (gv.rows() != 1 || bv.rows() != 1 || gv.cols() != xv.cols() || bv.cols() != xv.cols())
    throw ContractError("layer_norm: gain/bias must be 1 x cols");
  Eigen::Index d = xv.cols();
  Matrix xhat(xv.rows(), d);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mean = xv.row(r).mean();
    double var = (xv.row(r).array() - mean).square().mean();
    double s = 1.0 / std::sqrt(var + eps);
    inv_std(r) = s;
    xhat.row(r) = ((xv.row(r).array() - mean) * s).matrix();
  }
  Matrix out(xv.rows(), d);
  for (Eigen::Index r = 0; r < xv.rows(); ++r)
    out.row(r) = xhat.row(r).cwiseProduct(gv.row(0)) + bv.row(0);
  return push(std::move(out),
              [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, Rec& rec) {
                const Matrix& gv = g.value(gain);
                for (Eigen::Index r = 0; r < rec.value.rows(); ++r) {
                  Eigen::RowVectorXd dy = rec.grad.row(r);
                  g.grad(bias).row(0) += dy;
                  g.grad(gain).row(0) += dy.cwiseProduct(xhat.row(r));
                  Eigen::RowVectorXd dxhat = dy.cwiseProduct(gv.row(0));
                  double m1 = dxhat.mean();
                  double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                  g.grad(x).row(r) +=
                      inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
                }
              });
}

Graph::Var Graph::multilabel_bce(Var logits, Matrix targets, double denom, double eps) {
  const Matrix& z = value(logits);
  if (z.rows() != targets.rows() || z.cols() != targets.cols())
    throw ContractError("multilabel_bce: target shape mismatch");
  if (denom <= 0.0) throw ContractError("multilabel_bce: denom must be positive");
  Eigen::Index k = z.rows();
  Matrix p = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Matrix pc = p.unaryExpr([eps](double v) { return std::min(std::max(v, eps), 1.0 - eps); });
  double total = 0.0;
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      double y = targets(r, c);
      total += y * std::log(pc(r, c)) + (1.0 - y) * std::log(1.0 - pc(r, c));
    }
  double loss = -total / (denom * static_cast<double>(k));
  Matrix out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), [logits, targets = std::move(targets), p = std::move(p),
                               pc = std::move(pc), denom, eps](Graph& g, Rec& rec) {
    double seed = rec.grad(0, 0);
    double norm = 1.0 / (denom * static_cast<double>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        double pr = p(r, c);
        if (pr < eps || pr > 1.0 - eps) continue;  // clamped: locally flat
        double y = targets(r, c);
        double dl_dp = -(y / pc(r, c) - (1.0 - y) / (1.0 - pc(r, c))) * norm;
        g.grad(logits)(r, c) += seed * dl_dp * pr * (1.0 - pr);
      }
  });
}

void Graph::backward(Var root, double seed) {
  Rec& r = recs_[static_cast<std::size_t>(root)];
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw ContractError("backward: root must be scalar");
  r.grad(0, 0) += seed;
  for (Var v = root; v >= 0; --v) {
    Rec& rec = recs_[static_cast<std::size_t>(v)];
    if (rec.back) rec.back(*this, rec);
  }
}

}  // namespace spbs::ad
