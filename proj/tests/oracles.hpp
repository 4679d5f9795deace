#pragma once

// Test-side reference implementations, kept independent of the library code
// paths they check.

#include <Eigen/Core>
#include <functional>
#include <set>
#include <vector>

#include "spbs/autodiff.hpp"

namespace oracles {

// Average precision by direct rank counting, no sorting: the rank of s is one
// plus the number of sememes strictly ahead of it (higher score, or equal
// score with smaller id).
inline double brute_force_ap(const Eigen::VectorXd& scores, const std::set<int>& gold) {
  double total = 0.0;
  for (int s : gold) {
    int rank = 1;
    int gold_at_or_above = 0;
    for (int j = 0; j < scores.size(); ++j) {
      bool ahead = scores(j) > scores(s) || (scores(j) == scores(s) && j < s);
      if (j != s && ahead) {
        ++rank;
        if (gold.count(j) > 0) ++gold_at_or_above;
      }
    }
    total += static_cast<double>(gold_at_or_above + 1) / static_cast<double>(rank);
  }
  return total / static_cast<double>(gold.size());
}

inline double brute_force_f1(const std::set<int>& pred, const std::set<int>& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  double hit = 0;
  for (int s : pred)
    if (gold.count(s) > 0) ++hit;
  if (hit == 0) return 0.0;
  double p = hit / static_cast<double>(pred.size());
  double r = hit / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

// Central finite differences of `f` with respect to every entry of `params`.
inline std::vector<Eigen::MatrixXd> finite_difference(
    const std::function<double()>& f, const std::vector<spbs::ad::Tensor*>& params,
    double h = 1e-5) {
  std::vector<Eigen::MatrixXd> grads;
  for (spbs::ad::Tensor* t : params) {
    Eigen::MatrixXd grad(t->value.rows(), t->value.cols());
    for (Eigen::Index r = 0; r < t->value.rows(); ++r)
      for (Eigen::Index c = 0; c < t->value.cols(); ++c) {
        double saved = t->value(r, c);
        t->value(r, c) = saved + h;
        double up = f();
        t->value(r, c) = saved - h;
        double down = f();
        t->value(r, c) = saved;
        grad(r, c) = (up - down) / (2.0 * h);
      }
    grads.push_back(std::move(grad));
  }
  return grads;
}

// Relative error between gradient tensors by vector norm.
inline double gradient_relative_error(const Eigen::MatrixXd& analytic,
                                      const Eigen::MatrixXd& numeric) {
  double denom = std::max({analytic.norm(), numeric.norm(), 1e-12});
  return (analytic - numeric).norm() / denom;
}

}  // namespace oracles
