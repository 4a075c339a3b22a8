#pragma once

// Second-order jet of a scalar function: value, gradient and Hessian at a
// point.  Produced by evaluating a field with two nested dual levels.

#include <Eigen/Dense>

namespace finsler {

struct Jet2 {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;

  int dim() const { return static_cast<int>(grad.size()); }
};

}  // namespace finsler
