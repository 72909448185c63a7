#pragma once

#include <stdexcept>

#include "isgfan/tensor.hpp"

namespace isgfan {

/// Scale applied to gradients crossing a reversal layer; must be nonnegative.
struct GrlCoefficient {
  double lambda = 1.0;

  explicit GrlCoefficient(double l = 1.0) : lambda(l) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("grl coefficient must be nonnegative");
  }
};

/// Identity in the forward direction, -lambda * g in the backward direction.
template <typename Derived>
const Derived& grl_forward(const Eigen::MatrixBase<Derived>& x) {
  return x.derived();
}

template <typename Derived>
auto grl_backward(const Eigen::MatrixBase<Derived>& upstream, GrlCoefficient coeff) {
  using Scalar = typename Derived::Scalar;
  return (upstream * static_cast<Scalar>(-coeff.lambda)).eval();
}

}  // namespace isgfan
