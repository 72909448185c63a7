#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "isgfan/tensor.hpp"

namespace isgfan {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols)
      : name(std::move(n)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

template <typename Scalar>
using ConstParameterList = std::vector<const Parameter<Scalar>*>;

/// Weight initialization: truncated normal with a fixed standard deviation,
/// or with 1 / sqrt(fan_in), which keeps activation scale roughly constant
/// through narrow layers.
struct WeightInit {
  bool fan_in = false;
  double std = 0.02;

  double std_for(Index fan) const { return fan_in ? 1.0 / std::sqrt(static_cast<double>(fan)) : std; }
};

/// Truncated normal N(0, std^2) restricted to [-2 std, 2 std] by rejection.
template <typename Scalar>
void init_truncated_normal(Matrix<Scalar>& m, Rng& rng, double std) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      double z = normal(rng);
      while (std::abs(z) > 2.0) z = normal(rng);
      m(i, j) = static_cast<Scalar>(z * std);
    }
  }
}

}  // namespace isgfan
