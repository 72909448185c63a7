#pragma once

#include <vector>

#include "isgfan/objectives.hpp"
#include "isgfan/tensor.hpp"

namespace isgfan {

struct PseudoLabelConfig {
  double xi = 0.90;     ///< confidence threshold
  double kappa = 0.50;  ///< entropy threshold = kappa * H_max(xi, C)
  double epsilon = 1e-12;

  void validate() const;
};

struct PseudoLabel {
  bool accepted = false;
  int label = -1;  ///< argmax class, meaningful when accepted
  double confidence = 0.0;
  double entropy = 0.0;
};

struct PseudoLabelResult {
  std::vector<PseudoLabel> samples;
  std::size_t accepted_count() const;
};

/// -sum_k p_k log(p_k + eps), natural log.
double predictive_entropy(const Eigen::Ref<const Eigen::VectorXd>& p, double epsilon = 1e-12);

/// Entropy of the distribution with top mass m and the remainder spread
/// uniformly over the other C - 1 classes; the maximum entropy attainable for
/// that top mass.
double entropy_upper_bound(double m, int num_classes);

/// Row-wise softmax in double precision.
Eigen::MatrixXd softmax_probs(const Eigen::MatrixXd& logits);

/// Accepts a row iff max p > xi and H(p) < kappa * H_max(xi, C). Ties at the
/// argmax resolve to the smallest class index.
PseudoLabelResult assign_pseudo_labels(const Eigen::MatrixXd& logits, const PseudoLabelConfig& config);

template <typename Scalar>
PseudoLabelResult assign_pseudo_labels(const Matrix<Scalar>& logits, const PseudoLabelConfig& config) {
  return assign_pseudo_labels(Eigen::MatrixXd(logits.template cast<double>()), config);
}

}  // namespace isgfan
