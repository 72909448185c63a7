#pragma once

#include <vector>

namespace isgfan {

/// Binary cross-entropy of a random-guess (p = 0.5) domain classifier.
double anchor_value();

struct AttentionConfig {
  double alpha = 0.05;  ///< uniform-prior blend
  double tau = 0.02;    ///< softmax temperature
  double momentum = 0.3;
  double beta = -0.1;   ///< sample-count sensitivity
  double eps = 1e-8;

  void validate() const;
};

/// Cross-batch state of the subdomain attention weighting.
class AttentionState {
 public:
  AttentionState(int num_classes, AttentionConfig config = {});

  int num_classes() const { return static_cast<int>(ema_.size()); }
  const std::vector<double>& ema() const { return ema_; }
  double theta() const { return theta_; }
  const AttentionConfig& config() const { return config_; }

  /// Per-class weights for this batch (summing to one), then the EMA update
  /// for classes that had samples. Classes without samples keep their EMA.
  /// A batch with no samples at all returns uniform weights and leaves the
  /// state untouched.
  std::vector<double> compute_weights_and_update(const std::vector<double>& per_class_loss,
                                                 const std::vector<int>& per_class_count);

  /// The weight computation alone, without mutating the state.
  std::vector<double> weights(const std::vector<double>& per_class_loss,
                              const std::vector<int>& per_class_count) const;

 private:
  AttentionConfig config_;
  std::vector<double> ema_;
  double theta_;
};

}  // namespace isgfan
