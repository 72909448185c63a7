#include "isgfan/pseudo_labels.hpp"

#include <cmath>
#include <stdexcept>

namespace isgfan {

void PseudoLabelConfig::validate() const {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("pseudo-label xi must lie in (0, 1)");
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("pseudo-label kappa must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("pseudo-label epsilon must be nonnegative");
}

std::size_t PseudoLabelResult::accepted_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.accepted ? 1 : 0;
  return n;
}

double predictive_entropy(const Eigen::Ref<const Eigen::VectorXd>& p, double epsilon) {
  double h = 0.0;
  for (Index k = 0; k < p.size(); ++k) h -= p(k) * std::log(p(k) + epsilon);
  return h;
}

double entropy_upper_bound(double m, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("entropy_upper_bound: need at least two classes");
  if (!(m > 0.0)) throw std::invalid_argument("entropy_upper_bound: m must be positive");
  if (m > 1.0) throw std::invalid_argument("entropy_upper_bound: m must not exceed 1");
  if (m == 1.0) return 0.0;
  const double rest = 1.0 - m;
  return -m * std::log(m) - rest * std::log(rest / (num_classes - 1));
}

Eigen::MatrixXd softmax_probs(const Eigen::MatrixXd& logits) { return softmax_rows(logits); }

PseudoLabelResult assign_pseudo_labels(const Eigen::MatrixXd& logits, const PseudoLabelConfig& config) {
  config.validate();
  const int classes = static_cast<int>(logits.cols());
  if (classes < 2) throw std::invalid_argument("assign_pseudo_labels: need at least two classes");
  const double threshold = config.kappa * entropy_upper_bound(config.xi, classes);
  const Eigen::MatrixXd probs = softmax_probs(logits);
  PseudoLabelResult result;
  result.samples.resize(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    auto& s = result.samples[static_cast<std::size_t>(i)];
    Index best = 0;
    for (Index k = 1; k < probs.cols(); ++k) {
      if (probs(i, k) > probs(i, best)) best = k;
    }
    s.confidence = probs(i, best);
    s.entropy = predictive_entropy(probs.row(i).transpose(), config.epsilon);
    s.accepted = s.confidence > config.xi && s.entropy < threshold;
    s.label = s.accepted ? static_cast<int>(best) : -1;
  }
  return result;
}

}  // namespace isgfan
