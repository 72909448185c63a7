#include "isgfan/objectives.hpp"

namespace isgfan {

double focal_domain_loss(const std::vector<double>& per_class, const std::vector<double>& weights) {
  if (per_class.size() != weights.size()) throw std::invalid_argument("focal_domain_loss: size mismatch");
  double sum_w = 0.0;
  double total = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (weights[c] < 0.0) throw std::invalid_argument("focal_domain_loss: negative weight");
    sum_w += weights[c];
    total += weights[c] * per_class[c];
  }
  if (!weights.empty() && std::abs(sum_w - 1.0) > 1e-6) throw std::invalid_argument("focal_domain_loss: weights must sum to 1");
  return total;
}

}  // namespace isgfan
