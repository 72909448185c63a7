#include "isgfan/subdomain_attention.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace isgfan {

double anchor_value() { return std::numbers::ln2; }

void AttentionConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("attention alpha must lie in (0, 1)");
  if (!(tau > 0.0)) throw std::invalid_argument("attention tau must be positive");
  if (!(momentum > 0.0 && momentum < 1.0)) throw std::invalid_argument("attention momentum must lie in (0, 1)");
  if (!std::isfinite(beta)) throw std::invalid_argument("attention beta must be finite");
  if (!(eps > 0.0)) throw std::invalid_argument("attention eps must be positive");
}

AttentionState::AttentionState(int num_classes, AttentionConfig config)
    : config_(config), ema_(static_cast<std::size_t>(num_classes), 1.0), theta_(anchor_value()) {
  if (num_classes < 1) throw std::invalid_argument("attention state needs at least one class");
  config_.validate();
}

std::vector<double> AttentionState::weights(const std::vector<double>& per_class_loss,
                                            const std::vector<int>& per_class_count) const {
  const std::size_t c = ema_.size();
  if (per_class_loss.size() != c || per_class_count.size() != c) {
    throw std::invalid_argument("attention: per-class vectors must have one entry per class");
  }
  const double uniform = 1.0 / static_cast<double>(c);
  bool any = false;
  for (std::size_t k = 0; k < c; ++k) {
    if (per_class_count[k] < 0) throw std::invalid_argument("attention: negative sample count");
    if (per_class_count[k] > 0) {
      if (!std::isfinite(per_class_loss[k])) throw std::invalid_argument("attention: non-finite loss");
      any = true;
    }
  }
  if (!any) return std::vector<double>(c, uniform);

  const double m = config_.momentum;
  std::vector<double> d(c);
  for (std::size_t k = 0; k < c; ++k) {
    const double blended = per_class_count[k] > 0 ? (1.0 - m) * per_class_loss[k] + m * ema_[k] : ema_[k];
    d[k] = std::max(theta_ - blended, 0.0);
  }

  // Temperature softmax restricted to the under-aligned set (d > 0).
  double d_max = 0.0;
  for (double v : d) d_max = std::max(d_max, v);
  double z = 0.0;
  for (double v : d) {
    if (v > 0.0) z += std::exp((v - d_max) / config_.tau);
  }

  std::vector<double> w(c);
  for (std::size_t k = 0; k < c; ++k) {
    w[k] = config_.alpha * uniform;
    if (d[k] > 0.0) w[k] += (1.0 - config_.alpha) * std::exp((d[k] - d_max) / config_.tau) / z;
  }

  for (std::size_t k = 0; k < c; ++k) {
    if (per_class_count[k] > 0) w[k] *= std::pow(static_cast<double>(per_class_count[k]) + config_.eps, config_.beta);
  }

  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total + config_.eps;
  return w;
}

std::vector<double> AttentionState::compute_weights_and_update(const std::vector<double>& per_class_loss,
                                                               const std::vector<int>& per_class_count) {
  std::vector<double> w = weights(per_class_loss, per_class_count);
  const double m = config_.momentum;
  for (std::size_t k = 0; k < ema_.size(); ++k) {
    if (per_class_count[k] > 0) ema_[k] = m * ema_[k] + (1.0 - m) * per_class_loss[k];
  }
  return w;
}

}  // namespace isgfan
