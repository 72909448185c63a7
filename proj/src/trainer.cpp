#include "isgfan/trainer.hpp"

#include <numbers>

namespace isgfan {

std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::isfa: return "isfa";
    case AblationVariant::is: return "is";
    case AblationVariant::fa: return "fa";
    case AblationVariant::fald: return "fald";
    case AblationVariant::source_only: return "source_only";
  }
  return "unknown";
}

AblationVariant parse_variant(const std::string& name) {
  for (auto v : {AblationVariant::full, AblationVariant::isfa, AblationVariant::is, AblationVariant::fa,
                 AblationVariant::fald, AblationVariant::source_only}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant: " + name);
}

std::vector<AblationVariant> ablation_variants() {
  return {AblationVariant::isfa, AblationVariant::is, AblationVariant::fa, AblationVariant::fald, AblationVariant::full};
}

VariantModules modules_for(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return {true, true, true, true, true, true};
    case AblationVariant::isfa: return {false, false, false, false, true, false};
    case AblationVariant::is: return {false, false, false, false, true, true};
    case AblationVariant::fa: return {true, true, true, true, true, false};
    case AblationVariant::fald: return {true, false, true, true, true, false};
    case AblationVariant::source_only: return {};
  }
  throw std::invalid_argument("unknown variant");
}

std::vector<std::string> active_loss_terms(AblationVariant v) {
  const VariantModules m = modules_for(v);
  std::vector<std::string> terms{"LC"};
  if (m.gdc) terms.push_back("GD");
  if (m.sdc) terms.push_back("FD");
  if (m.orth) terms.push_back("orth");
  if (m.decoder) terms.push_back("recon");
  if (m.ld) terms.push_back("LD");
  return terms;
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (!(base_lr > 0.0) || !(min_lr >= 0.0) || min_lr > base_lr) {
    throw std::invalid_argument("learning rates must satisfy 0 <= min_lr <= base_lr");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (eval_interval < 1) throw std::invalid_argument("eval_interval must be >= 1");
}

double lr_at(int epoch, const TrainingConfig& cfg) {
  if (epoch < 0 || epoch > cfg.epochs) throw std::out_of_range("lr_at: epoch out of range");
  if (cfg.epochs == 0) return cfg.base_lr;
  const double progress = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

BatchSampler::BatchSampler(Index n_source, Index n_target, int batch_size, std::uint64_t seed)
    : n_source_(n_source), n_target_(n_target), batch_size_(batch_size), rng_(seed) {
  if (n_source < 1) throw std::invalid_argument("batch sampler: empty source set");
  if (batch_size < 1) throw std::invalid_argument("batch sampler: batch size must be positive");
}

std::vector<BatchSampler::Batch> BatchSampler::epoch() {
  std::vector<Index> order(static_cast<std::size_t>(n_source_));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng_);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size_)) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size_));
    b.source.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t k = 0; k < b.source.size() && n_target_ > 0; ++k) {
      if (target_pos_ == target_order_.size()) {
        target_order_.resize(static_cast<std::size_t>(n_target_));
        std::iota(target_order_.begin(), target_order_.end(), Index{0});
        std::shuffle(target_order_.begin(), target_order_.end(), rng_);
        target_pos_ = 0;
      }
      b.target.push_back(target_order_[target_pos_++]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace isgfan
