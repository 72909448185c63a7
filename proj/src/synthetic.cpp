#include "isgfan/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace isgfan {

void SyntheticConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synthetic: need at least two classes");
  if (static_cast<int>(fundamentals.size()) != num_classes || static_cast<int>(overtone.size()) != num_classes) {
    throw std::invalid_argument("synthetic: one fundamental and overtone per class required");
  }
  if (length < 32 || samples_per_class < 1) throw std::invalid_argument("synthetic: length >= 32 and samples_per_class >= 1");
  if (!(freq_shift > 0.0) || !(amplitude_shift > 0.0)) throw std::invalid_argument("synthetic: shifts must be positive");
  if (!(tone_level_source >= 0.0) || !(tone_level_target >= 0.0)) {
    throw std::invalid_argument("synthetic: interference levels must be >= 0");
  }
}

SegmentedDataset synthetic_domain(const SyntheticConfig& cfg, bool target_domain) {
  cfg.validate();
  std::seed_seq seq{cfg.seed, std::uint64_t{target_domain ? 2u : 1u}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double stretch = target_domain ? cfg.freq_shift : 1.0;
  const double gain = target_domain ? cfg.amplitude_shift : 1.0;
  const double tone = target_domain ? cfg.tone_target : cfg.tone_source;
  const double tone_level = target_domain ? cfg.tone_level_target : cfg.tone_level_source;
  SegmentedDataset out;
  out.num_classes = cfg.num_classes;
  out.condition_id = target_domain ? "syn_tgt" : "syn_src";
  out.samples.resize(Eigen::Index(cfg.num_classes) * cfg.samples_per_class, cfg.length);
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(cfg.length, 0.0, double(cfg.length - 1)) / double(cfg.length);

  Eigen::Index row = 0;
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int i = 0; i < cfg.samples_per_class; ++i, ++row) {
      const double f = cfg.fundamentals[std::size_t(c)] * stretch * (1.0 + cfg.freq_jitter * (2.0 * unit(rng) - 1.0));
      const double phi1 = 2.0 * std::numbers::pi * unit(rng);
      const double phi2 = 2.0 * std::numbers::pi * unit(rng);
      const double phi3 = 2.0 * std::numbers::pi * unit(rng);
      const double amp = gain * (0.8 + 0.4 * unit(rng));
      const Eigen::ArrayXd w = 2.0 * std::numbers::pi * f * t;
      const Eigen::ArrayXd pattern = (w + phi1).sin() + cfg.overtone[std::size_t(c)] * (2.0 * w + phi2).sin();
      const Eigen::ArrayXd interference = tone_level * (2.0 * std::numbers::pi * tone * t + phi3).sin();
      out.samples.row(row) = (amp * (pattern + interference)).matrix();
      out.labels.push_back(c);
    }
  }
  return out;
}

std::map<std::string, SegmentedDataset> synthetic_conditions(const SyntheticConfig& cfg,
                                                             const std::optional<NoiseSpec>& noise) {
  std::map<std::string, SegmentedDataset> out;
  for (bool target : {false, true}) {
    SegmentedDataset d = synthetic_domain(cfg, target);
    if (noise) d.samples = inject_noise_rows(d.samples, *noise, d.condition_id);
    out.emplace(d.condition_id, std::move(d));
  }
  return out;
}

}  // namespace isgfan
