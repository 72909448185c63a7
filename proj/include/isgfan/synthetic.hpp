#pragma once

#include <cstdint>
#include <vector>

#include "isgfan/signal_ingest.hpp"

namespace isgfan {

/// Two-domain toy transfer problem. Each class is a harmonic pattern with its
/// own fundamental and overtone mix. Every sample also carries a
/// class-independent interference tone whose frequency and level depend on
/// the domain (an operating-condition component). The target domain further
/// stretches the class frequencies by freq_shift and rescales the amplitude.
struct SyntheticConfig {
  int num_classes = 4;
  Eigen::Index length = 256;
  int samples_per_class = 50;
  std::vector<double> fundamentals{6.0, 9.0, 13.0, 18.0};  ///< cycles per segment
  std::vector<double> overtone{0.8, 0.2, 0.6, 0.4};        ///< second-harmonic amplitude per class
  double freq_jitter = 0.03;                               ///< relative, uniform
  double freq_shift = 1.25;
  double amplitude_shift = 0.5;
  double tone_source = 3.0;        ///< interference frequency, cycles per segment
  double tone_target = 11.0;
  double tone_level_source = 0.5;  ///< interference amplitude relative to the class pattern
  double tone_level_target = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Clean segments of one domain; rows grouped by class, labels attached.
SegmentedDataset synthetic_domain(const SyntheticConfig& cfg, bool target_domain);

/// Source and target domains ("syn_src", "syn_tgt"), each with noise injected
/// per `noise` when given.
std::map<std::string, SegmentedDataset> synthetic_conditions(const SyntheticConfig& cfg,
                                                             const std::optional<NoiseSpec>& noise);

}  // namespace isgfan
