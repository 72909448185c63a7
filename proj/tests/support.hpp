#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "isgfan/trainer.hpp"

namespace isgfan::testing {

/// Two-stage extractor on length-64 inputs: small enough for finite differences.
inline ModelConfig toy_model_config(AblationVariant variant, int classes = 3) {
  ModelConfig mc;
  mc.extractor.stage_channels = {4, 8};
  mc.extractor.stage_downsample = {{4, 4}, {2, 2}};
  mc.extractor.dw_kernel = 3;
  mc.extractor.expansion = 2;
  mc.num_classes = classes;
  mc.variant = variant;
  mc.grl_lambda = 0.7;
  return mc;
}

/// Source and target batches with every class present in the source half.
inline BatchPair<double> toy_batch(Index n, Index length, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  BatchPair<double> b;
  b.source.resize(n, length);
  b.target.resize(n, length);
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < length; ++t) {
      b.source(i, t) = normal(rng);
      b.target(i, t) = normal(rng);
    }
    b.source_labels.push_back(static_cast<int>(i % classes));
  }
  return b;
}

/// Randomizes every parameter (including zero-initialized norms and biases)
/// so that no gradient vanishes by construction.
template <typename Scalar>
void randomize_parameters(IsgfanModel<Scalar>& model, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (auto* p : model.parameters()) {
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<Scalar>(scale * normal(rng));
  }
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace isgfan::testing
