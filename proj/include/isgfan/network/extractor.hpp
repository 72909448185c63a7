#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isgfan/network/layers.hpp"

namespace isgfan {

struct ExtractorConfig {
  std::vector<Index> stage_channels{40, 80, 160, 320};
  /// (kernel, stride) per stage; kernel must equal stride.
  std::vector<std::pair<Index, Index>> stage_downsample{{4, 4}, {2, 2}, {2, 2}, {2, 2}};
  Index blocks_per_stage = 1;
  Index dw_kernel = 7;
  Index expansion = 4;

  Index total_stride() const {
    Index s = 1;
    for (const auto& [k, stride] : stage_downsample) s *= stride;
    return s;
  }
  Index feature_dim() const { return stage_channels.back(); }

  void validate() const {
    if (stage_channels.empty() || stage_channels.size() != stage_downsample.size()) {
      throw std::invalid_argument("extractor config: stage table size mismatch");
    }
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
      if (stage_channels[i] < 1) throw std::invalid_argument("extractor config: channels must be positive");
      if (i > 0 && stage_channels[i] <= stage_channels[i - 1]) {
        throw std::invalid_argument("extractor config: channels must be strictly increasing");
      }
      const auto& [k, s] = stage_downsample[i];
      if (k != s || s < 1) throw std::invalid_argument("extractor config: downsampling kernel must equal stride");
    }
    if (blocks_per_stage < 1) throw std::invalid_argument("extractor config: blocks_per_stage must be >= 1");
    if (dw_kernel < 1 || dw_kernel % 2 == 0) throw std::invalid_argument("extractor config: dw_kernel must be odd");
    if (expansion < 1) throw std::invalid_argument("extractor config: expansion must be >= 1");
  }
};

/// Depthwise conv -> LN -> expand -> GELU -> GRN -> compress -> residual add.
template <typename Scalar>
class ExtractorBlock {
 public:
  ExtractorBlock() = default;
  ExtractorBlock(Index channels, Index dw_kernel, Index expansion, const std::string& name)
      : dwconv_(channels, dw_kernel, name + ".dwconv"),
        norm_(channels, name + ".norm"),
        expand_(channels, channels * expansion, name + ".expand"),
        grn_(channels * expansion, name + ".grn"),
        compress_(channels * expansion, channels, name + ".compress") {}

  void init(Rng& rng, const WeightInit& wi = {}) {
    dwconv_.init(rng, wi);
    norm_.init(rng, wi);
    expand_.init(rng, wi);
    grn_.init(rng, wi);
    compress_.init(rng, wi);
  }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& x) {
    auto h = dwconv_.forward(x);
    Matrix<Scalar> z = expand_.forward(norm_.forward(h.values));
    SequenceBatch<Scalar> act(gelu_.forward(z), x.batch, x.length);
    auto g = grn_.forward(act);
    SequenceBatch<Scalar> y(compress_.forward(g.values), x.batch, x.length);
    y.values += x.values;
    return y;
  }

  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    SequenceBatch<Scalar> dg(compress_.backward(dy.values), dy.batch, dy.length);
    auto dact = grn_.backward(dg);
    Matrix<Scalar> dh = norm_.backward(expand_.backward(gelu_.backward(dact.values)));
    auto dx = dwconv_.backward(SequenceBatch<Scalar>(std::move(dh), dy.batch, dy.length));
    dx.values += dy.values;
    return dx;
  }

  void collect(ParameterList<Scalar>& out) {
    dwconv_.collect(out);
    norm_.collect(out);
    expand_.collect(out);
    grn_.collect(out);
    compress_.collect(out);
  }

 private:
  DepthwiseConv<Scalar> dwconv_;
  ChannelLayerNorm<Scalar> norm_;
  PointwiseLinear<Scalar> expand_;
  Gelu<Scalar> gelu_;
  GlobalResponseNorm<Scalar> grn_;
  PointwiseLinear<Scalar> compress_;
};

/// Four-stage (by default) 1-D feature extractor. Each stage downsamples with a
/// non-overlapping strided conv followed by layer norm, then runs its blocks.
template <typename Scalar>
class FeatureExtractor {
 public:
  struct Stage {
    PatchConv<Scalar> downsample;
    ChannelLayerNorm<Scalar> norm;
    std::vector<ExtractorBlock<Scalar>> blocks;
  };

  FeatureExtractor() = default;
  FeatureExtractor(const ExtractorConfig& cfg, const std::string& name) : config_(cfg) {
    cfg.validate();
    Index in = 1;
    for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
      const Index ch = cfg.stage_channels[s];
      const std::string prefix = name + ".stage" + std::to_string(s + 1);
      Stage stage{PatchConv<Scalar>(in, ch, cfg.stage_downsample[s].first, prefix + ".down"),
                  ChannelLayerNorm<Scalar>(ch, prefix + ".down_norm"), {}};
      for (Index b = 0; b < cfg.blocks_per_stage; ++b) {
        stage.blocks.emplace_back(ch, cfg.dw_kernel, cfg.expansion, prefix + ".block" + std::to_string(b + 1));
      }
      stages_.push_back(std::move(stage));
      in = ch;
    }
  }

  const ExtractorConfig& config() const { return config_; }

  void init(Rng& rng, const WeightInit& wi = {}) {
    for (auto& st : stages_) {
      st.downsample.init(rng, wi);
      st.norm.init(rng, wi);
      for (auto& b : st.blocks) b.init(rng, wi);
    }
  }

  /// Returns the output of every stage; the last entry is the final feature map.
  std::vector<SequenceBatch<Scalar>> forward_stages(const SequenceBatch<Scalar>& x) {
    if (x.channels() != 1) throw std::invalid_argument("extractor: expected single-channel input");
    if (x.length % config_.total_stride() != 0) throw std::invalid_argument("invalid input length");
    std::vector<SequenceBatch<Scalar>> outputs;
    SequenceBatch<Scalar> h = x;
    for (auto& st : stages_) {
      h = st.downsample.forward(h);
      h.values = st.norm.forward(h.values);
      for (auto& b : st.blocks) h = b.forward(h);
      outputs.push_back(h);
    }
    return outputs;
  }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& x) { return forward_stages(x).back(); }

  /// Gradient with respect to the final stage map; returns the input gradient.
  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    SequenceBatch<Scalar> g = dy;
    for (auto st = stages_.rbegin(); st != stages_.rend(); ++st) {
      for (auto b = st->blocks.rbegin(); b != st->blocks.rend(); ++b) g = b->backward(g);
      g.values = st->norm.backward(g.values);
      g = st->downsample.backward(g);
    }
    return g;
  }

  void collect(ParameterList<Scalar>& out) {
    for (auto& st : stages_) {
      st.downsample.collect(out);
      st.norm.collect(out);
      for (auto& b : st.blocks) b.collect(out);
    }
  }

 private:
  ExtractorConfig config_;
  std::vector<Stage> stages_;
};

}  // namespace isgfan
