#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "isgfan/network/layers.hpp"

namespace isgfan {

/// Reconstructs the (batch, 1, L) input from the channel concatenation of both
/// extractors' final maps (2F channels at length L / 2^upsample_layers).
///
/// Two depthwise-separable layers (dw conv -> pointwise -> LN -> GELU) take
/// 2F -> F -> F, then stride-2 transposed convs halve the channel count each
/// time and finish at one channel; with the default five layers that is
/// F -> F/2 -> F/4 -> F/8 -> F/16 -> 1.
template <typename Scalar>
class Decoder {
 public:
  static constexpr Index kUpsampleLayers = 5;

  Decoder() = default;
  Decoder(Index feature_channels, Index dw_kernel, const std::string& name, Index upsample_layers = kUpsampleLayers)
      : features_(feature_channels) {
    if (upsample_layers < 1) throw std::invalid_argument("decoder: need at least one upsampling layer");
    const Index in = 2 * feature_channels;
    sep_.push_back(Separable{DepthwiseConv<Scalar>(in, dw_kernel, name + ".sep1.dw"),
                             PointwiseLinear<Scalar>(in, feature_channels, name + ".sep1.pw"),
                             ChannelLayerNorm<Scalar>(feature_channels, name + ".sep1.norm"), {}});
    sep_.push_back(Separable{DepthwiseConv<Scalar>(feature_channels, dw_kernel, name + ".sep2.dw"),
                             PointwiseLinear<Scalar>(feature_channels, feature_channels, name + ".sep2.pw"),
                             ChannelLayerNorm<Scalar>(feature_channels, name + ".sep2.norm"), {}});
    Index ch = feature_channels;
    for (Index i = 0; i < upsample_layers; ++i) {
      const Index next = (i + 1 == upsample_layers) ? 1 : std::max<Index>(1, ch / 2);
      up_.emplace_back(ch, next, 4, 2, 1, name + ".up" + std::to_string(i + 1));
      ch = next;
    }
    up_act_.resize(static_cast<std::size_t>(upsample_layers - 1));
  }

  Index input_channels() const { return 2 * features_; }

  void init(Rng& rng, const WeightInit& wi = {}) {
    for (auto& s : sep_) {
      s.dw.init(rng, wi);
      s.pw.init(rng, wi);
      s.norm.init(rng, wi);
    }
    for (auto& u : up_) u.init(rng, wi);
  }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& concat) {
    if (concat.channels() != input_channels()) {
      throw std::invalid_argument("decoder: expected " + std::to_string(input_channels()) + " input channels, got " +
                                  std::to_string(concat.channels()));
    }
    SequenceBatch<Scalar> h = concat;
    for (auto& s : sep_) {
      h = s.dw.forward(h);
      h.values = s.act.forward(s.norm.forward(s.pw.forward(h.values)));
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      h = up_[i].forward(h);
      if (i < up_act_.size()) h.values = up_act_[i].forward(h.values);
    }
    return h;
  }

  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    SequenceBatch<Scalar> g = dy;
    for (std::size_t i = up_.size(); i-- > 0;) {
      if (i < up_act_.size()) g.values = up_act_[i].backward(g.values);
      g = up_[i].backward(g);
    }
    for (auto s = sep_.rbegin(); s != sep_.rend(); ++s) {
      g.values = s->pw.backward(s->norm.backward(s->act.backward(g.values)));
      g = s->dw.backward(g);
    }
    return g;
  }

  void collect(ParameterList<Scalar>& out) {
    for (auto& s : sep_) {
      s.dw.collect(out);
      s.pw.collect(out);
      s.norm.collect(out);
    }
    for (auto& u : up_) u.collect(out);
  }

 private:
  struct Separable {
    DepthwiseConv<Scalar> dw;
    PointwiseLinear<Scalar> pw;
    ChannelLayerNorm<Scalar> norm;
    Gelu<Scalar> act;
  };

  Index features_ = 0;
  std::vector<Separable> sep_;
  std::vector<TransposedConv<Scalar>> up_;
  std::vector<Gelu<Scalar>> up_act_;
};

}  // namespace isgfan
