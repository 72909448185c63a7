#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "isgfan/network/layers.hpp"

namespace isgfan {

struct HeadConfig {
  Index in_dim = 320;
  std::vector<Index> hidden_dims{160, 80};
  Index out_dim = 1;
  std::string activation = "gelu";

  /// in -> in/2 -> in/4 -> out, the layout shared by LC, LD and GDC.
  static HeadConfig compressing(Index in_dim, Index out_dim) {
    HeadConfig cfg;
    cfg.in_dim = in_dim;
    cfg.hidden_dims = {std::max<Index>(1, in_dim / 2), std::max<Index>(1, in_dim / 4)};
    cfg.out_dim = out_dim;
    return cfg;
  }
};

/// MLP returning raw logits (batch, out_dim).
template <typename Scalar>
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(const HeadConfig& cfg, const std::string& name) : config_(cfg) {
    if (cfg.out_dim < 1) throw std::invalid_argument("head: out_dim must be >= 1");
    if (cfg.activation != "gelu") throw std::invalid_argument("head: unsupported activation " + cfg.activation);
    Index in = cfg.in_dim;
    for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
      layers_.emplace_back(in, cfg.hidden_dims[i], name + ".fc" + std::to_string(i + 1));
      in = cfg.hidden_dims[i];
    }
    layers_.emplace_back(in, cfg.out_dim, name + ".out");
    activations_.resize(cfg.hidden_dims.size());
  }

  const HeadConfig& config() const { return config_; }

  void init(Rng& rng, const WeightInit& wi = {}) {
    for (auto& l : layers_) l.init(rng, wi);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& features) {
    if (features.cols() != config_.in_dim) throw std::invalid_argument("head: feature dimension mismatch");
    Matrix<Scalar> h = features;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (i < activations_.size()) h = activations_[i].forward(h);
    }
    return h;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dlogits) {
    Matrix<Scalar> g = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i < activations_.size()) g = activations_[i].backward(g);
      g = layers_[i].backward(g);
    }
    return g;
  }

  void collect(ParameterList<Scalar>& out) {
    for (auto& l : layers_) l.collect(out);
  }

  std::vector<Dense<Scalar>>& layers() { return layers_; }

 private:
  HeadConfig config_;
  std::vector<Dense<Scalar>> layers_;
  std::vector<Gelu<Scalar>> activations_;
};

/// One single-affine-layer domain classifier per class.
template <typename Scalar>
class SubdomainClassifiers {
 public:
  SubdomainClassifiers() = default;
  SubdomainClassifiers(Index in_dim, Index num_classes, const std::string& name) {
    for (Index c = 0; c < num_classes; ++c) heads_.emplace_back(in_dim, 1, name + "[" + std::to_string(c) + "]");
  }

  Index num_classes() const { return static_cast<Index>(heads_.size()); }

  void init(Rng& rng, const WeightInit& wi = {}) {
    for (auto& h : heads_) h.init(rng, wi);
  }

  /// Logits (batch, 1) of the classifier for class c.
  Matrix<Scalar> forward(Index c, const Matrix<Scalar>& features) { return heads_.at(c).forward(features); }
  Matrix<Scalar> backward(Index c, const Matrix<Scalar>& dlogits) { return heads_.at(c).backward(dlogits); }

  void collect(ParameterList<Scalar>& out) {
    for (auto& h : heads_) h.collect(out);
  }

  Dense<Scalar>& head(Index c) { return heads_.at(c); }

 private:
  std::vector<Dense<Scalar>> heads_;
};

}  // namespace isgfan
