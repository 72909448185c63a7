#pragma once

// Differentiable building blocks. Every layer caches what its backward pass
// needs during forward(); backward() accumulates into parameter gradients and
// returns the gradient with respect to the layer input. A layer instance
// therefore serves one forward/backward pair at a time.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/SpecialFunctions>

#include "isgfan/network/parameter.hpp"
#include "isgfan/tensor.hpp"

namespace isgfan {

/// Channel-mixing affine map applied at every column of a channels x N matrix.
template <typename Scalar>
class PointwiseLinear {
 public:
  PointwiseLinear() = default;
  PointwiseLinear(Index in, Index out, const std::string& name)
      : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {}

  void init(Rng& rng, const WeightInit& wi = {}) {
    init_truncated_normal(weight_.value, rng, wi.std_for(weight_.value.cols()));
    bias_.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    if (x.rows() != weight_.value.cols()) throw std::invalid_argument("pointwise linear: channel mismatch");
    input_ = x;
    Matrix<Scalar> y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    weight_.grad.noalias() += dy * input_.transpose();
    bias_.grad.col(0) += dy.rowwise().sum();
    return weight_.value.transpose() * dy;
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> input_;
};

/// Fully connected layer over a (batch, features) matrix: y = x W^T + b.
template <typename Scalar>
class Dense {
 public:
  Dense() = default;
  Dense(Index in, Index out, const std::string& name)
      : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {}

  void init(Rng& rng, const WeightInit& wi = {}) {
    init_truncated_normal(weight_.value, rng, wi.std_for(in_dim()));
    bias_.value.setZero();
  }

  Index in_dim() const { return weight_.value.cols(); }
  Index out_dim() const { return weight_.value.rows(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    if (x.cols() != in_dim()) throw std::invalid_argument("dense: input dimension mismatch");
    input_ = x;
    Matrix<Scalar> y = x * weight_.value.transpose();
    y.rowwise() += bias_.value.col(0).transpose();
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    weight_.grad.noalias() += dy.transpose() * input_;
    bias_.grad.col(0) += dy.colwise().sum().transpose();
    return dy * weight_.value;
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> input_;
};

/// Strided convolution whose kernel equals its stride (non-overlapping patches).
/// With the channels x (batch * length) layout, k consecutive columns are
/// contiguous, so the whole layer reduces to one GEMM on a reinterpreted view.
template <typename Scalar>
class PatchConv {
 public:
  PatchConv() = default;
  PatchConv(Index in, Index out, Index kernel, const std::string& name)
      : in_(in), kernel_(kernel), weight_(name + ".weight", out, in * kernel), bias_(name + ".bias", out, 1) {}

  void init(Rng& rng, const WeightInit& wi = {}) {
    init_truncated_normal(weight_.value, rng, wi.std_for(weight_.value.cols()));
    bias_.value.setZero();
  }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& x) {
    if (x.channels() != in_) throw std::invalid_argument("patch conv: channel mismatch");
    if (x.length % kernel_ != 0) throw std::invalid_argument("patch conv: length not divisible by stride");
    input_ = x;
    const Index cols = x.values.cols() / kernel_;
    Eigen::Map<const Matrix<Scalar>> patches(x.values.data(), in_ * kernel_, cols);
    SequenceBatch<Scalar> y(weight_.value * patches, x.batch, x.length / kernel_);
    y.values.colwise() += bias_.value.col(0);
    return y;
  }

  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    const Index cols = dy.values.cols();
    Eigen::Map<const Matrix<Scalar>> patches(input_.values.data(), in_ * kernel_, cols);
    weight_.grad.noalias() += dy.values * patches.transpose();
    bias_.grad.col(0) += dy.values.rowwise().sum();
    SequenceBatch<Scalar> dx(in_, input_.batch, input_.length);
    Eigen::Map<Matrix<Scalar>> dpatches(dx.values.data(), in_ * kernel_, cols);
    dpatches.noalias() = weight_.value.transpose() * dy.values;
    return dx;
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Index in_ = 0;
  Index kernel_ = 1;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  SequenceBatch<Scalar> input_;
};

/// Per-channel 1-D convolution, odd kernel, zero "same" padding.
template <typename Scalar>
class DepthwiseConv {
 public:
  DepthwiseConv() = default;
  DepthwiseConv(Index channels, Index kernel, const std::string& name)
      : weight_(name + ".weight", channels, kernel), bias_(name + ".bias", channels, 1) {
    if (kernel % 2 == 0) throw std::invalid_argument("depthwise conv: kernel must be odd");
  }

  void init(Rng& rng, const WeightInit& wi = {}) {
    init_truncated_normal(weight_.value, rng, wi.std_for(weight_.value.cols()));
    bias_.value.setZero();
  }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& x) {
    if (x.channels() != weight_.value.rows()) throw std::invalid_argument("depthwise conv: channel mismatch");
    input_ = x;
    SequenceBatch<Scalar> y(x.channels(), x.batch, x.length);
    y.values.colwise() = bias_.value.col(0);
    const Index half = weight_.value.cols() / 2;
    for (Index b = 0; b < x.batch; ++b) {
      auto xs = x.sample(b);
      auto ys = y.sample(b);
      for (Index j = 0; j < weight_.value.cols(); ++j) {
        const Index offset = j - half;
        const Index t0 = std::max<Index>(0, -offset);
        const Index t1 = std::min<Index>(x.length, x.length - offset);
        if (t1 <= t0) continue;
        ys.middleCols(t0, t1 - t0).array() +=
            xs.middleCols(t0 + offset, t1 - t0).array().colwise() * weight_.value.col(j).array();
      }
    }
    return y;
  }

  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    SequenceBatch<Scalar> dx(input_.channels(), input_.batch, input_.length);
    bias_.grad.col(0) += dy.values.rowwise().sum();
    const Index half = weight_.value.cols() / 2;
    const Index len = input_.length;
    for (Index b = 0; b < input_.batch; ++b) {
      auto xs = input_.sample(b);
      auto gs = dy.sample(b);
      auto dxs = dx.sample(b);
      for (Index j = 0; j < weight_.value.cols(); ++j) {
        const Index offset = j - half;
        const Index t0 = std::max<Index>(0, -offset);
        const Index t1 = std::min<Index>(len, len - offset);
        if (t1 <= t0) continue;
        const Index n = t1 - t0;
        weight_.grad.col(j) +=
            (gs.middleCols(t0, n).array() * xs.middleCols(t0 + offset, n).array()).rowwise().sum().matrix();
        dxs.middleCols(t0 + offset, n).array() += gs.middleCols(t0, n).array().colwise() * weight_.value.col(j).array();
      }
    }
    return dx;
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  SequenceBatch<Scalar> input_;
};

/// Layer normalization across channels, independently for every column.
template <typename Scalar>
class ChannelLayerNorm {
 public:
  ChannelLayerNorm() = default;
  ChannelLayerNorm(Index channels, const std::string& name)
      : gain_(name + ".gain", channels, 1), shift_(name + ".shift", channels, 1) {
    gain_.value.setOnes();
  }

  void init(Rng&, const WeightInit& = {}) {
    gain_.value.setOnes();
    shift_.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    if (x.rows() != gain_.value.rows()) throw std::invalid_argument("layer norm: channel mismatch");
    const Scalar n = static_cast<Scalar>(x.rows());
    RowVector<Scalar> mean = x.colwise().sum() / n;
    normalized_ = x.rowwise() - mean;
    RowVector<Scalar> var = normalized_.array().square().colwise().sum() / n;
    inv_std_ = (var.array() + Scalar(kEps)).rsqrt();
    normalized_.array().rowwise() *= inv_std_.array();
    Matrix<Scalar> y = normalized_.array().colwise() * gain_.value.col(0).array();
    y.colwise() += shift_.value.col(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    gain_.grad.col(0) += (dy.array() * normalized_.array()).rowwise().sum().matrix();
    shift_.grad.col(0) += dy.rowwise().sum();
    const Scalar n = static_cast<Scalar>(dy.rows());
    Matrix<Scalar> dxhat = dy.array().colwise() * gain_.value.col(0).array();
    RowVector<Scalar> sum_d = dxhat.colwise().sum();
    RowVector<Scalar> sum_dx = (dxhat.array() * normalized_.array()).colwise().sum();
    Matrix<Scalar> dx = (n * dxhat.array()).matrix();
    dx.rowwise() -= sum_d;
    dx.array() -= normalized_.array().rowwise() * sum_dx.array();
    dx.array().rowwise() *= inv_std_.array() / n;
    return dx;
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&gain_);
    out.push_back(&shift_);
  }

 private:
  static constexpr double kEps = 1e-6;
  Parameter<Scalar> gain_;
  Parameter<Scalar> shift_;
  Matrix<Scalar> normalized_;
  RowVector<Scalar> inv_std_;
};

/// Exact (erf) GELU.
template <typename Scalar>
class Gelu {
 public:
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    input_ = x;
    cdf_ = (Scalar(0.5) * ((x.array() * Scalar(std::numbers::sqrt2 / 2)).erf() + Scalar(1))).matrix();
    return x.cwiseProduct(cdf_);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const {
    const Scalar inv_sqrt2pi = Scalar(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    return (dy.array() *
            (cdf_.array() + input_.array() * inv_sqrt2pi * (Scalar(-0.5) * input_.array().square()).exp()))
        .matrix();
  }

 private:
  Matrix<Scalar> input_;
  Matrix<Scalar> cdf_;
};

/// Global response normalization: every channel is rescaled by its L2 energy
/// over the sequence relative to the mean energy across channels.
///   y = gamma * (x * N) + beta + x,  N_c = G_c / (mean(G) + eps),  G_c = ||x_c||_2
template <typename Scalar>
class GlobalResponseNorm {
 public:
  GlobalResponseNorm() = default;
  GlobalResponseNorm(Index channels, const std::string& name)
      : gamma_(name + ".gamma", channels, 1), beta_(name + ".beta", channels, 1) {}

  void init(Rng&, const WeightInit& = {}) {
    gamma_.value.setZero();
    beta_.value.setZero();
  }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& x) {
    if (x.channels() != gamma_.value.rows()) throw std::invalid_argument("grn: channel mismatch");
    input_ = x;
    energy_.resize(x.channels(), x.batch);
    scale_.resize(x.channels(), x.batch);
    SequenceBatch<Scalar> y(x.channels(), x.batch, x.length);
    for (Index b = 0; b < x.batch; ++b) {
      auto xs = x.sample(b);
      energy_.col(b) = xs.rowwise().norm();
      const Scalar mean = energy_.col(b).mean();
      scale_.col(b) = energy_.col(b) / (mean + Scalar(kEps));
      y.sample(b) = (xs.array().colwise() * (gamma_.value.col(0).array() * scale_.col(b).array() + Scalar(1))).matrix();
      y.sample(b).colwise() += beta_.value.col(0);
    }
    return y;
  }

  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    const Index channels = input_.channels();
    SequenceBatch<Scalar> dx(channels, input_.batch, input_.length);
    for (Index b = 0; b < input_.batch; ++b) {
      auto xs = input_.sample(b);
      auto gs = dy.sample(b);
      Vector<Scalar> gx = (gs.array() * xs.array()).rowwise().sum().matrix();
      gamma_.grad.col(0) += gx.cwiseProduct(scale_.col(b));
      beta_.grad.col(0) += gs.rowwise().sum();
      // d/dx through the multiplicative path with N held fixed.
      dx.sample(b) = (gs.array().colwise() * (gamma_.value.col(0).array() * scale_.col(b).array() + Scalar(1))).matrix();
      // d/dx through N(G(x)).
      const Scalar denom = energy_.col(b).mean() + Scalar(kEps);
      Vector<Scalar> dscale = gamma_.value.col(0).cwiseProduct(gx);
      const Scalar coupling = dscale.dot(energy_.col(b)) / (denom * denom * Scalar(channels));
      Vector<Scalar> denergy = (dscale.array() / denom - coupling).matrix();
      for (Index c = 0; c < channels; ++c) {
        const Scalar g = energy_(c, b);
        if (g > Scalar(0)) dx.sample(b).row(c) += (denergy(c) / g) * xs.row(c);
      }
    }
    return dx;
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Parameter<Scalar>& gamma() { return gamma_; }
  Parameter<Scalar>& beta() { return beta_; }

 private:
  static constexpr double kEps = 1e-6;
  Parameter<Scalar> gamma_;
  Parameter<Scalar> beta_;
  SequenceBatch<Scalar> input_;
  Matrix<Scalar> energy_;
  Matrix<Scalar> scale_;
};

/// Transposed 1-D convolution; output length (in - 1) * stride - 2 * padding + kernel.
template <typename Scalar>
class TransposedConv {
 public:
  TransposedConv() = default;
  TransposedConv(Index in, Index out, Index kernel, Index stride, Index padding, const std::string& name)
      : in_(in), out_(out), kernel_(kernel), stride_(stride), padding_(padding),
        weight_(name + ".weight", out * kernel, in), bias_(name + ".bias", out, 1) {}

  void init(Rng& rng, const WeightInit& wi = {}) {
    init_truncated_normal(weight_.value, rng, wi.std_for(weight_.value.rows()));
    bias_.value.setZero();
  }

  Index output_length(Index in_length) const { return (in_length - 1) * stride_ - 2 * padding_ + kernel_; }

  SequenceBatch<Scalar> forward(const SequenceBatch<Scalar>& x) {
    if (x.channels() != in_) throw std::invalid_argument("transposed conv: channel mismatch");
    input_ = x;
    const Index out_len = output_length(x.length);
    Matrix<Scalar> taps = weight_.value * x.values;  // (kernel * out) x (batch * in_len)
    SequenceBatch<Scalar> y(out_, x.batch, out_len);
    y.values.colwise() = bias_.value.col(0);
    for (Index b = 0; b < x.batch; ++b) {
      for (Index i = 0; i < x.length; ++i) {
        const Index col = b * x.length + i;
        for (Index j = 0; j < kernel_; ++j) {
          const Index o = i * stride_ + j - padding_;
          if (o < 0 || o >= out_len) continue;
          y.values.col(b * out_len + o) += taps.block(j * out_, col, out_, 1);
        }
      }
    }
    return y;
  }

  SequenceBatch<Scalar> backward(const SequenceBatch<Scalar>& dy) {
    const Index in_len = input_.length;
    const Index out_len = dy.length;
    Matrix<Scalar> dtaps = Matrix<Scalar>::Zero(kernel_ * out_, input_.values.cols());
    for (Index b = 0; b < input_.batch; ++b) {
      for (Index i = 0; i < in_len; ++i) {
        const Index col = b * in_len + i;
        for (Index j = 0; j < kernel_; ++j) {
          const Index o = i * stride_ + j - padding_;
          if (o < 0 || o >= out_len) continue;
          dtaps.block(j * out_, col, out_, 1) = dy.values.col(b * out_len + o);
        }
      }
    }
    bias_.grad.col(0) += dy.values.rowwise().sum();
    weight_.grad.noalias() += dtaps * input_.values.transpose();
    return SequenceBatch<Scalar>(weight_.value.transpose() * dtaps, input_.batch, in_len);
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Index in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, padding_ = 0;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  SequenceBatch<Scalar> input_;
};

/// Mean over the sequence axis: (C x batch*len) -> (batch, C).
template <typename Scalar>
class GlobalAveragePool {
 public:
  Matrix<Scalar> forward(const SequenceBatch<Scalar>& x) {
    channels_ = x.channels();
    batch_ = x.batch;
    length_ = x.length;
    Matrix<Scalar> pooled(x.batch, x.channels());
    for (Index b = 0; b < x.batch; ++b) pooled.row(b) = x.sample(b).rowwise().mean().transpose();
    return pooled;
  }

  SequenceBatch<Scalar> backward(const Matrix<Scalar>& dy) const {
    SequenceBatch<Scalar> dx(channels_, batch_, length_);
    const Scalar inv = Scalar(1) / static_cast<Scalar>(length_);
    for (Index b = 0; b < batch_; ++b) dx.sample(b).colwise() = dy.row(b).transpose() * inv;
    return dx;
  }

 private:
  Index channels_ = 0, batch_ = 0, length_ = 0;
};

}  // namespace isgfan
