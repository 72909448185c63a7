#pragma once

// Loss functions. Each has a value form matching its textbook definition and,
// where the trainer needs it, a companion that also returns input gradients.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "isgfan/tensor.hpp"

namespace isgfan {

inline constexpr double kLogEpsilon = 1e-12;

/// Channels x samples feature matrix used by the orthogonality terms.
template <typename Scalar>
struct FeatureMatrix {
  Matrix<Scalar> values;
  bool normalized = false;
};

struct LossBundle {
  double l_lc = 0.0;
  double l_gd = 0.0;
  double l_fd = 0.0;
  double l_orth = 0.0;
  double l_recon = 0.0;
  double l_ld = 0.0;

  bool valid() const {
    for (double v : {l_lc, l_gd, l_fd, l_orth, l_recon, l_ld}) {
      if (!std::isfinite(v) || v < 0.0) return false;
    }
    return true;
  }
};

/// -(1/N) sum_ij y_ij log(p_ij + eps).
template <typename Scalar>
double cross_entropy(const Matrix<Scalar>& probs, const Matrix<Scalar>& onehot) {
  if (probs.rows() == 0) throw std::invalid_argument("cross_entropy: empty batch");
  if (probs.rows() != onehot.rows() || probs.cols() != onehot.cols()) {
    throw std::invalid_argument("cross_entropy: shape mismatch");
  }
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    for (Index j = 0; j < probs.cols(); ++j) {
      if (onehot(i, j) != Scalar(0)) total -= double(onehot(i, j)) * std::log(double(probs(i, j)) + kLogEpsilon);
    }
  }
  return total / static_cast<double>(probs.rows());
}

template <typename Scalar>
struct LossWithGrad {
  double value = 0.0;
  Matrix<Scalar> grad;
};

/// Row-wise numerically stable softmax.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

/// Mean cross-entropy of softmax(logits) against integer labels, with the
/// gradient with respect to the logits.
template <typename Scalar>
LossWithGrad<Scalar> softmax_cross_entropy(const Matrix<Scalar>& logits, const std::vector<int>& labels) {
  const Index n = logits.rows();
  if (n == 0) throw std::invalid_argument("cross_entropy: empty batch");
  if (static_cast<Index>(labels.size()) != n) throw std::invalid_argument("cross_entropy: label count mismatch");
  LossWithGrad<Scalar> out;
  out.grad = softmax_rows(logits);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw std::invalid_argument("cross_entropy: label out of range");
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - Scalar(m)).exp().sum());
    total += lse - double(logits(i, y));
    out.grad(i, y) -= Scalar(1);
  }
  out.value = total / static_cast<double>(n);
  out.grad /= static_cast<Scalar>(n);
  return out;
}

/// Unit-normalizes each row of a channels x samples matrix.
template <typename Scalar>
FeatureMatrix<Scalar> normalize_rows(const Matrix<Scalar>& x) {
  FeatureMatrix<Scalar> out{x, true};
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar n = std::max<Scalar>(x.row(r).norm(), Scalar(kLogEpsilon));
    out.values.row(r) /= n;
  }
  return out;
}

/// Backward of normalize_rows: maps d(normalized) to d(raw).
template <typename Scalar>
Matrix<Scalar> normalize_rows_backward(const Matrix<Scalar>& raw, const Matrix<Scalar>& normalized,
                                       const Matrix<Scalar>& upstream) {
  Matrix<Scalar> dx(raw.rows(), raw.cols());
  for (Index r = 0; r < raw.rows(); ++r) {
    const Scalar n = std::max<Scalar>(raw.row(r).norm(), Scalar(kLogEpsilon));
    const Scalar proj = normalized.row(r).dot(upstream.row(r));
    dx.row(r) = (upstream.row(r) - proj * normalized.row(r)) / n;
  }
  return dx;
}

struct OrthogonalityTerms {
  double l_co = 0.0;
  double l_so = 0.0;
  double l_orth = 0.0;
};

template <typename Scalar>
void require_unit_rows(const FeatureMatrix<Scalar>& f) {
  for (Index r = 0; r < f.values.rows(); ++r) {
    if (std::abs(double(f.values.row(r).norm()) - 1.0) > 1e-6) throw std::invalid_argument("rows must be unit norm");
  }
}

/// l_co = ||A B^T||_F, l_so = (||A A^T - I||_F + ||B B^T - I||_F) / 2.
template <typename Scalar>
OrthogonalityTerms orthogonality_loss(const FeatureMatrix<Scalar>& fr, const FeatureMatrix<Scalar>& fi) {
  require_unit_rows(fr);
  require_unit_rows(fi);
  if (fr.values.cols() != fi.values.cols()) throw std::invalid_argument("orthogonality_loss: column count mismatch");
  const auto& a = fr.values;
  const auto& b = fi.values;
  OrthogonalityTerms t;
  t.l_co = double((a * b.transpose()).norm());
  const Matrix<Scalar> ga = a * a.transpose() - Matrix<Scalar>::Identity(a.rows(), a.rows());
  const Matrix<Scalar> gb = b * b.transpose() - Matrix<Scalar>::Identity(b.rows(), b.rows());
  t.l_so = 0.5 * (double(ga.norm()) + double(gb.norm()));
  t.l_orth = t.l_co + t.l_so;
  return t;
}

template <typename Scalar>
struct OrthogonalityGrad {
  OrthogonalityTerms terms;
  Matrix<Scalar> d_fr;
  Matrix<Scalar> d_fi;
};

/// l_orth and its gradient with respect to the (already normalized) inputs.
/// The Frobenius norm is not differentiable at zero; the subgradient 0 is used.
template <typename Scalar>
OrthogonalityGrad<Scalar> orthogonality_loss_with_grad(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("orthogonality_loss: column count mismatch");
  OrthogonalityGrad<Scalar> out;
  const Matrix<Scalar> cross = a * b.transpose();
  const Matrix<Scalar> ga = a * a.transpose() - Matrix<Scalar>::Identity(a.rows(), a.rows());
  const Matrix<Scalar> gb = b * b.transpose() - Matrix<Scalar>::Identity(b.rows(), b.rows());
  const Scalar nc = cross.norm();
  const Scalar na = ga.norm();
  const Scalar nb = gb.norm();
  out.terms.l_co = double(nc);
  out.terms.l_so = 0.5 * (double(na) + double(nb));
  out.terms.l_orth = out.terms.l_co + out.terms.l_so;
  out.d_fr = Matrix<Scalar>::Zero(a.rows(), a.cols());
  out.d_fi = Matrix<Scalar>::Zero(b.rows(), b.cols());
  if (nc > Scalar(0)) {
    out.d_fr += (cross / nc) * b;
    out.d_fi += (cross / nc).transpose() * a;
  }
  if (na > Scalar(0)) out.d_fr += (ga / na) * a;
  if (nb > Scalar(0)) out.d_fi += (gb / nb) * b;
  return out;
}

/// sum_i (1/L) ||x_i - x_hat_i||^2 over (N, L) rows.
template <typename Scalar>
double reconstruction_loss(const Matrix<Scalar>& x, const Matrix<Scalar>& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols() || x.cols() == 0) {
    throw std::invalid_argument("reconstruction_loss: shape mismatch");
  }
  return double((x - x_hat).squaredNorm()) / static_cast<double>(x.cols());
}

/// Value and gradient with respect to x_hat.
template <typename Scalar>
LossWithGrad<Scalar> reconstruction_loss_with_grad(const Matrix<Scalar>& x, const Matrix<Scalar>& x_hat) {
  LossWithGrad<Scalar> out;
  out.value = reconstruction_loss(x, x_hat);
  out.grad = (x_hat - x) * static_cast<Scalar>(2.0 / static_cast<double>(x.cols()));
  return out;
}

/// Binary domain cross-entropy; source carries label 0, target label 1.
/// Probabilities are clamped into [eps, 1 - eps] before taking logs.
template <typename Scalar>
double domain_bce(const Vector<Scalar>& d_source, const Vector<Scalar>& d_target) {
  const Index n = d_source.size() + d_target.size();
  if (n == 0) throw std::invalid_argument("domain_bce: both domains empty");
  auto clamp = [](double p) { return std::clamp(p, kLogEpsilon, 1.0 - kLogEpsilon); };
  double total = 0.0;
  for (Index i = 0; i < d_source.size(); ++i) total += std::log(1.0 - clamp(double(d_source(i))));
  for (Index i = 0; i < d_target.size(); ++i) total += std::log(clamp(double(d_target(i))));
  return -total / static_cast<double>(n);
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z)) : std::exp(z) / (Scalar(1) + std::exp(z));
}

template <typename Scalar>
struct DomainLossGrad {
  double value = 0.0;
  Vector<Scalar> d_source;
  Vector<Scalar> d_target;
};

/// domain_bce evaluated on logits (d = sigmoid(z)) in the overflow-free
/// softplus form, with gradients with respect to the logits.
template <typename Scalar>
DomainLossGrad<Scalar> domain_bce_with_logits(const Vector<Scalar>& z_source, const Vector<Scalar>& z_target) {
  const Index n = z_source.size() + z_target.size();
  if (n == 0) throw std::invalid_argument("domain_bce: both domains empty");
  auto softplus = [](double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); };
  DomainLossGrad<Scalar> out;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(n);
  out.d_source.resize(z_source.size());
  out.d_target.resize(z_target.size());
  double total = 0.0;
  for (Index i = 0; i < z_source.size(); ++i) {
    total += softplus(double(z_source(i)));
    out.d_source(i) = sigmoid(z_source(i)) * inv;
  }
  for (Index i = 0; i < z_target.size(); ++i) {
    total += softplus(-double(z_target(i)));
    out.d_target(i) = (sigmoid(z_target(i)) - Scalar(1)) * inv;
  }
  out.value = total / static_cast<double>(n);
  return out;
}

/// sum_c w_c * L_c.
double focal_domain_loss(const std::vector<double>& per_class, const std::vector<double>& weights);

}  // namespace isgfan
