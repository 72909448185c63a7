#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "isgfan/loss_balancer.hpp"
#include "isgfan/model.hpp"
#include "isgfan/objectives.hpp"
#include "isgfan/pseudo_labels.hpp"
#include "isgfan/subdomain_attention.hpp"

namespace isgfan {

struct TrainingConfig {
  int epochs = 3500;
  int batch_size = 32;
  double base_lr = 1e-4;
  double min_lr = 1e-6;
  double weight_decay = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int eval_interval = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cosine annealing from base_lr at epoch 0 to min_lr at epoch == epochs.
double lr_at(int epoch, const TrainingConfig& cfg);

/// Decoupled-weight-decay Adam over a fixed, ordered parameter list.
template <typename Scalar>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParameterList<Scalar>& params, const TrainingConfig& cfg)
      : beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_eps), weight_decay_(cfg.weight_decay) {
    for (const auto* p : params) {
      first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      second_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  long steps() const { return step_; }

  /// Per-parameter learning-rate multipliers (default 1), aligned with the
  /// parameter list given at construction.
  void set_lr_scales(std::vector<double> scales) {
    if (scales.size() != first_.size()) throw std::invalid_argument("adamw: one scale per parameter required");
    scales_ = std::move(scales);
  }

  void step(const ParameterList<Scalar>& params, double lr) {
    if (params.size() != first_.size()) throw std::logic_error("adamw: parameter list changed");
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, double(step_));
    const double c2 = 1.0 - std::pow(beta2_, double(step_));
    const Scalar b1 = Scalar(beta1_), b2 = Scalar(beta2_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      const double rate = scales_.empty() ? lr : lr * scales_[i];
      p.value *= Scalar(1.0 - rate * weight_decay_);
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * p.grad;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= Scalar(rate / c1) * first_[i].array() /
                         ((second_[i].array() / Scalar(c2)).sqrt() + Scalar(eps_));
    }
  }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, weight_decay_ = 0.0;
  long step_ = 0;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
  std::vector<double> scales_;
};

template <typename Scalar>
struct BatchPair {
  Matrix<Scalar> source;           ///< (n_s, L)
  std::vector<int> source_labels;  ///< n_s labels
  Matrix<Scalar> target;           ///< (n_t, L), unlabeled
};

struct StepMetrics {
  LossBundle losses;
  double l_co = 0.0;
  double l_so = 0.0;
  LossWeights weights;
  double total = 0.0;
  std::vector<double> attention;  ///< empty when the focal term was skipped
  std::vector<int> subdomain_counts;
  std::size_t accepted_pseudo_labels = 0;
  double lr = 0.0;
};

/// Everything besides the model that a training step reads or mutates.
struct StepContext {
  PseudoLabelConfig pseudo;
  BalancerConfig balancer;
  AttentionState* attention = nullptr;  ///< required when the variant has SDCs
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> gather_rows(const Matrix<Scalar>& m, const std::vector<Index>& rows) {
  Matrix<Scalar> out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace detail

/// Runs the forward graph on one source/target batch pair, evaluates every
/// loss of the model's variant, and back-propagates the balanced total into
/// the parameter gradients (previous gradients are cleared first).
///
/// Gradient paths: LC and the orthogonality/reconstruction terms reach the
/// extractors directly; GDC and SDC gradients reach FRFE through a reversal
/// layer, as do LD gradients into FIFE. FIFE, LD, decoder and orthogonality
/// see source samples only.
///
/// `seeds`, when given, replaces the balanced weights as the backward
/// multipliers of each loss term (used to isolate individual losses).
template <typename Scalar>
StepMetrics compute_step_gradients(IsgfanModel<Scalar>& model, const BatchPair<Scalar>& batch, const StepContext& ctx,
                                   const std::optional<LossWeights>& seeds = std::nullopt) {
  const Index ns = batch.source.rows();
  if (ns == 0) throw std::invalid_argument("empty source batch");
  if (static_cast<Index>(batch.source_labels.size()) != ns) throw std::invalid_argument("source label count mismatch");
  const VariantModules& mods = model.modules();
  const bool adversarial = mods.gdc || mods.sdc;
  const Index nt = adversarial ? batch.target.rows() : 0;
  if (adversarial && nt == 0) throw std::invalid_argument("empty target batch");
  if (nt > 0 && batch.target.cols() != batch.source.cols()) throw std::invalid_argument("source/target length mismatch");
  const Index n = ns + nt;
  const int classes = model.config().num_classes;
  const GrlCoefficient grl = model.grl();

  model.zero_grad();
  StepMetrics metrics;

  // Shared extractor on both domains.
  Matrix<Scalar> x_all(n, batch.source.cols());
  x_all.topRows(ns) = batch.source;
  if (nt > 0) x_all.bottomRows(nt) = batch.target;
  GlobalAveragePool<Scalar> fr_pool;
  SequenceBatch<Scalar> fr_map = model.frfe().forward(as_sequences(x_all));
  Matrix<Scalar> fr_feat = fr_pool.forward(fr_map);

  // Label classifier; target rows only feed the pseudo-labeler.
  Matrix<Scalar> lc_logits = model.lc().forward(fr_feat);
  auto lc = softmax_cross_entropy<Scalar>(lc_logits.topRows(ns), batch.source_labels);
  metrics.losses.l_lc = lc.value;

  DomainLossGrad<Scalar> gd;
  if (mods.gdc) {
    Matrix<Scalar> gd_logits = model.gdc().forward(fr_feat);
    gd = domain_bce_with_logits<Scalar>(gd_logits.col(0).head(ns), gd_logits.col(0).tail(nt));
    metrics.losses.l_gd = gd.value;
  }

  // Subdomain classifiers on true-labeled source rows and accepted pseudo-labeled target rows.
  struct Subdomain {
    std::vector<Index> rows;  // indices into fr_feat
    Index n_source = 0;
    DomainLossGrad<Scalar> loss;
  };
  std::vector<Subdomain> subdomains;
  std::vector<double> focal_weights;
  if (mods.sdc) {
    if (ctx.attention == nullptr) throw std::invalid_argument("variant with subdomain classifiers needs attention state");
    const PseudoLabelResult pseudo = assign_pseudo_labels(Matrix<Scalar>(lc_logits.bottomRows(nt)), ctx.pseudo);
    metrics.accepted_pseudo_labels = pseudo.accepted_count();
    subdomains.resize(static_cast<std::size_t>(classes));
    for (Index i = 0; i < ns; ++i) {
      subdomains[static_cast<std::size_t>(batch.source_labels[static_cast<std::size_t>(i)])].rows.push_back(i);
    }
    for (auto& s : subdomains) s.n_source = static_cast<Index>(s.rows.size());
    for (Index j = 0; j < nt; ++j) {
      const auto& pl = pseudo.samples[static_cast<std::size_t>(j)];
      if (pl.accepted) subdomains[static_cast<std::size_t>(pl.label)].rows.push_back(ns + j);
    }
    std::vector<double> per_class_loss(static_cast<std::size_t>(classes), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    if (metrics.accepted_pseudo_labels > 0) {
      for (int c = 0; c < classes; ++c) {
        auto& s = subdomains[static_cast<std::size_t>(c)];
        const Index n_target = static_cast<Index>(s.rows.size()) - s.n_source;
        if (n_target == 0) continue;  // nothing to align for this class in this batch
        Matrix<Scalar> logits = model.sdc().forward(c, detail::gather_rows(fr_feat, s.rows));
        s.loss = domain_bce_with_logits<Scalar>(logits.col(0).head(s.n_source), logits.col(0).tail(n_target));
        per_class_loss[static_cast<std::size_t>(c)] = s.loss.value;
        counts[static_cast<std::size_t>(c)] = static_cast<int>(s.rows.size());
      }
      focal_weights = ctx.attention->compute_weights_and_update(per_class_loss, counts);
      metrics.losses.l_fd = focal_domain_loss(per_class_loss, focal_weights);
      metrics.attention = focal_weights;
    }
    metrics.subdomain_counts = counts;
  }

  // Information-separation branch (source only).
  GlobalAveragePool<Scalar> fi_pool;
  SequenceBatch<Scalar> fi_map;
  Matrix<Scalar> fi_feat;
  LossWithGrad<Scalar> ld;
  FeatureMatrix<Scalar> fr_norm, fi_norm;
  Matrix<Scalar> fr_src_t, fi_t;
  OrthogonalityGrad<Scalar> orth;
  LossWithGrad<Scalar> recon;
  if (mods.fife) {
    fi_map = model.fife().forward(as_sequences(batch.source));
    fi_feat = fi_pool.forward(fi_map);
  }
  if (mods.ld) {
    ld = softmax_cross_entropy<Scalar>(model.ld().forward(fi_feat), batch.source_labels);
    metrics.losses.l_ld = ld.value;
  }
  if (mods.orth) {
    fr_src_t = fr_feat.topRows(ns).transpose();
    fi_t = fi_feat.transpose();
    fr_norm = normalize_rows<Scalar>(fr_src_t);
    fi_norm = normalize_rows<Scalar>(fi_t);
    orth = orthogonality_loss_with_grad<Scalar>(fr_norm.values, fi_norm.values);
    metrics.losses.l_orth = orth.terms.l_orth;
    metrics.l_co = orth.terms.l_co;
    metrics.l_so = orth.terms.l_so;
  }
  if (mods.decoder) {
    const SequenceBatch<Scalar> x_hat = model.decoder().forward(concat_channels(fr_map.slice(0, ns), fi_map));
    recon = reconstruction_loss_with_grad<Scalar>(batch.source, as_rows(x_hat));
    metrics.losses.l_recon = recon.value;
  }

  const BalancedLoss balanced = assemble_total_loss(metrics.losses, ctx.balancer);
  metrics.weights = balanced.weights;
  metrics.total = balanced.total;
  const LossWeights w = seeds.value_or(balanced.weights);

  // Backward.
  Matrix<Scalar> d_fr_feat = Matrix<Scalar>::Zero(n, fr_feat.cols());
  {
    Matrix<Scalar> d_logits = Matrix<Scalar>::Zero(n, lc_logits.cols());
    d_logits.topRows(ns) = lc.grad * Scalar(w.lc);
    d_fr_feat += model.lc().backward(d_logits);
  }
  if (mods.gdc) {
    Matrix<Scalar> d_logits(n, 1);
    d_logits.col(0).head(ns) = gd.d_source * Scalar(w.gd);
    d_logits.col(0).tail(nt) = gd.d_target * Scalar(w.gd);
    d_fr_feat += grl_backward(model.gdc().backward(d_logits), grl);
  }
  if (mods.sdc && !focal_weights.empty()) {
    for (int c = 0; c < classes; ++c) {
      const auto& s = subdomains[static_cast<std::size_t>(c)];
      const Index n_target = static_cast<Index>(s.rows.size()) - s.n_source;
      if (n_target == 0) continue;
      const Scalar scale = Scalar(w.fd * focal_weights[static_cast<std::size_t>(c)]);
      Matrix<Scalar> d_logits(static_cast<Index>(s.rows.size()), 1);
      d_logits.col(0).head(s.n_source) = s.loss.d_source * scale;
      d_logits.col(0).tail(n_target) = s.loss.d_target * scale;
      const Matrix<Scalar> d_in = grl_backward(model.sdc().backward(c, d_logits), grl);
      for (std::size_t i = 0; i < s.rows.size(); ++i) d_fr_feat.row(s.rows[i]) += d_in.row(static_cast<Index>(i));
    }
  }
  Matrix<Scalar> d_fi_feat;
  if (mods.fife) d_fi_feat = Matrix<Scalar>::Zero(fi_feat.rows(), fi_feat.cols());
  if (mods.orth) {
    const Matrix<Scalar> d_a = normalize_rows_backward<Scalar>(fr_src_t, fr_norm.values, orth.d_fr * Scalar(w.orth));
    const Matrix<Scalar> d_b = normalize_rows_backward<Scalar>(fi_t, fi_norm.values, orth.d_fi * Scalar(w.orth));
    d_fr_feat.topRows(ns) += d_a.transpose();
    d_fi_feat += d_b.transpose();
  }
  if (mods.ld) d_fi_feat += grl_backward(model.ld().backward(ld.grad * Scalar(w.ld)), grl);

  SequenceBatch<Scalar> d_fr_map = fr_pool.backward(d_fr_feat);
  SequenceBatch<Scalar> d_fi_map;
  if (mods.fife) d_fi_map = fi_pool.backward(d_fi_feat);
  if (mods.decoder) {
    const SequenceBatch<Scalar> d_concat =
        model.decoder().backward(as_sequences<Scalar>(recon.grad * Scalar(w.recon)));
    const Index f = fr_map.channels();
    d_fr_map.values.leftCols(ns * fr_map.length) += d_concat.values.topRows(f);
    d_fi_map.values += d_concat.values.bottomRows(f);
  }
  model.frfe().backward(d_fr_map);
  if (mods.fife) model.fife().backward(d_fi_map);
  return metrics;
}

/// One optimizer step: gradients from compute_step_gradients, then AdamW.
template <typename Scalar>
StepMetrics training_step(IsgfanModel<Scalar>& model, AdamW<Scalar>& optimizer, const BatchPair<Scalar>& batch,
                          const StepContext& ctx, double lr) {
  StepMetrics metrics = compute_step_gradients(model, batch, ctx);
  if (!std::isfinite(metrics.total)) throw std::runtime_error("non-finite training loss");
  metrics.lr = lr;
  optimizer.step(model.parameters(), lr);
  return metrics;
}

/// Deterministic batch schedule: source order reshuffled every epoch; target
/// batches of the same size drawn from an independently shuffled stream.
class BatchSampler {
 public:
  BatchSampler(Index n_source, Index n_target, int batch_size, std::uint64_t seed);

  struct Batch {
    std::vector<Index> source;
    std::vector<Index> target;
  };

  std::vector<Batch> epoch();

 private:
  Index n_source_, n_target_;
  int batch_size_;
  Rng rng_;
  std::vector<Index> target_order_;
  std::size_t target_pos_ = 0;
};

template <typename Scalar>
BatchPair<Scalar> make_batch(const Matrix<Scalar>& source, const std::vector<int>& labels, const Matrix<Scalar>& target,
                             const BatchSampler::Batch& b) {
  BatchPair<Scalar> pair;
  pair.source = detail::gather_rows(source, b.source);
  for (Index i : b.source) pair.source_labels.push_back(labels[static_cast<std::size_t>(i)]);
  pair.target = detail::gather_rows(target, b.target);
  return pair;
}

}  // namespace isgfan
