#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isgfan/binary_io.hpp"
#include "isgfan/network/decoder.hpp"
#include "isgfan/network/extractor.hpp"
#include "isgfan/network/gradient_reversal.hpp"
#include "isgfan/network/heads.hpp"

namespace isgfan {

/// Ablation ladder. source_only (extractor + label classifier, no adaptation)
/// is the no-transfer reference.
enum class AblationVariant { full, isfa, is, fa, fald, source_only };

std::string to_string(AblationVariant v);
AblationVariant parse_variant(const std::string& name);
std::vector<AblationVariant> ablation_variants();

/// Which optional components a variant builds.
struct VariantModules {
  bool fife = false;     ///< fault-irrelevant extractor
  bool ld = false;       ///< label discriminator on FIFE features
  bool decoder = false;  ///< reconstruction branch
  bool orth = false;     ///< orthogonality penalty
  bool gdc = false;      ///< global domain classifier
  bool sdc = false;      ///< subdomain classifiers + attention
};

VariantModules modules_for(AblationVariant v);

/// Names of the loss terms a variant optimizes, in total-loss order.
std::vector<std::string> active_loss_terms(AblationVariant v);

inline const std::vector<std::string>& parameter_group_names() {
  static const std::vector<std::string> names{"FRFE", "FIFE", "LC", "LD", "GDC", "SDC", "decoder"};
  return names;
}

struct ModelConfig {
  ExtractorConfig extractor;
  int num_classes = 10;
  AblationVariant variant = AblationVariant::full;
  double grl_lambda = 1.0;
  WeightInit init;
};

/// Every component of the network for one ablation variant. Components the
/// variant does not use are never constructed.
/// Number of stride-2 upsamplings that undo a total downsampling factor.
inline Index upsample_layers(Index total_stride) {
  Index n = 0;
  for (Index s = total_stride; s > 1; s /= 2) {
    if (s % 2 != 0) throw std::invalid_argument("decoder needs a power-of-two total stride");
    ++n;
  }
  return n;
}

template <typename Scalar>
class IsgfanModel {
 public:
  IsgfanModel() = default;

  IsgfanModel(const ModelConfig& cfg, Rng& rng) : config_(cfg), modules_(modules_for(cfg.variant)), grl_(cfg.grl_lambda) {
    cfg.extractor.validate();
    if (cfg.num_classes < 2) throw std::invalid_argument("model needs at least two classes");
    const Index feat = cfg.extractor.feature_dim();
    frfe_.emplace(cfg.extractor, "FRFE");
    frfe_->init(rng, cfg.init);
    lc_.emplace(HeadConfig::compressing(feat, cfg.num_classes), "LC");
    lc_->init(rng, cfg.init);
    if (modules_.gdc) {
      gdc_.emplace(HeadConfig::compressing(feat, 1), "GDC");
      gdc_->init(rng, cfg.init);
    }
    if (modules_.sdc) {
      sdc_.emplace(feat, cfg.num_classes, "SDC");
      sdc_->init(rng, cfg.init);
    }
    if (modules_.fife) {
      fife_.emplace(cfg.extractor, "FIFE");
      fife_->init(rng, cfg.init);
    }
    if (modules_.ld) {
      ld_.emplace(HeadConfig::compressing(feat, cfg.num_classes), "LD");
      ld_->init(rng, cfg.init);
    }
    if (modules_.decoder) {
      decoder_.emplace(feat, cfg.extractor.dw_kernel, "decoder", upsample_layers(cfg.extractor.total_stride()));
      decoder_->init(rng, cfg.init);
    }
  }

  const ModelConfig& config() const { return config_; }
  const VariantModules& modules() const { return modules_; }
  GrlCoefficient grl() const { return grl_; }

  FeatureExtractor<Scalar>& frfe() { return *frfe_; }
  FeatureExtractor<Scalar>& fife() { return fife_.value(); }
  MlpHead<Scalar>& lc() { return *lc_; }
  MlpHead<Scalar>& ld() { return ld_.value(); }
  MlpHead<Scalar>& gdc() { return gdc_.value(); }
  SubdomainClassifiers<Scalar>& sdc() { return sdc_.value(); }
  Decoder<Scalar>& decoder() { return decoder_.value(); }

  /// Parameters of every built component, keyed by group name.
  std::map<std::string, ParameterList<Scalar>> parameter_groups() {
    std::map<std::string, ParameterList<Scalar>> groups;
    frfe_->collect(groups["FRFE"]);
    lc_->collect(groups["LC"]);
    if (fife_) fife_->collect(groups["FIFE"]);
    if (ld_) ld_->collect(groups["LD"]);
    if (gdc_) gdc_->collect(groups["GDC"]);
    if (sdc_) sdc_->collect(groups["SDC"]);
    if (decoder_) decoder_->collect(groups["decoder"]);
    return groups;
  }

  /// All parameters in a fixed order (group-name order, then construction order).
  ParameterList<Scalar> parameters() {
    ParameterList<Scalar> all;
    auto groups = parameter_groups();
    for (const auto& name : parameter_group_names()) {
      auto it = groups.find(name);
      if (it != groups.end()) all.insert(all.end(), it->second.begin(), it->second.end());
    }
    return all;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Pooled FRFE features (rows = samples) for (N, L) inputs.
  Matrix<Scalar> features(const Matrix<Scalar>& x) {
    GlobalAveragePool<Scalar> pool;
    return pool.forward(frfe_->forward(as_sequences(x)));
  }

  /// Label-classifier logits (N, C) through the test-time branch FRFE -> LC.
  Matrix<Scalar> predict_logits(const Matrix<Scalar>& x) { return lc_->forward(features(x)); }

 private:
  ModelConfig config_;
  VariantModules modules_;
  GrlCoefficient grl_;
  std::optional<FeatureExtractor<Scalar>> frfe_;
  std::optional<FeatureExtractor<Scalar>> fife_;
  std::optional<MlpHead<Scalar>> lc_;
  std::optional<MlpHead<Scalar>> ld_;
  std::optional<MlpHead<Scalar>> gdc_;
  std::optional<SubdomainClassifiers<Scalar>> sdc_;
  std::optional<Decoder<Scalar>> decoder_;
};

template <typename Scalar>
IsgfanModel<Scalar> build_variant(AblationVariant variant, ModelConfig base, Rng& rng) {
  base.variant = variant;
  return IsgfanModel<Scalar>(base, rng);
}

// Checkpoint ----------------------------------------------------------------
//
// Little-endian layout: "ISGC", u32 version, u32 group count, then per group
// its name and u32 parameter count, and per parameter its name, u32 rows,
// u32 cols and rows * cols float64 values in column-major order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
void write_checkpoint(const std::filesystem::path& path, IsgfanModel<Scalar>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  os.write("ISGC", 4);
  binary::put_u32(os, kCheckpointVersion);
  auto groups = model.parameter_groups();
  binary::put_u32(os, static_cast<std::uint32_t>(groups.size()));
  for (const auto& name : parameter_group_names()) {
    auto it = groups.find(name);
    if (it == groups.end()) continue;
    binary::put_string(os, name);
    binary::put_u32(os, static_cast<std::uint32_t>(it->second.size()));
    for (const auto* p : it->second) {
      binary::put_string(os, p->name);
      binary::put_u32(os, static_cast<std::uint32_t>(p->value.rows()));
      binary::put_u32(os, static_cast<std::uint32_t>(p->value.cols()));
      for (Index i = 0; i < p->value.size(); ++i) binary::put_f64(os, double(p->value.data()[i]));
    }
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

/// Loads values into an already-built model; names and shapes must match.
template <typename Scalar>
void read_checkpoint(const std::filesystem::path& path, IsgfanModel<Scalar>& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ISGC") throw std::runtime_error("not a checkpoint: " + path.string());
  if (binary::get_u32(is) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  auto groups = model.parameter_groups();
  const std::uint32_t group_count = binary::get_u32(is);
  if (group_count != groups.size()) throw std::runtime_error("checkpoint group count does not match the model variant");
  for (std::uint32_t g = 0; g < group_count; ++g) {
    const std::string name = binary::get_string(is);
    auto it = groups.find(name);
    if (it == groups.end()) throw std::runtime_error("checkpoint has unknown group " + name);
    const std::uint32_t count = binary::get_u32(is);
    if (count != it->second.size()) throw std::runtime_error("parameter count mismatch in group " + name);
    for (auto* p : it->second) {
      const std::string pname = binary::get_string(is);
      const Index rows = binary::get_u32(is);
      const Index cols = binary::get_u32(is);
      if (pname != p->name || rows != p->value.rows() || cols != p->value.cols()) {
        throw std::runtime_error("checkpoint parameter mismatch at " + pname);
      }
      for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<Scalar>(binary::get_f64(is));
    }
  }
}

}  // namespace isgfan
