#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "isgfan/experiment.hpp"

using namespace isgfan;

namespace {

struct CommonOptions {
  std::string config;
  std::string variant;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::string out;
  std::vector<double> snr;
  std::vector<std::string> overrides;
};

std::vector<std::string> variant_names() {
  std::vector<std::string> names;
  for (auto v : {AblationVariant::full, AblationVariant::isfa, AblationVariant::is, AblationVariant::fa,
                 AblationVariant::fald, AblationVariant::source_only}) {
    names.push_back(to_string(v));
  }
  return names;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_snr = true) {
  cmd->add_option("-c,--config", o.config, "experiment config (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--variant", o.variant, "ablation variant")->check(CLI::IsMember(variant_names()));
  cmd->add_option("--epochs", o.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", o.seed, "first training seed");
  cmd->add_option("--repeats", o.repeats, "seed-varied repeats")->check(CLI::PositiveNumber);
  cmd->add_option("-o,--out", o.out, "output root (default $ISGFAN_OUT or ./out)");
  if (with_snr) cmd->add_option("--snr", o.snr, "SNR levels in dB")->delimiter(',');
  cmd->add_option("--set", o.overrides, "config override section.key=value");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  for (const auto& kv : o.overrides) apply_override(cfg, kv);
  if (!o.variant.empty()) cfg.variant = parse_variant(o.variant);
  if (o.epochs) cfg.training.epochs = *o.epochs;
  if (o.seed) cfg.training.seed = *o.seed;
  if (o.repeats) cfg.repeats = *o.repeats;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.snr.empty()) cfg.snr_db = o.snr;
  cfg.validate();
  return cfg;
}

void print_summary(const std::vector<ExperimentReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.task << ' ' << r.variant << ' ' << r.snr << " seed " << r.seed << ": final " << std::fixed
              << std::setprecision(4) << r.final_accuracy << " best " << r.best_accuracy << " @" << r.best_epoch << '\n';
  }
  for (const auto& [key, cell] : summarize(reports)) {
    std::cout << key.task << ' ' << key.variant << ' ' << key.snr << " mean over " << cell.accuracies.size()
              << ": " << std::fixed << std::setprecision(4) << cell.mean_accuracy << '\n';
  }
}

int cmd_prepare(const std::string& manifest_path, Eigen::Index length, Eigen::Index stride, const std::string& noise,
                const std::vector<double>& snrs, std::uint64_t noise_seed, const std::filesystem::path& out) {
  const auto entries = read_manifest(manifest_path);
  std::optional<NoiseType> type;
  if (noise != "none") type = parse_noise_type(noise);
  const std::vector<double> levels = type ? snrs : std::vector<double>{0.0};
  if (type && levels.empty()) throw std::invalid_argument("--snr is required unless --noise none");
  std::filesystem::create_directories(out);
  std::ofstream sums(out / "checksums.txt");
  for (double snr : levels) {
    const std::string tag = snr_tag(type, snr);
    std::optional<NoiseSpec> spec;
    if (type) spec = NoiseSpec{*type, snr, noise_seed};
    std::vector<ManifestEntry> prepared;
    for (const auto& entry : entries) {
      if (!std::filesystem::exists(entry.path)) throw std::runtime_error("missing file: " + entry.path.string());
      const SegmentedDataset raw = read_archive(entry.path, entry.condition_id);
      const SegmentedDataset ds = prepare_condition(raw, entry, length, stride, spec);
      const auto rel = std::filesystem::path(entry.condition_id) / (tag + ".isgd");
      std::filesystem::create_directories(out / entry.condition_id);
      write_archive(out / rel, ds);
      prepared.push_back({entry.condition_id, rel, entry.num_classes, entry.samples_per_class});
      char hex[9];
      std::snprintf(hex, sizeof(hex), "%08x", file_checksum(out / rel));
      sums << hex << "  " << rel.generic_string() << '\n';
      std::cout << "wrote " << (out / rel).string() << " (" << ds.size() << " segments)\n";
    }
    write_manifest(out / (tag + ".manifest"), prepared);
  }
  return 0;
}

int cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  SyntheticConfig syn = cfg.synthetic;
  syn.length = cfg.length;
  const std::vector<double> levels = cfg.noise_type ? cfg.snr_db : std::vector<double>{0.0};
  for (double snr : levels) {
    const std::string tag = snr_tag(cfg.noise_type, snr);
    std::optional<NoiseSpec> spec;
    if (cfg.noise_type) spec = NoiseSpec{*cfg.noise_type, snr, cfg.noise_seed};
    std::vector<ManifestEntry> prepared;
    for (const auto& [id, ds] : synthetic_conditions(syn, spec)) {
      const auto rel = std::filesystem::path(id) / (tag + ".isgd");
      std::filesystem::create_directories(out / id);
      write_archive(out / rel, ds);
      prepared.push_back({id, rel, ds.num_classes, syn.samples_per_class});
      std::cout << "wrote " << (out / rel).string() << '\n';
    }
    write_manifest(out / (tag + ".manifest"), prepared);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy cross-domain vibration fault diagnosis: data preparation, training and evaluation"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "segment raw archives and inject noise");
  std::string manifest, noise = "mixed", prep_out = "data";
  Eigen::Index length = 2048, stride = 0;
  std::vector<double> prep_snr;
  std::uint64_t noise_seed = 0;
  prepare->add_option("--manifest", manifest, "raw-record manifest")->required();
  prepare->add_option("--length", length, "segment length")->check(CLI::PositiveNumber);
  prepare->add_option("--stride", stride, "segment stride (default: length)");
  prepare->add_option("--noise", noise, "noise type")->check(CLI::IsMember({"gaussian", "laplacian", "mixed", "none"}));
  prepare->add_option("--snr", prep_snr, "SNR levels in dB")->delimiter(',');
  prepare->add_option("--noise-seed", noise_seed, "noise seed");
  prepare->add_option("-o,--out", prep_out, "output directory");

  // synth
  auto* synth = app.add_subcommand("synth", "write the synthetic two-domain benchmark as prepared archives");
  CommonOptions synth_opts;
  std::string synth_out = "data";
  synth->add_option("-c,--config", synth_opts.config, "experiment config (INI)")->check(CLI::ExistingFile);
  synth->add_option("--snr", synth_opts.snr, "SNR levels in dB")->delimiter(',');
  synth->add_option("--set", synth_opts.overrides, "config override section.key=value");
  synth->add_option("-o,--out", synth_out, "output directory");

  CommonOptions train_opts, eval_opts, ablate_opts, sweep_opts;
  auto* train = app.add_subcommand("train", "train one variant over all configured tasks, SNRs and repeats");
  add_common(train, train_opts);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the target test set");
  add_common(evaluate, eval_opts);
  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  auto* ablate = app.add_subcommand("ablate", "train every ablation variant");
  add_common(ablate, ablate_opts);
  bool with_baseline = false;
  ablate->add_flag("--with-baseline", with_baseline, "also train the source-only baseline");

  auto* sweep = app.add_subcommand("sweep", "noise sweep: mean accuracy per SNR and task");
  add_common(sweep, sweep_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*prepare) {
      return cmd_prepare(manifest, length, stride > 0 ? stride : length, noise, prep_snr, noise_seed, prep_out);
    }
    if (*synth) {
      ExperimentConfig cfg = resolve(synth_opts);
      cfg.dataset = DatasetSource::synthetic;
      return cmd_synth(cfg, synth_out);
    }
    if (*train) {
      const ExperimentConfig cfg = resolve(train_opts);
      print_summary(run_all(cfg, resolve_output_root(cfg)));
      return 0;
    }
    if (*evaluate) {
      const ExperimentConfig cfg = resolve(eval_opts);
      const double snr = cfg.snr_db.empty() ? 0.0 : cfg.snr_db.front();
      const TransferData data = load_task_data(cfg, cfg.tasks.front(), snr);
      const Evaluation ev = evaluate_checkpoint(cfg, data, checkpoint);
      std::cout << "accuracy: " << ev.accuracy << "\nconfusion:\n" << ev.confusion << '\n';
      return 0;
    }
    if (*ablate) {
      ExperimentConfig cfg = resolve(ablate_opts);
      std::vector<AblationVariant> variants = ablation_variants();
      if (with_baseline) variants.insert(variants.begin(), AblationVariant::source_only);
      std::vector<ExperimentReport> reports;
      for (auto v : variants) {
        cfg.variant = v;
        const auto part = run_all(cfg, resolve_output_root(cfg));
        reports.insert(reports.end(), part.begin(), part.end());
      }
      print_summary(reports);
      return 0;
    }
    if (*sweep) {
      const ExperimentConfig cfg = resolve(sweep_opts);
      const auto root = resolve_output_root(cfg);
      run_all(cfg, root);
      const std::string table = sweep_table(summarize_directory(root), to_string(cfg.variant));
      std::ofstream(root / ("sweep_" + to_string(cfg.variant) + ".tsv")) << table;
      std::cout << table;
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
