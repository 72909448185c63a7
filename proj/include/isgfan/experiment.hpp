#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isgfan/loss_balancer.hpp"
#include "isgfan/model.hpp"
#include "isgfan/pseudo_labels.hpp"
#include "isgfan/signal_ingest.hpp"
#include "isgfan/subdomain_attention.hpp"
#include "isgfan/synthetic.hpp"
#include "isgfan/trainer.hpp"

namespace isgfan {

enum class DatasetSource { archive, synthetic };

struct TaskPair {
  std::string source;
  std::string target;
  std::string name() const { return source + "-" + target; }
};

/// Everything one experiment needs. Defaults reproduce the reference
/// training configuration; INI sections mirror the field groups.
struct ExperimentConfig {
  // [task]
  DatasetSource dataset = DatasetSource::archive;
  std::filesystem::path data_dir = "data";
  std::vector<TaskPair> tasks{{"1", "2"}};
  // [synthetic]
  SyntheticConfig synthetic;
  // [noise]  type "none" disables noise
  std::optional<NoiseType> noise_type = NoiseType::mixed;
  std::vector<double> snr_db{-8.0};
  std::uint64_t noise_seed = 0;
  // [experiment]
  AblationVariant variant = AblationVariant::full;
  int repeats = 1;
  // [architecture]
  Eigen::Index length = 2048;
  ExtractorConfig extractor;
  double grl_lambda = 1.0;
  bool double_precision = false;
  WeightInit init;
  // [training]
  TrainingConfig training;
  std::map<std::string, double> lr_scale;  ///< per parameter group, default 1
  // [pseudo_label], [attention], [balancer]
  PseudoLabelConfig pseudo;
  AttentionConfig attention;
  BalancerConfig balancer;
  // [output]
  std::filesystem::path output_dir;  ///< empty: $ISGFAN_OUT, else "out"
  bool export_embeddings = true;
  bool write_checkpoints = true;

  void validate() const;
};

/// Parses INI text; unknown sections or keys are errors. Absent keys keep defaults.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one "section.key=value" override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Complete INI rendering of every field; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& cfg);

/// Output root: cfg.output_dir, else $ISGFAN_OUT, else "out".
std::filesystem::path resolve_output_root(const ExperimentConfig& cfg);

std::string snr_tag(const std::optional<NoiseType>& type, double snr_db);

/// out/<task>/<variant>/<snr>/<seed>/
std::filesystem::path run_directory(const std::filesystem::path& root, const TaskPair& task, AblationVariant variant,
                                    const std::string& snr, std::uint64_t seed);

struct EvalPoint {
  int epoch = 0;
  double accuracy = 0.0;
};

struct ExperimentReport {
  std::string task;
  std::string variant;
  std::string snr;
  std::uint64_t seed = 0;
  int epochs = 0;
  std::vector<EvalPoint> history;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  int best_epoch = 0;
  Eigen::MatrixXi confusion;
  std::string config_echo;
  double wall_seconds = 0.0;
};

/// Source/target data of one task at one noise level.
TransferData load_task_data(const ExperimentConfig& cfg, const TaskPair& task, double snr_db);

/// Trains one seeded run and writes its artifacts into run_dir: config.ini,
/// metrics.jsonl, attention.csv, confusion.csv, embeddings.csv, checkpoints,
/// and report.txt.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const TransferData& data, const TaskPair& task,
                                double snr_db, std::uint64_t seed, const std::filesystem::path& run_dir);

struct Evaluation {
  std::vector<int> predictions;
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;
};

/// Target-test evaluation of a stored checkpoint for the configured variant.
Evaluation evaluate_checkpoint(const ExperimentConfig& cfg, const TransferData& data,
                               const std::filesystem::path& checkpoint);

/// All repeats (seeds training.seed, training.seed + 1, ...) of every task and
/// SNR in the config for its variant.
std::vector<ExperimentReport> run_all(const ExperimentConfig& cfg, const std::filesystem::path& root);

// Reports -------------------------------------------------------------------

void write_report(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport read_report(const std::filesystem::path& path);

/// Key (task, variant, snr) -> mean final accuracy over seeds.
struct SummaryKey {
  std::string task;
  std::string variant;
  std::string snr;
  auto operator<=>(const SummaryKey&) const = default;
};

struct SummaryCell {
  double mean_accuracy = 0.0;
  std::vector<double> accuracies;
};

using Summary = std::map<SummaryKey, SummaryCell>;

Summary summarize(const std::vector<ExperimentReport>& reports);

/// Rebuilds the summary from every report.txt below root.
Summary summarize_directory(const std::filesystem::path& root);

/// Tab-separated table, one line per key.
void write_summary(const Summary& summary, const std::filesystem::path& path);

/// Rows = SNR, columns = task, cells = mean accuracy, for one variant.
std::string sweep_table(const Summary& summary, const std::string& variant);

}  // namespace isgfan
