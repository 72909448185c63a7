#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace isgfan {

struct SignalRecord {
  Eigen::VectorXd waveform;
  int class_label = 0;
  std::string condition_id;
  double sample_rate = 12000.0;
};

enum class DatasetRole { source_train, target_train_unlabeled, target_test };

std::string to_string(DatasetRole role);

/// Equal-length segments of one operating condition. Rows of `samples` are
/// segments. `labels` is empty exactly when role is target_train_unlabeled.
struct SegmentedDataset {
  Eigen::MatrixXd samples;
  std::vector<int> labels;
  int num_classes = 0;
  std::string condition_id;
  DatasetRole role = DatasetRole::source_train;

  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
  bool labeled() const { return role != DatasetRole::target_train_unlabeled; }

  /// Throws on any broken invariant (length divisible by 32, label presence and range).
  void validate(Eigen::Index length_multiple = 32) const;
  std::vector<int> class_counts() const;
};

enum class NoiseType { gaussian, laplacian, mixed };

std::string to_string(NoiseType type);
NoiseType parse_noise_type(const std::string& name);

struct NoiseSpec {
  NoiseType type = NoiseType::mixed;
  double snr_db = -8.0;
  std::uint64_t seed = 0;

  /// Filesystem-friendly tag, e.g. "mixed_m8dB".
  std::string tag() const;
};

struct TransferTask {
  std::string source_condition;
  std::string target_condition;
  /// Noise to inject while assembling the task; empty when the datasets were
  /// prepared with noise already applied.
  std::optional<NoiseSpec> noise;

  std::string name() const { return source_condition + "-" + target_condition; }
};

struct TransferData {
  SegmentedDataset source_train;
  SegmentedDataset target_train_unlabeled;
  SegmentedDataset target_test;
};

/// Contiguous windows of `length` points every `stride` points; no padding.
std::vector<Eigen::VectorXd> segment_signal(const SignalRecord& record, Eigen::Index length, Eigen::Index stride);

/// Mean-square power (1/L) sum x_t^2.
double signal_power(const Eigen::Ref<const Eigen::VectorXd>& sample);

/// Target noise power for a signal of power p_signal at the requested SNR.
double target_noise_power(double p_signal, double snr_db);

/// The additive noise sequence that inject_noise would add to `sample`.
/// The realization is rescaled to carry exactly the target power.
Eigen::VectorXd generate_noise(const Eigen::Ref<const Eigen::VectorXd>& sample, const NoiseSpec& spec);

/// sample + noise with P_noise = P_signal / 10^(snr_db / 10); deterministic in spec.seed.
Eigen::VectorXd inject_noise(const Eigen::Ref<const Eigen::VectorXd>& sample, const NoiseSpec& spec);

/// Applies noise to every row; each row gets an independent realization whose
/// seed is derived from (spec.seed, condition id, row index).
Eigen::MatrixXd inject_noise_rows(const Eigen::MatrixXd& samples, const NoiseSpec& spec, const std::string& condition_id);

TransferData build_transfer_task(const std::map<std::string, SegmentedDataset>& datasets, const TransferTask& task);

// Archive container ---------------------------------------------------------
//
// Little-endian layout:
//   char[4]  magic "ISGD"
//   uint32   version (1)
//   uint32   L (samples per segment)
//   uint32   C (number of classes)
//   uint32   N (segment count)
//   float32  N * L values, segment-major
//   uint16   N labels

inline constexpr std::uint32_t kArchiveVersion = 1;

void write_archive(const std::filesystem::path& path, const SegmentedDataset& data);
SegmentedDataset read_archive(const std::filesystem::path& path, const std::string& condition_id = {},
                              DatasetRole role = DatasetRole::source_train);

struct ManifestEntry {
  std::string condition_id;
  std::filesystem::path path;
  int num_classes = 0;
  int samples_per_class = 0;
};

/// Lines "condition_id, path, num_classes, samples_per_class"; '#' starts a
/// comment. Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Raw recordings of one condition: each archive row is a whole waveform.
/// Segments every record, keeps at most samples_per_class segments per class
/// (in record order), and optionally injects noise.
SegmentedDataset prepare_condition(const SegmentedDataset& raw_records, const ManifestEntry& entry,
                                   Eigen::Index length, Eigen::Index stride, const std::optional<NoiseSpec>& noise);

/// CRC-32 of a file's bytes.
std::uint32_t file_checksum(const std::filesystem::path& path);

}  // namespace isgfan
