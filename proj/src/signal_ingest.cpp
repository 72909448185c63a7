#include "isgfan/signal_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/algorithm/string/trim.hpp>
#include <boost/crc.hpp>

#include "isgfan/binary_io.hpp"

namespace isgfan {

using binary::get_u32;
using binary::put_u32;

namespace {

std::uint32_t crc32_of(const void* data, std::size_t size) {
  boost::crc_32_type crc;
  crc.process_bytes(data, size);
  return crc.checksum();
}

std::uint64_t row_seed(std::uint64_t base, const std::string& condition_id, Eigen::Index row) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    crc32_of(condition_id.data(), condition_id.size()), static_cast<std::uint32_t>(row),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(row) >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::source_train: return "source_train";
    case DatasetRole::target_train_unlabeled: return "target_train_unlabeled";
    case DatasetRole::target_test: return "target_test";
  }
  return "unknown";
}

void SegmentedDataset::validate(Eigen::Index length_multiple) const {
  if (samples.rows() > 0 && (samples.cols() == 0 || samples.cols() % length_multiple != 0)) {
    throw std::invalid_argument("segment length must be a positive multiple of " + std::to_string(length_multiple));
  }
  if (labeled() != !labels.empty() && samples.rows() > 0) {
    throw std::invalid_argument("labels must be present iff the dataset role is labeled");
  }
  if (labeled() && static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw std::invalid_argument("label count does not match sample count");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument("label out of range");
  }
}

std::vector<int> SegmentedDataset::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::string to_string(NoiseType type) {
  switch (type) {
    case NoiseType::gaussian: return "gaussian";
    case NoiseType::laplacian: return "laplacian";
    case NoiseType::mixed: return "mixed";
  }
  return "unknown";
}

NoiseType parse_noise_type(const std::string& name) {
  if (name == "gaussian") return NoiseType::gaussian;
  if (name == "laplacian") return NoiseType::laplacian;
  if (name == "mixed") return NoiseType::mixed;
  throw std::invalid_argument("unknown noise type: " + name);
}

std::string NoiseSpec::tag() const {
  std::ostringstream os;
  os << to_string(type) << '_' << (snr_db < 0 ? "m" : "p") << std::abs(snr_db) << "dB";
  return os.str();
}

std::vector<Eigen::VectorXd> segment_signal(const SignalRecord& record, Eigen::Index length, Eigen::Index stride) {
  if (length < 1 || stride < 1) throw std::invalid_argument("segment_signal: length and stride must be >= 1");
  std::vector<Eigen::VectorXd> out;
  const Eigen::Index n = record.waveform.size();
  if (n < length) return out;
  const Eigen::Index count = (n - length) / stride + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) out.emplace_back(record.waveform.segment(i * stride, length));
  return out;
}

double signal_power(const Eigen::Ref<const Eigen::VectorXd>& sample) {
  if (sample.size() == 0) throw std::invalid_argument("empty signal");
  return sample.squaredNorm() / static_cast<double>(sample.size());
}

double target_noise_power(double p_signal, double snr_db) { return p_signal / std::pow(10.0, snr_db / 10.0); }

Eigen::VectorXd generate_noise(const Eigen::Ref<const Eigen::VectorXd>& sample, const NoiseSpec& spec) {
  const double p_signal = signal_power(sample);
  if (!(p_signal > 0.0)) throw std::invalid_argument("undefined SNR for silent signal");
  const double p_noise = target_noise_power(p_signal, spec.snr_db);
  std::mt19937_64 rng(spec.seed);
  const Eigen::Index n = sample.size();

  auto gaussian = [&](double power) {
    std::normal_distribution<double> dist(0.0, std::sqrt(power));
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
  };
  // Laplace(0, b) as the difference of two Exp(1/b) draws; variance 2 b^2.
  auto laplacian = [&](double power) {
    const double b = std::sqrt(power / 2.0);
    std::exponential_distribution<double> dist(1.0 / b);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = dist(rng);
      v(i) = a - dist(rng);
    }
    return v;
  };

  Eigen::VectorXd noise;
  switch (spec.type) {
    case NoiseType::gaussian: noise = gaussian(p_noise); break;
    case NoiseType::laplacian: noise = laplacian(p_noise); break;
    case NoiseType::mixed: {
      Eigen::VectorXd g = gaussian(p_noise / 2.0);
      noise = g + laplacian(p_noise / 2.0);
      break;
    }
  }
  const double realized = signal_power(noise);
  if (realized > 0.0) noise *= std::sqrt(p_noise / realized);
  return noise;
}

Eigen::VectorXd inject_noise(const Eigen::Ref<const Eigen::VectorXd>& sample, const NoiseSpec& spec) {
  return sample + generate_noise(sample, spec);
}

Eigen::MatrixXd inject_noise_rows(const Eigen::MatrixXd& samples, const NoiseSpec& spec,
                                  const std::string& condition_id) {
  Eigen::MatrixXd out(samples.rows(), samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    NoiseSpec row_spec = spec;
    row_spec.seed = row_seed(spec.seed, condition_id, i);
    out.row(i) = inject_noise(samples.row(i).transpose(), row_spec).transpose();
  }
  return out;
}

TransferData build_transfer_task(const std::map<std::string, SegmentedDataset>& datasets, const TransferTask& task) {
  if (task.source_condition == task.target_condition) {
    throw std::invalid_argument("source and target conditions must differ");
  }
  auto find = [&](const std::string& id) -> const SegmentedDataset& {
    auto it = datasets.find(id);
    if (it == datasets.end()) throw std::invalid_argument("unknown condition: " + id);
    return it->second;
  };
  const SegmentedDataset& src = find(task.source_condition);
  const SegmentedDataset& tgt = find(task.target_condition);
  if (src.labels.empty() || tgt.labels.empty()) throw std::invalid_argument("transfer task needs labeled datasets");
  const std::set<int> src_classes(src.labels.begin(), src.labels.end());
  const std::set<int> tgt_classes(tgt.labels.begin(), tgt.labels.end());
  if (src.length() != tgt.length() || src.num_classes != tgt.num_classes || src_classes != tgt_classes) {
    throw std::invalid_argument("incompatible domains");
  }

  TransferData out;
  out.source_train = src;
  out.source_train.role = DatasetRole::source_train;
  out.source_train.condition_id = task.source_condition;
  out.target_test = tgt;
  out.target_test.role = DatasetRole::target_test;
  out.target_test.condition_id = task.target_condition;
  if (task.noise) {
    out.source_train.samples = inject_noise_rows(src.samples, *task.noise, task.source_condition);
    out.target_test.samples = inject_noise_rows(tgt.samples, *task.noise, task.target_condition);
  }
  out.target_train_unlabeled = out.target_test;
  out.target_train_unlabeled.labels.clear();
  out.target_train_unlabeled.role = DatasetRole::target_train_unlabeled;
  return out;
}

void write_archive(const std::filesystem::path& path, const SegmentedDataset& data) {
  if (data.labels.size() != static_cast<std::size_t>(data.size())) {
    throw std::invalid_argument("archive requires one label per segment");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write archive: " + path.string());
  os.write("ISGD", 4);
  put_u32(os, kArchiveVersion);
  put_u32(os, static_cast<std::uint32_t>(data.length()));
  put_u32(os, static_cast<std::uint32_t>(data.num_classes));
  put_u32(os, static_cast<std::uint32_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index t = 0; t < data.length(); ++t) {
      const float v = static_cast<float>(data.samples(i, t));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(os, bits);
    }
  }
  for (int y : data.labels) {
    const unsigned char b[2] = {static_cast<unsigned char>(y), static_cast<unsigned char>(y >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!os) throw std::runtime_error("failed writing archive: " + path.string());
}

SegmentedDataset read_archive(const std::filesystem::path& path, const std::string& condition_id, DatasetRole role) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open archive: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ISGD") throw std::runtime_error("not an ISGD archive: " + path.string());
  const std::uint32_t version = get_u32(is);
  if (version != kArchiveVersion) throw std::runtime_error("unsupported archive version " + std::to_string(version));
  const std::uint32_t length = get_u32(is);
  const std::uint32_t classes = get_u32(is);
  const std::uint32_t count = get_u32(is);
  SegmentedDataset data;
  data.condition_id = condition_id;
  data.role = role;
  data.num_classes = static_cast<int>(classes);
  data.samples.resize(count, length);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t t = 0; t < length; ++t) {
      const std::uint32_t bits = get_u32(is);
      float v;
      std::memcpy(&v, &bits, 4);
      data.samples(i, t) = v;
    }
  }
  data.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) throw std::runtime_error("archive truncated: " + path.string());
    data.labels[i] = int(b[0]) | (int(b[1]) << 8);
    if (data.labels[i] >= data.num_classes) throw std::runtime_error("archive label out of range: " + path.string());
  }
  if (role == DatasetRole::target_train_unlabeled) data.labels.clear();
  return data;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      boost::algorithm::trim(field);
      fields.push_back(field);
    }
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 4) fail("expected 'condition_id, path, num_classes, samples_per_class'");
    ManifestEntry e;
    e.condition_id = fields[0];
    if (e.condition_id.empty()) fail("empty condition id");
    e.path = fields[1];
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    try {
      std::size_t used = 0;
      e.num_classes = std::stoi(fields[2], &used);
      if (used != fields[2].size()) fail("bad num_classes");
      e.samples_per_class = std::stoi(fields[3], &used);
      if (used != fields[3].size()) fail("bad samples_per_class");
    } catch (const std::logic_error&) {
      fail("non-numeric class or sample count");
    }
    if (e.num_classes < 1 || e.samples_per_class < 1) fail("counts must be positive");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path.string());
  os << "# condition_id, path, num_classes, samples_per_class\n";
  for (const auto& e : entries) {
    os << e.condition_id << ", " << e.path.string() << ", " << e.num_classes << ", " << e.samples_per_class << '\n';
  }
}

SegmentedDataset prepare_condition(const SegmentedDataset& raw_records, const ManifestEntry& entry, Eigen::Index length,
                                   Eigen::Index stride, const std::optional<NoiseSpec>& noise) {
  if (raw_records.num_classes != entry.num_classes) {
    throw std::invalid_argument("manifest class count disagrees with archive for condition " + entry.condition_id);
  }
  std::vector<std::vector<Eigen::VectorXd>> per_class(static_cast<std::size_t>(entry.num_classes));
  for (Eigen::Index r = 0; r < raw_records.size(); ++r) {
    SignalRecord rec;
    rec.waveform = raw_records.samples.row(r).transpose();
    rec.class_label = raw_records.labels.at(static_cast<std::size_t>(r));
    rec.condition_id = entry.condition_id;
    auto& bucket = per_class.at(static_cast<std::size_t>(rec.class_label));
    for (auto& seg : segment_signal(rec, length, stride)) {
      if (static_cast<int>(bucket.size()) >= entry.samples_per_class) break;
      bucket.push_back(std::move(seg));
    }
  }
  SegmentedDataset out;
  out.condition_id = entry.condition_id;
  out.num_classes = entry.num_classes;
  std::size_t total = 0;
  for (const auto& b : per_class) total += b.size();
  out.samples.resize(static_cast<Eigen::Index>(total), length);
  Eigen::Index row = 0;
  for (int c = 0; c < entry.num_classes; ++c) {
    for (const auto& seg : per_class[static_cast<std::size_t>(c)]) {
      out.samples.row(row++) = seg.transpose();
      out.labels.push_back(c);
    }
  }
  if (noise) out.samples = inject_noise_rows(out.samples, *noise, entry.condition_id);
  return out;
}

std::uint32_t file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return crc32_of(bytes.data(), bytes.size());
}

}  // namespace isgfan
