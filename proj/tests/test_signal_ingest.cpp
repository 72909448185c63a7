#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "isgfan/signal_ingest.hpp"
#include "isgfan/synthetic.hpp"

using namespace isgfan;
using Eigen::VectorXd;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "isgfan_test_ingest";
  std::filesystem::create_directories(dir);
  return dir;
}

VectorXd tone(Eigen::Index n, double amplitude, double cycles) {
  return amplitude * (2.0 * std::numbers::pi * cycles * VectorXd::LinSpaced(n, 0.0, double(n - 1)).array() / double(n)).sin();
}

SegmentedDataset labeled(int classes, int per_class, Eigen::Index length, const std::string& id) {
  SegmentedDataset d;
  d.num_classes = classes;
  d.condition_id = id;
  d.samples = Eigen::MatrixXd::Random(classes * per_class, length);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) d.labels.push_back(c);
  }
  return d;
}

}  // namespace

TEST_CASE("segment counts") {
  SignalRecord r;
  r.waveform = VectorXd::Random(4096);
  CHECK(segment_signal(r, 2048, 2048).size() == 2);
  r.waveform = VectorXd::Random(2048);
  CHECK(segment_signal(r, 2048, 2048).size() == 1);
  r.waveform = VectorXd::Random(1000);
  CHECK(segment_signal(r, 2048, 2048).empty());
  r.waveform = VectorXd::Random(5000);
  CHECK(segment_signal(r, 2048, 1000).size() == 3);
  CHECK_THROWS(segment_signal(r, 0, 1));
  CHECK_THROWS(segment_signal(r, 4, 0));
}

TEST_CASE("non-overlapping segments reconstruct a prefix exactly") {
  SignalRecord r;
  r.waveform = VectorXd::Random(1000);
  const auto segs = segment_signal(r, 64, 64);
  REQUIRE(segs.size() == 15);
  for (std::size_t i = 0; i < segs.size(); ++i) CHECK(segs[i] == r.waveform.segment(Eigen::Index(i) * 64, 64));
}

TEST_CASE("signal power examples") {
  CHECK(signal_power(VectorXd::Zero(8)) == 0.0);
  VectorXd alt(4);
  alt << 1, -1, 1, -1;
  CHECK(signal_power(alt) == 1.0);
  CHECK(std::abs(signal_power(tone(2048, 2.0, 8.0)) - 2.0) < 1e-6);
  CHECK_THROWS_WITH(signal_power(VectorXd(0)), "empty signal");
}

TEST_CASE("target noise power") {
  CHECK(target_noise_power(1.0, 0.0) == 1.0);
  CHECK(target_noise_power(1.0, -8.0) == doctest::Approx(std::pow(10.0, 0.8)).epsilon(1e-12));
  CHECK(target_noise_power(1.0, -8.0) == doctest::Approx(6.3096).epsilon(1e-4));
}

TEST_CASE("noise is calibrated, deterministic and type-dependent") {
  const VectorXd x = tone(2048, 1.5, 11.0);
  for (NoiseType type : {NoiseType::gaussian, NoiseType::laplacian, NoiseType::mixed}) {
    for (double snr : {0.0, -4.0, -8.0}) {
      CAPTURE(to_string(type));
      CAPTURE(snr);
      double sum_db = 0.0, sum_power = 0.0;
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const NoiseSpec spec{type, snr, seed};
        const VectorXd n = generate_noise(x, spec);
        sum_db += 10.0 * std::log10(signal_power(x) / signal_power(n));
        sum_power += signal_power(n);
        CHECK(inject_noise(x, spec) == x + n);
      }
      CHECK(std::abs(sum_db / 100.0 - snr) < 0.1);
      const double target = target_noise_power(signal_power(x), snr);
      CHECK(std::abs(sum_power / 100.0 - target) / target < 0.02);
    }
  }
  const NoiseSpec a{NoiseType::mixed, -8.0, 42};
  CHECK(generate_noise(x, a) == generate_noise(x, a));
  NoiseSpec b = a;
  b.seed = 43;
  CHECK(generate_noise(x, a) != generate_noise(x, b));
  CHECK_THROWS_WITH(inject_noise(VectorXd::Zero(16), a), "undefined SNR for silent signal");
}

TEST_CASE("laplacian noise is heavier-tailed than gaussian") {
  const VectorXd x = tone(4096, 1.0, 5.0);
  auto kurtosis = [](const VectorXd& v) {
    const double m2 = v.array().square().mean();
    return v.array().pow(4).mean() / (m2 * m2);
  };
  const double kg = kurtosis(generate_noise(x, {NoiseType::gaussian, 0.0, 1}));
  const double kl = kurtosis(generate_noise(x, {NoiseType::laplacian, 0.0, 1}));
  const double km = kurtosis(generate_noise(x, {NoiseType::mixed, 0.0, 1}));
  CHECK(kg == doctest::Approx(3.0).epsilon(0.15));
  CHECK(kl == doctest::Approx(6.0).epsilon(0.25));
  CHECK(km > kg);
  CHECK(km < kl);
}

TEST_CASE("noise tags") {
  CHECK(NoiseSpec{NoiseType::mixed, -8.0, 0}.tag() == "mixed_m8dB");
  CHECK(NoiseSpec{NoiseType::gaussian, 0.0, 0}.tag() == "gaussian_p0dB");
  CHECK(parse_noise_type("laplacian") == NoiseType::laplacian);
  CHECK_THROWS(parse_noise_type("pink"));
}

TEST_CASE("transfer task assembly") {
  std::map<std::string, SegmentedDataset> ds{{"1", labeled(10, 21, 64, "1")}, {"2", labeled(10, 21, 64, "2")}};
  const TransferData t = build_transfer_task(ds, {"1", "2", NoiseSpec{NoiseType::mixed, -4.0, 3}});
  CHECK(t.source_train.size() == 210);
  CHECK(t.target_train_unlabeled.size() == 210);
  CHECK(t.target_test.size() == 210);
  CHECK(t.source_train.labeled());
  CHECK(t.target_train_unlabeled.labels.empty());
  CHECK(t.target_train_unlabeled.role == DatasetRole::target_train_unlabeled);
  CHECK(t.target_test.labels == ds["2"].labels);
  CHECK(t.target_train_unlabeled.samples == t.target_test.samples);
  CHECK(t.source_train.samples != ds["1"].samples);
  t.source_train.validate();
  t.target_train_unlabeled.validate();

  CHECK_THROWS(build_transfer_task(ds, {"1", "1", std::nullopt}));
  CHECK_THROWS(build_transfer_task(ds, {"1", "9", std::nullopt}));
  ds["3"] = labeled(10, 21, 96, "3");
  CHECK_THROWS_WITH(build_transfer_task(ds, {"1", "3", std::nullopt}), "incompatible domains");
  ds["4"] = labeled(4, 21, 64, "4");
  CHECK_THROWS_WITH(build_transfer_task(ds, {"1", "4", std::nullopt}), "incompatible domains");
}

TEST_CASE("synthetic task gives a 200/200/200 split") {
  SyntheticConfig cfg;
  const auto conds = synthetic_conditions(cfg, NoiseSpec{NoiseType::mixed, -8.0, 0});
  const TransferData t = build_transfer_task(conds, {"syn_src", "syn_tgt", std::nullopt});
  CHECK(t.source_train.size() == 200);
  CHECK(t.target_train_unlabeled.size() == 200);
  CHECK(t.target_test.size() == 200);
  CHECK(t.source_train.class_counts() == std::vector<int>{50, 50, 50, 50});
  CHECK(synthetic_domain(cfg, true).samples == synthetic_domain(cfg, true).samples);
  CHECK(synthetic_domain(cfg, true).samples != synthetic_domain(cfg, false).samples);
}

TEST_CASE("dataset invariants") {
  SegmentedDataset d = labeled(2, 3, 64, "x");
  d.validate();
  d.samples.conservativeResize(Eigen::NoChange, 48);
  CHECK_THROWS(d.validate());
  d = labeled(2, 3, 64, "x");
  d.labels[0] = 5;
  CHECK_THROWS(d.validate());
  d = labeled(2, 3, 64, "x");
  d.role = DatasetRole::target_train_unlabeled;
  CHECK_THROWS(d.validate());
}

TEST_CASE("archive round trip and exact byte layout") {
  SegmentedDataset d = labeled(3, 2, 32, "c");
  d.samples = d.samples.cast<float>().cast<double>();
  const auto path = scratch_dir() / "a.isgd";
  write_archive(path, d);
  CHECK(std::filesystem::file_size(path) == 4 + 4 * 4 + 6 * 32 * 4 + 6 * 2);
  const SegmentedDataset back = read_archive(path, "c");
  CHECK(back.samples == d.samples);
  CHECK(back.labels == d.labels);
  CHECK(back.num_classes == 3);
  const SegmentedDataset hidden = read_archive(path, "c", DatasetRole::target_train_unlabeled);
  CHECK(hidden.labels.empty());

  std::ifstream is(path, std::ios::binary);
  char head[20];
  is.read(head, 20);
  CHECK(std::string(head, 4) == "ISGD");
  CHECK(head[4] == 1);
  CHECK(static_cast<unsigned char>(head[8]) == 32);
  CHECK(head[12] == 3);
  CHECK(head[16] == 6);

  std::ofstream(scratch_dir() / "bad.isgd") << "nope";
  CHECK_THROWS(read_archive(scratch_dir() / "bad.isgd"));
  CHECK_THROWS(read_archive(scratch_dir() / "missing.isgd"));
}

TEST_CASE("manifest parsing") {
  const auto dir = scratch_dir();
  std::ofstream(dir / "m.txt") << "# header\n1, raw/one.isgd, 10, 210\n\n2 , /abs/two.isgd , 10 , 210  # trailing\n";
  const auto entries = read_manifest(dir / "m.txt");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].condition_id == "1");
  CHECK(entries[0].path == dir / "raw/one.isgd");
  CHECK(entries[1].path == "/abs/two.isgd");
  CHECK(entries[1].samples_per_class == 210);

  std::ofstream(dir / "bad.txt") << "1, a.isgd, 10, 210\n2, b.isgd, ten, 210\n";
  CHECK_THROWS_WITH(read_manifest(dir / "bad.txt"), doctest::Contains(":2:"));
  write_manifest(dir / "w.txt", entries);
  const auto again = read_manifest(dir / "w.txt");
  CHECK(again[1].path == entries[1].path);
}

TEST_CASE("prepare_condition segments, caps per class and injects noise") {
  SegmentedDataset raw;
  raw.num_classes = 2;
  raw.samples = Eigen::MatrixXd::Random(3, 300);
  raw.labels = {0, 1, 0};
  const ManifestEntry entry{"c", "x", 2, 5};
  const SegmentedDataset clean = prepare_condition(raw, entry, 64, 64, std::nullopt);
  CHECK(clean.class_counts() == std::vector<int>{5, 4});
  CHECK(clean.samples.row(0) == raw.samples.row(0).head(64));
  CHECK(clean.samples.row(4) == raw.samples.row(2).head(64));
  const SegmentedDataset noisy = prepare_condition(raw, entry, 64, 64, NoiseSpec{NoiseType::gaussian, 0.0, 1});
  CHECK(noisy.samples != clean.samples);
  CHECK(noisy.samples == prepare_condition(raw, entry, 64, 64, NoiseSpec{NoiseType::gaussian, 0.0, 1}).samples);
  CHECK_THROWS(prepare_condition(raw, ManifestEntry{"c", "x", 3, 5}, 64, 64, std::nullopt));
}
