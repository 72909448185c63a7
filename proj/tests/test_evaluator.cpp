#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "isgfan/evaluator.hpp"

using namespace isgfan;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "isgfan_test_evaluator";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("accuracy examples") {
  CHECK(accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
  CHECK(accuracy({0, 1, 1, 0}, {0, 1, 0, 0}) == 0.75);
  CHECK(accuracy({1, 0}, {0, 1}) == 0.0);
  CHECK_THROWS(accuracy({}, {}));
}

TEST_CASE("confusion matrix examples") {
  Eigen::MatrixXi perfect = confusion_matrix({0, 1, 2, 2}, {0, 1, 2, 2}, 3);
  Eigen::MatrixXi diag = Eigen::MatrixXi::Zero(3, 3);
  diag.diagonal() << 1, 1, 2;
  CHECK(perfect == diag);
  Eigen::MatrixXi expect(2, 2);
  expect << 0, 1, 0, 1;
  CHECK(confusion_matrix({1, 1}, {0, 1}, 2) == expect);
  CHECK_THROWS(confusion_matrix({0, 2}, {0, 1}, 2));
}

TEST_CASE("trace over N equals accuracy, rows count labels, permutation invariance") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> p(std::size_t(1 + t % 40)), y(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = cls(rng), y[i] = cls(rng);
    const Eigen::MatrixXi cm = confusion_matrix(p, y, 5);
    CHECK(double(cm.trace()) / double(p.size()) == doctest::Approx(accuracy(p, y)));
    CHECK(cm.sum() == int(p.size()));
    for (int c = 0; c < 5; ++c) CHECK(cm.row(c).sum() == std::count(y.begin(), y.end(), c));
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> pp, yy;
    for (auto i : order) pp.push_back(p[i]), yy.push_back(y[i]);
    CHECK(confusion_matrix(pp, yy, 5) == cm);
  }
}

TEST_CASE("argmax ties go to the smallest index") {
  Eigen::MatrixXd s(2, 3);
  s << 1, 3, 3, 2, 0, 1;
  CHECK(argmax_rows(s) == std::vector<int>{1, 0});
}

TEST_CASE("embedding export: empty, shape and round trip") {
  const auto empty = scratch("empty.csv");
  export_embeddings(Eigen::MatrixXd(0, 320), {}, {}, empty);
  std::ifstream e(empty);
  std::string line;
  int lines = 0;
  while (std::getline(e, line)) ++lines;
  CHECK(lines == 1);

  Eigen::MatrixXd f = Eigen::MatrixXd::Random(3, 320) * 7.0;
  const auto path = scratch("three.csv");
  export_embeddings(f, {0, 2, 1}, {"source", "target", "target"}, path);
  std::ifstream is(path);
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') + 1 == 322);
  }
  CHECK(rows == 3);
  const EmbeddingTable back = read_embeddings(path);
  CHECK(back.labels == std::vector<int>{0, 2, 1});
  CHECK(back.domains == std::vector<std::string>{"source", "target", "target"});
  CHECK((back.features - f).cwiseAbs().maxCoeff() < 1e-6);

  CHECK_THROWS(export_embeddings(f, {0, 1, 2}, {"a", "b", "c"}, "/nonexistent_dir/x/emb.csv"));
  CHECK_THROWS(export_embeddings(f, {0, 1}, {"a", "b", "c"}, path));
}

TEST_CASE("confusion matrix file") {
  Eigen::MatrixXi cm(2, 2);
  cm << 3, 1, 0, 4;
  const auto path = scratch("cm.csv");
  write_confusion_matrix(cm, path);
  std::ifstream is(path);
  std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(all.find("3,1") != std::string::npos);
  CHECK(all.find("0,4") != std::string::npos);
}
