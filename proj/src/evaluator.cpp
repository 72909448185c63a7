#include "isgfan/evaluator.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace isgfan {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw std::invalid_argument("accuracy: no samples");
  if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Eigen::MatrixXi confusion_matrix(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("confusion_matrix: length mismatch");
  Eigen::MatrixXi cm = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes) {
      throw std::out_of_range("confusion_matrix: class out of range");
    }
    ++cm(labels[i], predictions[i]);
  }
  return cm;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

void export_embeddings(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const std::vector<std::string>& domain_tags, const std::filesystem::path& path) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n || domain_tags.size() != n) throw std::invalid_argument("export_embeddings: length mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write embeddings: " + path.string());
  os << "domain,label";
  for (Eigen::Index j = 0; j < features.cols(); ++j) os << ",f" << j;
  os << '\n' << std::setprecision(9);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    os << domain_tags[static_cast<std::size_t>(i)] << ',' << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < features.cols(); ++j) os << ',' << features(i, j);
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing embeddings: " + path.string());
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open embeddings: " + path.string());
  std::string line;
  std::getline(is, line);
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<std::vector<double>> rows;
  EmbeddingTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    table.domains.push_back(cell);
    std::getline(ss, cell, ',');
    table.labels.push_back(std::stoi(cell));
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(values.size()) != columns - 2) throw std::runtime_error("ragged embeddings row");
    rows.push_back(std::move(values));
  }
  table.features.resize(static_cast<Eigen::Index>(rows.size()), columns - 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

void write_confusion_matrix(const Eigen::MatrixXi& cm, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write confusion matrix: " + path.string());
  os << "# rows: true class, columns: predicted class\n";
  for (Eigen::Index i = 0; i < cm.rows(); ++i) {
    for (Eigen::Index j = 0; j < cm.cols(); ++j) os << (j ? "," : "") << cm(i, j);
    os << '\n';
  }
}

}  // namespace isgfan
