#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace isgfan {

/// Fraction of exact matches.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

/// Rows are true classes, columns predicted classes.
Eigen::MatrixXi confusion_matrix(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes);

/// Argmax per row, smallest index on ties.
std::vector<int> argmax_rows(const Eigen::MatrixXd& scores);

/// Comma-separated rows "domain,label,f0..f{D-1}" with a header line.
void export_embeddings(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const std::vector<std::string>& domain_tags, const std::filesystem::path& path);

struct EmbeddingTable {
  std::vector<std::string> domains;
  std::vector<int> labels;
  Eigen::MatrixXd features;
};

EmbeddingTable read_embeddings(const std::filesystem::path& path);

void write_confusion_matrix(const Eigen::MatrixXi& cm, const std::filesystem::path& path);

}  // namespace isgfan
