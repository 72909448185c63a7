#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace isgfan {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Rng = std::mt19937_64;

/// A batch of multichannel sequences laid out channels x (batch * length).
/// Sample b occupies the contiguous column range [b * length, (b + 1) * length).
template <typename Scalar>
struct SequenceBatch {
  Matrix<Scalar> values;
  Index batch = 0;
  Index length = 0;

  SequenceBatch() = default;
  SequenceBatch(Index channels, Index batch_size, Index seq_length)
      : values(Matrix<Scalar>::Zero(channels, batch_size * seq_length)),
        batch(batch_size),
        length(seq_length) {}
  SequenceBatch(Matrix<Scalar> v, Index batch_size, Index seq_length)
      : values(std::move(v)), batch(batch_size), length(seq_length) {
    if (values.cols() != batch * length) {
      throw std::invalid_argument("sequence batch: column count must equal batch * length");
    }
  }

  Index channels() const { return values.rows(); }

  auto sample(Index b) { return values.middleCols(b * length, length); }
  auto sample(Index b) const { return values.middleCols(b * length, length); }

  /// Samples [first, first + count) as a new batch.
  SequenceBatch slice(Index first, Index count) const {
    return SequenceBatch(values.middleCols(first * length, count * length), count, length);
  }
};

/// Stacks (batch, length) rows into a single-channel sequence batch.
template <typename Scalar>
SequenceBatch<Scalar> as_sequences(const Matrix<Scalar>& rows) {
  SequenceBatch<Scalar> out(1, rows.rows(), rows.cols());
  for (Index b = 0; b < rows.rows(); ++b) out.sample(b) = rows.row(b);
  return out;
}

/// Inverse of as_sequences for single-channel batches.
template <typename Scalar>
Matrix<Scalar> as_rows(const SequenceBatch<Scalar>& seq) {
  if (seq.channels() != 1) throw std::invalid_argument("as_rows: expected a single channel");
  Matrix<Scalar> rows(seq.batch, seq.length);
  for (Index b = 0; b < seq.batch; ++b) rows.row(b) = seq.sample(b);
  return rows;
}

/// Concatenates two batches with identical sample counts and lengths along channels.
template <typename Scalar>
SequenceBatch<Scalar> concat_channels(const SequenceBatch<Scalar>& a, const SequenceBatch<Scalar>& b) {
  if (a.batch != b.batch || a.length != b.length) {
    throw std::invalid_argument("concat_channels: batch/length mismatch");
  }
  SequenceBatch<Scalar> out(a.channels() + b.channels(), a.batch, a.length);
  out.values.topRows(a.channels()) = a.values;
  out.values.bottomRows(b.channels()) = b.values;
  return out;
}

}  // namespace isgfan
