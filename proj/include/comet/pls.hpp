#pragma once

#include "comet/dataset.hpp"
#include "comet/types.hpp"

#include <optional>
#include <vector>

namespace comet {

/// Head size used throughout the retrieval and captioning experiments.
inline constexpr Index kDefaultHeadSize = 100;

/// PLS-SVD of the centered text-audio cross-covariance M = T^T A.
///
/// Columns of `text_dirs` (U) and `audio_dirs` (V) are paired directions;
/// `sigma` holds the matching singular values in non-increasing order.
/// Direction indices are 0-based everywhere: column j of U is direction j.
struct DissectionModel {
  Vector text_mean;
  Vector audio_mean;
  Eigen::MatrixXd text_dirs;
  Eigen::MatrixXd audio_dirs;
  Vector sigma;
  Index n_train = 0;

  Index dim() const { return text_mean.size(); }
  const Vector& mean(Modality m) const { return m == Modality::Text ? text_mean : audio_mean; }
  const Eigen::MatrixXd& basis(Modality m) const {
    return m == Modality::Text ? text_dirs : audio_dirs;
  }
};

/// Per-sample projection values onto a contiguous block of directions
/// [offset, offset + values.cols()).
struct Coefficients {
  RowMatrix values;
  Modality modality = Modality::Text;
  Index offset = 0;
  bool weighted = false;

  Index rows() const { return values.rows(); }
  Index width() const { return values.cols(); }
};

/// Fits the dissection model on paired training data.
DissectionModel fit(const PairedDataset& train);

/// Flips (u_j, v_j) jointly so the largest-magnitude entry of u_j is
/// positive. The first such entry wins on exact ties.
void canonicalize_signs(Eigen::MatrixXd& text_dirs, Eigen::MatrixXd& audio_dirs);

/// Coefficients of each row: basis^T (row - mean).
Coefficients project(const DissectionModel& model, const EmbeddingMatrix& m);
Coefficients project(const DissectionModel& model, const RowMatrix& rows, Modality modality);

/// mean + basis * coeffs, optionally zeroing every coefficient at index >= keep.
/// Coefficients narrower than the model dimension are zero-padded.
EmbeddingMatrix reconstruct(const DissectionModel& model, const Coefficients& coeffs,
                            std::optional<Index> keep = std::nullopt);

/// First k columns (PLSHead).
Coefficients truncate_head(const Coefficients& coeffs, Index k);

/// Audio head scaled column-wise by the UV alignment u_j . v_j (PLSHeadW).
Coefficients reweight_head(const DissectionModel& model, const Coefficients& audio_head);

/// Columns k..end, with offset k.
Coefficients tail(const Coefficients& coeffs, Index k);

/// Scales each row to unit Euclidean norm. All-zero rows are left as is and
/// their indices are appended to `zero_rows` when provided.
RowMatrix l2_normalize(const RowMatrix& m, std::vector<Index>* zero_rows = nullptr);
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m, std::vector<Index>* zero_rows = nullptr);
Coefficients l2_normalize(const Coefficients& c, std::vector<Index>* zero_rows = nullptr);

/// Column means and the mean-centered copy of `m`.
Vector column_mean(const RowMatrix& m);
RowMatrix centered(const RowMatrix& m, const Vector& mean);

}  // namespace comet
