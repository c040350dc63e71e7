#pragma once

#include "comet/dataset.hpp"
#include "comet/pls.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace comet {

Vector spectrum(const DissectionModel& model);

/// u_j . v_j for every direction pair.
Vector uv_alignments(const DissectionModel& model);

/// U^T V, optionally with every entry replaced by its absolute value.
Eigen::MatrixXd uv_matrix(const DissectionModel& model, bool absolute = false);

/// Splits sigma_j / n_train into correlation and per-modality energy.
///
/// Projections use the model's means; Var(x) = x^T x / n over the rows of
/// the supplied data. An index whose text or audio std is (numerically)
/// zero is marked degenerate and reported with corr = 0.
struct CovarianceDecomposition {
  Vector sqrt_cov;
  Vector text_std;
  Vector audio_std;
  Vector corr;
  std::vector<bool> degenerate;
  // False when the data's cross-covariance disagrees with the model's
  // sigma, i.e. the data is not the fitting set.
  bool matches_model = true;
};

CovarianceDecomposition covariance_decomposition(const DissectionModel& model,
                                                 const PairedDataset& data);

/// Half-open range of absolute direction indices [begin, end).
struct IndexRange {
  Index begin = 0;
  Index end = 0;
};

struct SubspaceNorms {
  IndexRange range;
  double mean_norm_text = 0.0;
  double mean_norm_audio = 0.0;
};

/// Mean over rows of the Euclidean norm of the coefficients in `range`.
double mean_subspace_norm(const Coefficients& coeffs, IndexRange range);

std::vector<SubspaceNorms> subspace_norms(const Coefficients& text, const Coefficients& audio,
                                          const std::vector<IndexRange>& ranges);

struct SimilarityDissection {
  double direct = 0.0;
  double cross = 0.0;
  Vector per_index_direct;
};

/// Direct (j, j) and cross (k != l) terms of the centered inner product.
SimilarityDissection similarity_dissection(const DissectionModel& model,
                                           const Eigen::Ref<const Vector>& text_row,
                                           const Eigen::Ref<const Vector>& audio_row);

struct NegativeSampling {
  // Below this size every cross-group ordered pair is visited.
  Index exact_limit = 8192;
  std::int64_t sample_pairs = 1'000'000;
  std::uint64_t seed = 0;
};

struct ContributionReport {
  double direct_pos = 0.0;
  double direct_k_pos = 0.0;
  double cross_pos = 0.0;
  double direct_neg = 0.0;
  double direct_k_neg = 0.0;
  double cross_neg = 0.0;
  Index k = 0;
  std::int64_t negative_pairs = 0;
  // "exact:all-cross-group-ordered-pairs" or "sampled:<count>:seed=<seed>".
  std::string negative_sampling;
};

/// Mean absolute direct / head-direct / cross contributions for positive
/// pairs (i, i) and negative pairs (i, j) from different groups.
ContributionReport contribution_report(const DissectionModel& model, const PairedDataset& eval,
                                       Index k, const NegativeSampling& sampling = {});

/// sigma_j * (u_j . v_j).
Vector net_useful_contribution(const DissectionModel& model);

struct TopItem {
  Index row = 0;
  std::string text;
  double value = 0.0;
};

/// Rows ranked by coefficient `direction` (absolute 0-based index),
/// skipping any row whose raw-embedding cosine to an already kept row
/// exceeds `dedup_threshold`. A threshold >= 1 disables deduplication.
std::vector<TopItem> top_items_by_direction(const Coefficients& coeffs, const RowMatrix& raw,
                                            const std::vector<std::string>& texts,
                                            Index direction, Index top_k,
                                            double dedup_threshold = 0.95);

/// X^T X over the coefficient matrix.
Eigen::MatrixXd coeff_covariance(const Coefficients& coeffs);

}  // namespace comet
