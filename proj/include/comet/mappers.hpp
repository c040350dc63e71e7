#pragma once

#include "comet/dataset.hpp"
#include "comet/pls.hpp"

#include <cstdint>
#include <string>

namespace comet {

/// Softmax temperature for projection decoding.
inline constexpr double kDefaultTau = 0.01;
/// Per-coordinate variance for noise injection.
inline constexpr double kDefaultNoiseVariance = 0.013;

/// Target-modality embeddings with unit-norm rows.
class MemoryBank {
 public:
  /// Normalizes every row. Throws EmptyBank for zero rows and
  /// DegenerateInput for an all-zero row.
  MemoryBank(const RowMatrix& rows, std::string source = {});

  const RowMatrix& rows() const { return rows_; }
  const std::string& source() const { return source_; }
  Index size() const { return rows_.rows(); }
  Index dim() const { return rows_.cols(); }

 private:
  RowMatrix rows_;
  std::string source_;
};

/// Removes the static gap (audio_mean - text_mean) from every row, then
/// normalizes unless `normalize` is false.
RowMatrix embedding_shift(const Vector& text_mean, const Vector& audio_mean,
                          const RowMatrix& batch, bool normalize = true);

/// I.i.d. zero-mean Gaussian noise with the given per-coordinate variance.
RowMatrix sample_noise(Index rows, Index cols, double variance, std::uint64_t seed);

/// l2_normalize(batch + noise) with noise from sample_noise(seed).
RowMatrix noise_inject(const RowMatrix& batch, double variance, std::uint64_t seed);

struct NearestNeighbor {
  Vector row;
  Index index = 0;
};

/// Bank row with the largest inner product; the lowest index wins ties.
NearestNeighbor nnd(const MemoryBank& bank, const Eigen::Ref<const Vector>& query);

/// Softmax(bank . query / tau) weights with max subtraction.
Vector softmax_weights(const MemoryBank& bank, const Eigen::Ref<const Vector>& query, double tau);

/// Unit-normalized softmax-weighted combination of bank rows.
Vector projection_decode(const MemoryBank& bank, const Eigen::Ref<const Vector>& query,
                         double tau = kDefaultTau);

/// Row-wise batch versions. Queries are normalized before scoring.
RowMatrix map_nnd(const MemoryBank& bank, const RowMatrix& queries,
                  std::vector<Index>* indices = nullptr);
RowMatrix map_pd(const MemoryBank& bank, const RowMatrix& queries, double tau = kDefaultTau);

struct LinearPd {
  Vector direct;
  Vector factored;
};

/// Softmax-free PD on mean-free inputs: X^T (X a), and the same quantity
/// routed through the model's bases as U (X_hat^T X_hat) (U^T V) a_hat.
LinearPd linear_pd(const DissectionModel& model, const RowMatrix& bank_centered,
                   const Eigen::Ref<const Vector>& query_centered);

struct LinearPdBatch {
  RowMatrix direct;
  RowMatrix factored;
};

/// linear_pd for every row of `queries_centered`, sharing X_hat^T X_hat.
LinearPdBatch linear_pd_batch(const DissectionModel& model, const RowMatrix& bank_centered,
                              const RowMatrix& queries_centered);

struct PdCharacterization {
  double cos_mean_before = 0.0;
  double cos_mean_after = 0.0;
  double dist_mean_before = 0.0;
  double dist_mean_after = 0.0;
  double head_cos_mean = 0.0;
  double tail_cos_mean = 0.0;
  double head_cos_mean_nnd = 0.0;
  // Stability of the audio mean between fitting and evaluation data.
  double audio_mean_cos_train_eval = 0.0;
  double audio_mean_dist_train_eval = 0.0;
  // True when every query maps to the same point or a head/tail segment
  // had zero norm, making the averaged cosines uninformative.
  bool degenerate = false;
  Index k = 0;
  Index n_queries = 0;
  double tau = kDefaultTau;
};

/// Maps one audio row per eval group through PD and NND and measures how
/// the mean, head [0, k) and tail [k, C) change. Mapped outputs are
/// decomposed with (U, text mean), raw audio with (V, audio mean).
PdCharacterization pd_characterize(const DissectionModel& model, const PairedDataset& eval,
                                   const MemoryBank& bank, double tau, Index k);

/// Smallest number of largest softmax weights whose sum reaches `mass`.
Index softmax_support(const MemoryBank& bank, const Eigen::Ref<const Vector>& query, double tau,
                      double mass);

}  // namespace comet
