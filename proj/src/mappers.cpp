#include "comet/mappers.hpp"

#include "comet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace comet {

namespace {

void require_query(const MemoryBank& bank, Index len) {
  if (bank.size() == 0) throw Error(ErrorCode::EmptyBank, "memory bank is empty");
  if (len != bank.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query has " + std::to_string(len) +
                                                  " entries, bank dimension is " +
                                                  std::to_string(bank.dim()));
  }
}

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::BadTau, "temperature must be positive and finite");
  }
}

// In-place softmax of scores / tau over a row; returns false on overflow.
bool softmax_inplace(Eigen::Ref<Vector> scores, double tau) {
  scores /= tau;
  const double top = scores.maxCoeff();
  if (!std::isfinite(top)) return false;
  scores = (scores.array() - top).exp();
  const double total = scores.sum();
  if (!(total > 0.0) || !std::isfinite(total)) return false;
  scores /= total;
  return true;
}

double cosine(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, bool& zero) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) {
    zero = true;
    return 0.0;
  }
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

}  // namespace

MemoryBank::MemoryBank(const RowMatrix& rows, std::string source) : source_(std::move(source)) {
  if (rows.rows() == 0) throw Error(ErrorCode::EmptyBank, "memory bank is empty");
  require_finite(rows, "memory bank");
  std::vector<Index> zero;
  rows_ = l2_normalize(rows, &zero);
  if (!zero.empty()) {
    throw Error(ErrorCode::DegenerateInput,
                "memory bank row " + std::to_string(zero.front()) + " is all zeros");
  }
}

RowMatrix embedding_shift(const Vector& text_mean, const Vector& audio_mean,
                          const RowMatrix& batch, bool normalize) {
  if (text_mean.size() != batch.cols() || audio_mean.size() != batch.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mean and batch dimensions differ");
  }
  RowMatrix out = batch.rowwise() - (audio_mean - text_mean).transpose();
  return normalize ? l2_normalize(out) : out;
}

RowMatrix sample_noise(Index rows, Index cols, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw Error(ErrorCode::BadSpec, "noise variance must be finite and >= 0");
  }
  RowMatrix noise = RowMatrix::Zero(rows, cols);
  if (variance == 0.0) return noise;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) noise(r, c) = gauss(rng);
  }
  return noise;
}

RowMatrix noise_inject(const RowMatrix& batch, double variance, std::uint64_t seed) {
  return l2_normalize(batch + sample_noise(batch.rows(), batch.cols(), variance, seed));
}

NearestNeighbor nnd(const MemoryBank& bank, const Eigen::Ref<const Vector>& query) {
  require_query(bank, query.size());
  const Vector scores = bank.rows() * query;
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = i;
  }
  return NearestNeighbor{bank.rows().row(best).transpose(), best};
}

Vector softmax_weights(const MemoryBank& bank, const Eigen::Ref<const Vector>& query,
                       double tau) {
  require_query(bank, query.size());
  require_tau(tau);
  Vector w = bank.rows() * query;
  if (!softmax_inplace(w, tau)) {
    throw Error(ErrorCode::BadTau, "softmax overflowed at tau = " + std::to_string(tau));
  }
  return w;
}

Vector projection_decode(const MemoryBank& bank, const Eigen::Ref<const Vector>& query,
                         double tau) {
  const Vector w = softmax_weights(bank, query, tau);
  Vector out = bank.rows().transpose() * w;
  const double norm = out.norm();
  if (norm > 0.0) out /= norm;
  return out;
}

namespace {

constexpr Index kQueryBlock = 128;

// Scores queries against the bank one block at a time: body(first_row, scores).
template <typename Body>
void for_each_score_block(const MemoryBank& bank, const RowMatrix& unit_queries, Body&& body) {
  const Index blocks = (unit_queries.rows() + kQueryBlock - 1) / kQueryBlock;
  parallel_for(0, blocks, [&](Index b) {
    const Index lo = b * kQueryBlock;
    const Index len = std::min(kQueryBlock, unit_queries.rows() - lo);
    RowMatrix scores = unit_queries.middleRows(lo, len) * bank.rows().transpose();
    body(lo, scores);
  });
}

}  // namespace

RowMatrix map_nnd(const MemoryBank& bank, const RowMatrix& queries, std::vector<Index>* indices) {
  require_query(bank, queries.cols());
  const RowMatrix unit = l2_normalize(queries);
  RowMatrix out(queries.rows(), bank.dim());
  std::vector<Index> picked(static_cast<std::size_t>(queries.rows()));
  for_each_score_block(bank, unit, [&](Index lo, const RowMatrix& scores) {
    for (Index r = 0; r < scores.rows(); ++r) {
      Index best = 0;
      for (Index i = 1; i < scores.cols(); ++i) {
        if (scores(r, i) > scores(r, best)) best = i;
      }
      picked[static_cast<std::size_t>(lo + r)] = best;
      out.row(lo + r) = bank.rows().row(best);
    }
  });
  if (indices) *indices = std::move(picked);
  return out;
}

RowMatrix map_pd(const MemoryBank& bank, const RowMatrix& queries, double tau) {
  require_query(bank, queries.cols());
  require_tau(tau);
  const RowMatrix unit = l2_normalize(queries);
  RowMatrix out(queries.rows(), bank.dim());
  std::vector<char> ok(static_cast<std::size_t>(queries.rows()), 1);
  for_each_score_block(bank, unit, [&](Index lo, const RowMatrix& block) {
    RowMatrix weights = block;
    for (Index r = 0; r < weights.rows(); ++r) {
      Vector w = weights.row(r).transpose();
      if (!softmax_inplace(w, tau)) {
        ok[static_cast<std::size_t>(lo + r)] = 0;
        w.setZero();
      }
      weights.row(r) = w.transpose();
    }
    RowMatrix mapped = weights * bank.rows();
    out.middleRows(lo, mapped.rows()) = l2_normalize(mapped);
  });
  if (std::find(ok.begin(), ok.end(), 0) != ok.end()) {
    throw Error(ErrorCode::BadTau, "softmax overflowed at tau = " + std::to_string(tau));
  }
  return out;
}

LinearPd linear_pd(const DissectionModel& model, const RowMatrix& bank_centered,
                   const Eigen::Ref<const Vector>& query_centered) {
  if (bank_centered.cols() != model.dim() || query_centered.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "bank, query and model dimensions differ");
  }
  LinearPd out;
  out.direct = bank_centered.transpose() * (bank_centered * query_centered);

  const RowMatrix x_hat = bank_centered * model.text_dirs;
  const Vector a_hat = model.audio_dirs.transpose() * query_centered;
  const Vector filtered = (model.text_dirs.transpose() * model.audio_dirs) * a_hat;
  const Vector rescaled = x_hat.transpose() * (x_hat * filtered);
  out.factored = model.text_dirs * rescaled;
  return out;
}

LinearPdBatch linear_pd_batch(const DissectionModel& model, const RowMatrix& bank_centered,
                              const RowMatrix& queries_centered) {
  if (bank_centered.cols() != model.dim() || queries_centered.cols() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "bank, queries and model dimensions differ");
  }
  LinearPdBatch out;
  out.direct = (queries_centered * bank_centered.transpose()) * bank_centered;

  const RowMatrix x_hat = bank_centered * model.text_dirs;
  const Eigen::MatrixXd gram = x_hat.transpose() * x_hat;
  const Eigen::MatrixXd uv = model.text_dirs.transpose() * model.audio_dirs;
  const RowMatrix a_hat = queries_centered * model.audio_dirs;
  // Row form of U G (U^T V) a_hat, with G symmetric.
  out.factored = ((a_hat * uv.transpose()) * gram) * model.text_dirs.transpose();
  return out;
}

PdCharacterization pd_characterize(const DissectionModel& model, const PairedDataset& eval,
                                   const MemoryBank& bank, double tau, Index k) {
  if (eval.dim() != model.dim() || bank.dim() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model, dataset and bank dimensions differ");
  }
  if (k < 1 || k >= model.dim()) {
    throw Error(ErrorCode::BadK, "head size must lie in [1, " + std::to_string(model.dim()) + ")");
  }
  const auto starts = group_starts(eval.groups);
  const auto n = static_cast<Index>(starts.size());
  RowMatrix audio(n, eval.dim());
  for (Index i = 0; i < n; ++i) audio.row(i) = eval.audio.data.row(starts[static_cast<std::size_t>(i)]);

  const RowMatrix pd = map_pd(bank, audio, tau);
  const RowMatrix nn = map_nnd(bank, audio);

  PdCharacterization out;
  out.k = k;
  out.tau = tau;
  out.n_queries = n;

  bool zero = false;
  const Vector& t_mean = model.text_mean;
  const Vector a_eval = column_mean(audio);
  const Vector pd_mean = column_mean(pd);
  out.cos_mean_before = cosine(a_eval, t_mean, zero);
  out.cos_mean_after = cosine(pd_mean, t_mean, zero);
  out.dist_mean_before = (a_eval - t_mean).norm();
  out.dist_mean_after = (pd_mean - t_mean).norm();
  out.audio_mean_cos_train_eval = cosine(model.audio_mean, a_eval, zero);
  out.audio_mean_dist_train_eval = (model.audio_mean - a_eval).norm();

  const RowMatrix a_hat = project(model, audio, Modality::Audio).values;
  const RowMatrix pd_hat = project(model, pd, Modality::Text).values;
  const RowMatrix nn_hat = project(model, nn, Modality::Text).values;
  const Index c = model.dim();
  double head = 0.0;
  double tail_sum = 0.0;
  double head_nnd = 0.0;
  bool segment_zero = false;
  for (Index i = 0; i < n; ++i) {
    head += cosine(pd_hat.row(i).head(k).transpose(), a_hat.row(i).head(k).transpose(),
                   segment_zero);
    tail_sum += cosine(pd_hat.row(i).tail(c - k).transpose(),
                       a_hat.row(i).tail(c - k).transpose(), segment_zero);
    head_nnd += cosine(nn_hat.row(i).head(k).transpose(), a_hat.row(i).head(k).transpose(),
                       segment_zero);
  }
  out.head_cos_mean = head / static_cast<double>(n);
  out.tail_cos_mean = tail_sum / static_cast<double>(n);
  out.head_cos_mean_nnd = head_nnd / static_cast<double>(n);

  bool collapsed = n > 1;
  for (Index i = 1; i < n && collapsed; ++i) {
    collapsed = pd.row(i) == pd.row(0);
  }
  out.degenerate = segment_zero || collapsed;
  return out;
}

Index softmax_support(const MemoryBank& bank, const Eigen::Ref<const Vector>& query, double tau,
                      double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw Error(ErrorCode::BadMass, "mass must lie in (0, 1)");
  Vector w = softmax_weights(bank, query, tau);
  std::sort(w.data(), w.data() + w.size(), std::greater<>());
  double acc = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    acc += w(i);
    if (acc >= mass - 1e-12) return i + 1;
  }
  return w.size();
}

}  // namespace comet
