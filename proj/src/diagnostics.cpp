#include "comet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace comet {

Vector spectrum(const DissectionModel& model) { return model.sigma; }

Vector uv_alignments(const DissectionModel& model) {
  Vector out(model.dim());
  for (Index j = 0; j < model.dim(); ++j) {
    out(j) = model.text_dirs.col(j).dot(model.audio_dirs.col(j));
  }
  return out;
}

Eigen::MatrixXd uv_matrix(const DissectionModel& model, bool absolute) {
  Eigen::MatrixXd m = model.text_dirs.transpose() * model.audio_dirs;
  if (absolute) m = m.cwiseAbs();
  return m;
}

CovarianceDecomposition covariance_decomposition(const DissectionModel& model,
                                                 const PairedDataset& data) {
  if (data.dim() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "dataset and model dimensions differ");
  }
  const Index c = model.dim();
  const auto n = static_cast<double>(data.size());
  const RowMatrix t = project(model, data.text).values;
  const RowMatrix a = project(model, data.audio).values;

  CovarianceDecomposition out;
  out.sqrt_cov = (model.sigma.array().max(0.0) / static_cast<double>(model.n_train)).sqrt();
  out.text_std = (t.colwise().squaredNorm().transpose().array() / n).sqrt();
  out.audio_std = (a.colwise().squaredNorm().transpose().array() / n).sqrt();
  out.corr = Vector::Zero(c);
  out.degenerate.assign(static_cast<std::size_t>(c), false);

  const double max_t = out.text_std.maxCoeff();
  const double max_a = out.audio_std.maxCoeff();
  const double n_train = static_cast<double>(model.n_train);
  const double tol = 1e-8 * std::max(model.sigma.maxCoeff() / n_train, 1e-300);
  for (Index j = 0; j < c; ++j) {
    const double cov = t.col(j).dot(a.col(j)) / n;
    const double st = out.text_std(j);
    const double sa = out.audio_std(j);
    const bool degenerate = st <= 1e-10 * max_t || sa <= 1e-10 * max_a;
    out.degenerate[static_cast<std::size_t>(j)] = degenerate;
    if (!degenerate) out.corr(j) = std::clamp(cov / (st * sa), -1.0, 1.0);
    if (std::abs(cov - model.sigma(j) / n_train) > tol) {
      out.matches_model = false;
    }
  }
  return out;
}

double mean_subspace_norm(const Coefficients& coeffs, IndexRange range) {
  const Index lo = range.begin - coeffs.offset;
  const Index hi = range.end - coeffs.offset;
  if (lo < 0 || hi > coeffs.width() || lo > hi) {
    throw Error(ErrorCode::BadK, "range [" + std::to_string(range.begin) + ", " +
                                     std::to_string(range.end) +
                                     ") outside the stored coefficients");
  }
  if (coeffs.rows() == 0) return 0.0;
  return coeffs.values.middleCols(lo, hi - lo).rowwise().norm().mean();
}

std::vector<SubspaceNorms> subspace_norms(const Coefficients& text, const Coefficients& audio,
                                          const std::vector<IndexRange>& ranges) {
  std::vector<SubspaceNorms> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) {
    out.push_back({r, mean_subspace_norm(text, r), mean_subspace_norm(audio, r)});
  }
  return out;
}

SimilarityDissection similarity_dissection(const DissectionModel& model,
                                           const Eigen::Ref<const Vector>& text_row,
                                           const Eigen::Ref<const Vector>& audio_row) {
  if (text_row.size() != model.dim() || audio_row.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "row length differs from model dimension");
  }
  const Vector t_hat = model.text_dirs.transpose() * (text_row - model.text_mean);
  const Vector a_hat = model.audio_dirs.transpose() * (audio_row - model.audio_mean);
  const Vector uv = uv_alignments(model);

  SimilarityDissection out;
  out.per_index_direct = t_hat.cwiseProduct(a_hat).cwiseProduct(uv);
  out.direct = out.per_index_direct.sum();
  // Full bilinear form t_hat^T (U^T V) a_hat minus its diagonal.
  const Vector mixed = model.audio_dirs * a_hat;
  const double total = (model.text_dirs * t_hat).dot(mixed);
  out.cross = total - out.direct;
  return out;
}

ContributionReport contribution_report(const DissectionModel& model, const PairedDataset& eval,
                                       Index k, const NegativeSampling& sampling) {
  if (eval.dim() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "dataset and model dimensions differ");
  }
  if (k < 1 || k > model.dim()) {
    throw Error(ErrorCode::BadK, "head size " + std::to_string(k) + " outside [1, " +
                                     std::to_string(model.dim()) + "]");
  }
  const Index n = eval.size();
  const RowMatrix t_c = centered(eval.text.data, model.text_mean);
  const RowMatrix a_c = centered(eval.audio.data, model.audio_mean);
  const RowMatrix t_hat = t_c * model.text_dirs;
  const RowMatrix a_hat = a_c * model.audio_dirs;
  const Vector uv = uv_alignments(model);
  // Weighted text coefficients so that direct(i, j) = tw_i . a_hat_j.
  const RowMatrix tw = t_hat * uv.asDiagonal();

  ContributionReport rep;
  rep.k = k;

  for (Index i = 0; i < n; ++i) {
    const double direct = tw.row(i).dot(a_hat.row(i));
    const double direct_k = tw.row(i).head(k).dot(a_hat.row(i).head(k));
    const double inner = t_c.row(i).dot(a_c.row(i));
    rep.direct_pos += std::abs(direct);
    rep.direct_k_pos += std::abs(direct_k);
    rep.cross_pos += std::abs(inner - direct);
  }
  rep.direct_pos /= static_cast<double>(n);
  rep.direct_k_pos /= static_cast<double>(n);
  rep.cross_pos /= static_cast<double>(n);

  double sum_direct = 0.0;
  double sum_direct_k = 0.0;
  double sum_cross = 0.0;
  std::int64_t count = 0;
  const auto& g = eval.groups;

  if (n <= sampling.exact_limit) {
    rep.negative_sampling = "exact:all-cross-group-ordered-pairs";
    constexpr Index kBlock = 256;
    for (Index lo = 0; lo < n; lo += kBlock) {
      const Index b = std::min(kBlock, n - lo);
      const RowMatrix direct = tw.middleRows(lo, b) * a_hat.transpose();
      const RowMatrix direct_k =
          tw.middleRows(lo, b).leftCols(k) * a_hat.leftCols(k).transpose();
      const RowMatrix inner = t_c.middleRows(lo, b) * a_c.transpose();
      for (Index r = 0; r < b; ++r) {
        const Index i = lo + r;
        for (Index j = 0; j < n; ++j) {
          if (g[static_cast<std::size_t>(i)] == g[static_cast<std::size_t>(j)]) continue;
          sum_direct += std::abs(direct(r, j));
          sum_direct_k += std::abs(direct_k(r, j));
          sum_cross += std::abs(inner(r, j) - direct(r, j));
          ++count;
        }
      }
    }
  } else {
    rep.negative_sampling = "sampled:" + std::to_string(sampling.sample_pairs) +
                            ":seed=" + std::to_string(sampling.seed);
    std::mt19937_64 rng(sampling.seed);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    if (count_groups(g) > 1) {
      while (count < sampling.sample_pairs) {
        const Index i = pick(rng);
        const Index j = pick(rng);
        if (g[static_cast<std::size_t>(i)] == g[static_cast<std::size_t>(j)]) continue;
        const double direct = tw.row(i).dot(a_hat.row(j));
        const double direct_k = tw.row(i).head(k).dot(a_hat.row(j).head(k));
        const double inner = t_c.row(i).dot(a_c.row(j));
        sum_direct += std::abs(direct);
        sum_direct_k += std::abs(direct_k);
        sum_cross += std::abs(inner - direct);
        ++count;
      }
    }
  }
  rep.negative_pairs = count;
  if (count > 0) {
    rep.direct_neg = sum_direct / static_cast<double>(count);
    rep.direct_k_neg = sum_direct_k / static_cast<double>(count);
    rep.cross_neg = sum_cross / static_cast<double>(count);
  }
  return rep;
}

Vector net_useful_contribution(const DissectionModel& model) {
  return model.sigma.cwiseProduct(uv_alignments(model));
}

std::vector<TopItem> top_items_by_direction(const Coefficients& coeffs, const RowMatrix& raw,
                                            const std::vector<std::string>& texts,
                                            Index direction, Index top_k,
                                            double dedup_threshold) {
  if (texts.empty()) throw Error(ErrorCode::MissingTexts, "no captions attached to dataset");
  if (static_cast<Index>(texts.size()) != coeffs.rows() || raw.rows() != coeffs.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "captions, embeddings and coefficients differ in length");
  }
  const Index col = direction - coeffs.offset;
  if (col < 0 || col >= coeffs.width()) {
    throw Error(ErrorCode::BadK, "direction " + std::to_string(direction) + " not stored");
  }
  std::vector<Index> order(static_cast<std::size_t>(coeffs.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
    return coeffs.values(x, col) > coeffs.values(y, col);
  });

  const RowMatrix unit = l2_normalize(raw);
  std::vector<TopItem> kept;
  for (Index row : order) {
    if (static_cast<Index>(kept.size()) >= top_k) break;
    bool duplicate = false;
    if (dedup_threshold < 1.0) {
      for (const auto& item : kept) {
        if (unit.row(row).dot(unit.row(item.row)) > dedup_threshold) {
          duplicate = true;
          break;
        }
      }
    }
    if (!duplicate) {
      kept.push_back({row, texts[static_cast<std::size_t>(row)], coeffs.values(row, col)});
    }
  }
  return kept;
}

Eigen::MatrixXd coeff_covariance(const Coefficients& coeffs) {
  return coeffs.values.transpose() * coeffs.values;
}

}  // namespace comet
