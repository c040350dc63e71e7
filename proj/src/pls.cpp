#include "comet/pls.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace comet {

namespace {

void require_dim(const DissectionModel& model, Index cols) {
  if (cols != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(cols) +
                                                  " columns, model dimension is " +
                                                  std::to_string(model.dim()));
  }
}

}  // namespace

Vector column_mean(const RowMatrix& m) {
  return m.colwise().mean().transpose();
}

RowMatrix centered(const RowMatrix& m, const Vector& mean) {
  return m.rowwise() - mean.transpose();
}

void canonicalize_signs(Eigen::MatrixXd& text_dirs, Eigen::MatrixXd& audio_dirs) {
  for (Index j = 0; j < text_dirs.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index r = 0; r < text_dirs.rows(); ++r) {
      const double mag = std::abs(text_dirs(r, j));
      if (mag > best) {
        best = mag;
        arg = r;
      }
    }
    if (text_dirs(arg, j) < 0.0) {
      text_dirs.col(j) *= -1.0;
      audio_dirs.col(j) *= -1.0;
    }
  }
}

DissectionModel fit(const PairedDataset& train) {
  if (train.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "fitting needs at least 2 pairs");
  }
  if (train.text.cols() != train.audio.cols() || train.text.rows() != train.audio.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "text and audio matrices are not aligned");
  }
  require_finite(train.text.data, "text embeddings");
  require_finite(train.audio.data, "audio embeddings");

  DissectionModel model;
  model.n_train = train.size();
  model.text_mean = column_mean(train.text.data);
  model.audio_mean = column_mean(train.audio.data);

  const Eigen::MatrixXd cross = [&] {
    const RowMatrix t = centered(train.text.data, model.text_mean);
    const RowMatrix a = centered(train.audio.data, model.audio_mean);
    return Eigen::MatrixXd(t.transpose() * a);
  }();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  model.text_dirs = svd.matrixU();
  model.audio_dirs = svd.matrixV();
  model.sigma = svd.singularValues();
  canonicalize_signs(model.text_dirs, model.audio_dirs);
  return model;
}

Coefficients project(const DissectionModel& model, const RowMatrix& rows, Modality modality) {
  require_dim(model, rows.cols());
  Coefficients out;
  out.values = centered(rows, model.mean(modality)) * model.basis(modality);
  out.modality = modality;
  return out;
}

Coefficients project(const DissectionModel& model, const EmbeddingMatrix& m) {
  return project(model, m.data, m.modality);
}

EmbeddingMatrix reconstruct(const DissectionModel& model, const Coefficients& coeffs,
                            std::optional<Index> keep) {
  if (coeffs.offset != 0 || coeffs.weighted) {
    throw Error(ErrorCode::BadK, "reconstruction needs unweighted head coefficients");
  }
  if (coeffs.width() > model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "more coefficients than model directions");
  }
  Index used = coeffs.width();
  if (keep) {
    if (*keep < 0 || *keep > model.dim()) {
      throw Error(ErrorCode::BadK, "keep must lie in [0, " + std::to_string(model.dim()) + "]");
    }
    used = std::min(used, *keep);
  }
  const auto& basis = model.basis(coeffs.modality);
  RowMatrix out = coeffs.values.leftCols(used) * basis.leftCols(used).transpose();
  out.rowwise() += model.mean(coeffs.modality).transpose();
  return EmbeddingMatrix{std::move(out), coeffs.modality};
}

Coefficients truncate_head(const Coefficients& coeffs, Index k) {
  if (coeffs.offset != 0) throw Error(ErrorCode::BadK, "head truncation needs offset 0");
  if (k < 1 || k > coeffs.width()) {
    throw Error(ErrorCode::BadK, "head size " + std::to_string(k) + " outside [1, " +
                                     std::to_string(coeffs.width()) + "]");
  }
  Coefficients out = coeffs;
  out.values = coeffs.values.leftCols(k);
  return out;
}

Coefficients reweight_head(const DissectionModel& model, const Coefficients& audio_head) {
  if (audio_head.modality != Modality::Audio) {
    throw Error(ErrorCode::ModalityError, "only audio coefficients are reweighted");
  }
  if (audio_head.offset != 0 || audio_head.weighted) {
    throw Error(ErrorCode::BadK, "reweighting needs unweighted head coefficients");
  }
  if (audio_head.width() > model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "more coefficients than model directions");
  }
  Coefficients out = audio_head;
  for (Index j = 0; j < out.width(); ++j) {
    out.values.col(j) *= model.text_dirs.col(j).dot(model.audio_dirs.col(j));
  }
  out.weighted = true;
  return out;
}

Coefficients tail(const Coefficients& coeffs, Index k) {
  if (coeffs.offset != 0) throw Error(ErrorCode::BadK, "tail extraction needs offset 0");
  if (k < 0 || k >= coeffs.width()) {
    throw Error(ErrorCode::BadK, "tail start " + std::to_string(k) + " outside [0, " +
                                     std::to_string(coeffs.width()) + ")");
  }
  Coefficients out = coeffs;
  out.values = coeffs.values.rightCols(coeffs.width() - k);
  out.offset = k;
  return out;
}

RowMatrix l2_normalize(const RowMatrix& m, std::vector<Index>* zero_rows) {
  RowMatrix out = m;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm == 0.0) {
      if (zero_rows) zero_rows->push_back(r);
      continue;
    }
    out.row(r) /= norm;
  }
  return out;
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m, std::vector<Index>* zero_rows) {
  return EmbeddingMatrix{l2_normalize(m.data, zero_rows), m.modality};
}

Coefficients l2_normalize(const Coefficients& c, std::vector<Index>* zero_rows) {
  Coefficients out = c;
  out.values = l2_normalize(c.values, zero_rows);
  return out;
}

}  // namespace comet
