#include "comet/pca.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace comet {

PcaModel fit_pca(const EmbeddingMatrix& m) {
  if (m.rows() < 2) throw Error(ErrorCode::DegenerateInput, "PCA needs at least 2 rows");
  require_finite(m.data, "PCA input");

  PcaModel pca;
  pca.modality = m.modality;
  pca.mean = column_mean(m.data);
  const RowMatrix x = centered(m.data, pca.mean);
  const Eigen::MatrixXd cov =
      (x.transpose() * x) / static_cast<double>(m.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::DegenerateInput, "eigendecomposition did not converge");
  }
  // Eigen returns ascending eigenvalues.
  pca.variances = eig.eigenvalues().reverse().cwiseMax(0.0);
  pca.directions = eig.eigenvectors().rowwise().reverse();
  Eigen::MatrixXd unused = Eigen::MatrixXd::Zero(pca.directions.rows(), pca.directions.cols());
  canonicalize_signs(pca.directions, unused);
  return pca;
}

Coefficients project_pca(const PcaModel& pca, const EmbeddingMatrix& m, Index k) {
  if (m.cols() != pca.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(m.cols()) +
                                                  " columns, PCA dimension is " +
                                                  std::to_string(pca.dim()));
  }
  if (k < 1 || k > pca.dim()) {
    throw Error(ErrorCode::BadK, "PCA head size " + std::to_string(k) + " outside [1, " +
                                     std::to_string(pca.dim()) + "]");
  }
  Coefficients out;
  out.values = centered(m.data, pca.mean) * pca.directions.leftCols(k);
  out.modality = m.modality;
  return out;
}

}  // namespace comet
