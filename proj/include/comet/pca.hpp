#pragma once

#include "comet/pls.hpp"

namespace comet {

/// Single-modality principal components, directions sorted by descending
/// explained variance (population variance, divided by N).
struct PcaModel {
  Vector mean;
  Eigen::MatrixXd directions;
  Vector variances;
  Modality modality = Modality::Text;

  Index dim() const { return mean.size(); }
};

PcaModel fit_pca(const EmbeddingMatrix& m);

/// Centers rows with the fitted mean and projects onto the top k directions.
Coefficients project_pca(const PcaModel& pca, const EmbeddingMatrix& m, Index k);

}  // namespace comet
