#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace comet {

/// Row-major dense matrix; rows are samples, columns are embedding dimensions.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Modality { Text, Audio };

std::string_view to_string(Modality m);

enum class ErrorCode {
  MalformedHeader,
  UnsupportedDtype,
  ShapeError,
  NonFiniteData,
  IoError,
  PairingError,
  GroupError,
  ManifestError,
  DegenerateInput,
  DimensionMismatch,
  BadK,
  ModalityError,
  MissingTexts,
  EmptyBank,
  BadTau,
  BadMass,
  NoPositives,
  BadSpec,
  ModelFormatError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dense embeddings of one modality. Always held in 64-bit floats.
struct EmbeddingMatrix {
  RowMatrix data;
  Modality modality = Modality::Text;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
};

/// Throws NonFiniteData if any entry is NaN or infinite.
void require_finite(const RowMatrix& m, std::string_view what);

}  // namespace comet
