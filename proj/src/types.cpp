#include "comet/types.hpp"

namespace comet {

std::string_view to_string(Modality m) {
  return m == Modality::Text ? "text" : "audio";
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::PairingError: return "PairingError";
    case ErrorCode::GroupError: return "GroupError";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::ModalityError: return "ModalityError";
    case ErrorCode::MissingTexts: return "MissingTexts";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::BadTau: return "BadTau";
    case ErrorCode::BadMass: return "BadMass";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::ModelFormatError: return "ModelFormatError";
  }
  return "Unknown";
}

void require_finite(const RowMatrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFiniteData, std::string(what) + " contains NaN or Inf");
  }
}

}  // namespace comet
