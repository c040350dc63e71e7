#pragma once

#include "comet/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace comet {

enum class Precision { F32, F64 };

/// Reads a 2-D NPY v1.0 file with dtype <f4/<f8 (or their big-endian
/// variants). Values are widened to double and byte order is normalized.
EmbeddingMatrix read_tensor(const std::filesystem::path& path,
                            Modality modality = Modality::Text);

/// Writes a 2-D little-endian C-order NPY v1.0 file. The write goes to a
/// temporary sibling first and is renamed into place.
void write_tensor(const std::filesystem::path& path, const RowMatrix& m,
                  Precision precision = Precision::F64);

inline void write_tensor(const std::filesystem::path& path,
                         const EmbeddingMatrix& m,
                         Precision precision = Precision::F64) {
  write_tensor(path, m.data, precision);
}

/// 1-D convenience wrappers used for means and spectra in model directories.
void write_vector(const std::filesystem::path& path, const Vector& v,
                  Precision precision = Precision::F64);
Vector read_vector(const std::filesystem::path& path);

/// In-memory encoders; the file functions are thin wrappers around these.
std::string encode_npy(const RowMatrix& m, Precision precision, bool one_dim = false);
RowMatrix decode_npy(const std::string& bytes, bool allow_one_dim = false);

/// Writes bytes to `path` through a temporary file and an atomic rename.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace comet
