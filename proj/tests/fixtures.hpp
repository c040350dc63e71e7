#pragma once

#include "comet/dataset.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace fixture {

namespace fs = std::filesystem;

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("comet-test-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

// Paired 1:1 dataset with audio = text * mix + noise; every row its own group.
inline comet::PairedDataset random_pairs(comet::Index n, comet::Index c, std::uint64_t seed,
                                         double noise = 0.3) {
  const comet::RowMatrix t = oracle::gaussian(n, c, seed);
  const comet::RowMatrix mix = oracle::gaussian(c, c, seed + 1, 1.0 / std::sqrt(double(c)));
  const comet::RowMatrix a = t * mix + oracle::gaussian(n, c, seed + 2, noise);
  std::vector<int> groups(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = static_cast<int>(i);
  return comet::make_paired({t, comet::Modality::Text}, {a, comet::Modality::Audio}, groups);
}

}  // namespace fixture
