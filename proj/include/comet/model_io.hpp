#pragma once

#include "comet/pca.hpp"
#include "comet/pls.hpp"

#include <filesystem>
#include <string>

namespace comet {

inline constexpr const char* kToolVersion = "comet 0.1.0";

/// Directory layout: t_mean.npy, a_mean.npy, U.npy, V.npy, sigma.npy and
/// model.json {"dim", "n_train", "source_manifest", "tool_version"}.
void save_model(const std::filesystem::path& dir, const DissectionModel& model,
                const std::string& source_manifest);
DissectionModel load_model(const std::filesystem::path& dir);

/// Directory layout: mean.npy, directions.npy, variances.npy and pca.json.
void save_pca(const std::filesystem::path& dir, const PcaModel& pca,
              const std::string& source_manifest);
PcaModel load_pca(const std::filesystem::path& dir);

}  // namespace comet
