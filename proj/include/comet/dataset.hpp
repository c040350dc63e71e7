#pragma once

#include "comet/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace comet {

struct DatasetManifest {
  std::string name;
  std::filesystem::path text_path;
  std::filesystem::path audio_path;
  // Rows sharing an id are captions of the same audio; ids form contiguous runs.
  std::vector<int> group_ids;
  std::optional<std::vector<std::string>> item_texts;
};

/// Row-aligned text/audio embeddings: row i of each forms a positive pair.
struct PairedDataset {
  EmbeddingMatrix text;
  EmbeddingMatrix audio;
  std::vector<int> groups;
  std::optional<std::vector<std::string>> texts;
  std::string name;

  Index size() const { return text.rows(); }
  Index dim() const { return text.cols(); }
};

/// Parses the JSON manifest. Relative tensor paths resolve against the
/// manifest's directory. `group_ids` may be an explicit list or the
/// shorthand {"captions_per_item": k, "num_items": n}.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Builds a paired dataset; an audio matrix with one row per group is
/// replicated to match the text rows.
PairedDataset load_dataset(const DatasetManifest& manifest);

/// Same pairing rules applied to in-memory matrices.
PairedDataset make_paired(EmbeddingMatrix text, EmbeddingMatrix audio, std::vector<int> groups,
                          std::optional<std::vector<std::string>> texts = std::nullopt,
                          std::string name = {});

/// Throws GroupError unless every id labels one contiguous run of rows.
void check_contiguous_groups(const std::vector<int>& groups);

/// Number of distinct (contiguous) groups.
Index count_groups(const std::vector<int>& groups);

/// Index of the first row of each group, in order of appearance.
std::vector<Index> group_starts(const std::vector<int>& groups);

}  // namespace comet
