#include "comet/dataset.hpp"

#include "comet/npy.hpp"

#include <json.hpp>

#include <fstream>
#include <unordered_set>

namespace comet {

using nlohmann::json;

namespace {

[[noreturn]] void manifest_error(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::ManifestError, path.string() + ": " + why);
}

}  // namespace

void check_contiguous_groups(const std::vector<int>& groups) {
  std::unordered_set<int> closed;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i > 0 && groups[i] != groups[i - 1]) {
      closed.insert(groups[i - 1]);
    }
    if (closed.count(groups[i]) != 0) {
      throw Error(ErrorCode::GroupError, "group id " + std::to_string(groups[i]) +
                                             " reappears at row " + std::to_string(i) +
                                             " after its run ended");
    }
  }
}

Index count_groups(const std::vector<int>& groups) {
  return static_cast<Index>(group_starts(groups).size());
}

std::vector<Index> group_starts(const std::vector<int>& groups) {
  std::vector<Index> starts;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i == 0 || groups[i] != groups[i - 1]) starts.push_back(static_cast<Index>(i));
  }
  return starts;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    manifest_error(path, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) manifest_error(path, "manifest must be a JSON object");

  DatasetManifest m;
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  try {
    m.name = j.value("name", path.stem().string());
    if (!j.contains("text") || !j.contains("audio")) manifest_error(path, "missing text/audio");
    m.text_path = resolve(j.at("text").get<std::string>());
    m.audio_path = resolve(j.at("audio").get<std::string>());
    if (!j.contains("group_ids")) manifest_error(path, "missing group_ids");
    const auto& g = j.at("group_ids");
    if (g.is_array()) {
      m.group_ids = g.get<std::vector<int>>();
    } else if (g.is_object()) {
      const int per = g.at("captions_per_item").get<int>();
      const int items = g.at("num_items").get<int>();
      if (per < 1 || items < 1) manifest_error(path, "group shorthand needs positive counts");
      m.group_ids.reserve(static_cast<std::size_t>(per) * static_cast<std::size_t>(items));
      for (int item = 0; item < items; ++item) {
        for (int c = 0; c < per; ++c) m.group_ids.push_back(item);
      }
    } else {
      manifest_error(path, "group_ids must be a list or an object");
    }
    if (j.contains("texts") && !j.at("texts").is_null()) {
      m.item_texts = j.at("texts").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    manifest_error(path, e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  json j;
  j["name"] = manifest.name;
  auto rel = [&](const std::filesystem::path& p) {
    if (p.parent_path() == path.parent_path()) return p.filename().string();
    return p.string();
  };
  j["text"] = rel(manifest.text_path);
  j["audio"] = rel(manifest.audio_path);
  j["group_ids"] = manifest.group_ids;
  if (manifest.item_texts) j["texts"] = *manifest.item_texts;
  atomic_write(path, j.dump(2) + "\n");
}

PairedDataset make_paired(EmbeddingMatrix text, EmbeddingMatrix audio, std::vector<int> groups,
                          std::optional<std::vector<std::string>> texts, std::string name) {
  text.modality = Modality::Text;
  audio.modality = Modality::Audio;
  if (text.cols() != audio.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "text has " + std::to_string(text.cols()) + " columns, audio has " +
                    std::to_string(audio.cols()));
  }
  if (text.cols() < 2) throw Error(ErrorCode::ShapeError, "embedding dimension must be >= 2");
  if (static_cast<Index>(groups.size()) != text.rows()) {
    throw Error(ErrorCode::PairingError,
                std::to_string(groups.size()) + " group ids for " +
                    std::to_string(text.rows()) + " text rows");
  }
  check_contiguous_groups(groups);
  require_finite(text.data, "text embeddings");
  require_finite(audio.data, "audio embeddings");

  const auto starts = group_starts(groups);
  const auto n_groups = static_cast<Index>(starts.size());
  if (audio.rows() != text.rows()) {
    if (audio.rows() != n_groups) {
      throw Error(ErrorCode::PairingError,
                  "audio has " + std::to_string(audio.rows()) + " rows; expected " +
                      std::to_string(text.rows()) + " (aligned) or " +
                      std::to_string(n_groups) + " (one per group)");
    }
    RowMatrix expanded(text.rows(), audio.cols());
    Index g = -1;
    for (Index i = 0; i < text.rows(); ++i) {
      if (g + 1 < n_groups && starts[static_cast<std::size_t>(g + 1)] == i) ++g;
      expanded.row(i) = audio.data.row(g);
    }
    audio.data = std::move(expanded);
  }
  if (texts && static_cast<Index>(texts->size()) != text.rows()) {
    throw Error(ErrorCode::PairingError,
                std::to_string(texts->size()) + " captions for " + std::to_string(text.rows()) +
                    " text rows");
  }
  return PairedDataset{std::move(text), std::move(audio), std::move(groups), std::move(texts),
                       std::move(name)};
}

PairedDataset load_dataset(const DatasetManifest& manifest) {
  auto text = read_tensor(manifest.text_path, Modality::Text);
  auto audio = read_tensor(manifest.audio_path, Modality::Audio);
  return make_paired(std::move(text), std::move(audio), manifest.group_ids, manifest.item_texts,
                     manifest.name);
}

}  // namespace comet
