#pragma once

#include "comet/dataset.hpp"
#include "comet/types.hpp"

#include <map>
#include <string_view>
#include <vector>

namespace comet {

enum class Direction { TextToAudio, AudioToText };

std::string_view to_string(Direction d);

/// Recall cut-offs reported by evaluate().
inline constexpr int kRecallCutoffs[] = {1, 5, 10, 50};

struct RetrievalMetrics {
  std::map<int, double> r_at;  // percentages
  double mean_rank = 0.0;
  double median_rank = 0.0;
  double map10 = 0.0;  // percentage
  Direction direction = Direction::TextToAudio;
  Index n_queries = 0;
  Index n_gallery = 0;
};

/// Cosine scores: inner products of unit-normalized rows (zero rows stay zero).
RowMatrix similarity_matrix(const RowMatrix& queries, const RowMatrix& gallery);

/// Per-query gallery indices that count as correct.
using Relevance = std::vector<std::vector<Index>>;

/// Ranks the gallery by descending score, ties going to the lower gallery
/// index. A query's rank is the 1-based position of its best-ranked
/// positive. mAP@10 divides by min(#positives, 10).
RetrievalMetrics evaluate(const RowMatrix& sim, const Relevance& relevance,
                          Direction direction = Direction::TextToAudio);

struct Protocol {
  RowMatrix queries;
  RowMatrix gallery;
  Relevance relevance;
};

/// Text-to-audio: every text row queries one audio per group.
/// Audio-to-text: one audio per group queries all text rows; the group's
/// captions are its positives.
Protocol build_protocol(const RowMatrix& text, const RowMatrix& audio,
                        const std::vector<int>& groups, Direction direction);
Protocol build_protocol(const PairedDataset& dataset, Direction direction);

/// build_protocol + similarity_matrix + evaluate.
RetrievalMetrics retrieve(const RowMatrix& text, const RowMatrix& audio,
                          const std::vector<int>& groups, Direction direction);

}  // namespace comet
