#include "comet/retrieval.hpp"

#include "comet/parallel.hpp"
#include "comet/pls.hpp"

#include <algorithm>
#include <numeric>

namespace comet {

std::string_view to_string(Direction d) {
  return d == Direction::TextToAudio ? "text_to_audio" : "audio_to_text";
}

RowMatrix similarity_matrix(const RowMatrix& queries, const RowMatrix& gallery) {
  if (queries.cols() != gallery.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "queries have " + std::to_string(queries.cols()) +
                                                  " columns, gallery has " +
                                                  std::to_string(gallery.cols()));
  }
  return l2_normalize(queries) * l2_normalize(gallery).transpose();
}

RetrievalMetrics evaluate(const RowMatrix& sim, const Relevance& relevance, Direction direction) {
  const Index q = sim.rows();
  const Index g = sim.cols();
  if (static_cast<Index>(relevance.size()) != q) {
    throw Error(ErrorCode::DimensionMismatch, "relevance lists do not match query count");
  }
  for (Index i = 0; i < q; ++i) {
    const auto& pos = relevance[static_cast<std::size_t>(i)];
    if (pos.empty()) {
      throw Error(ErrorCode::NoPositives, "query " + std::to_string(i) + " has no positives");
    }
    for (Index p : pos) {
      if (p < 0 || p >= g) {
        throw Error(ErrorCode::DimensionMismatch, "positive index out of gallery range");
      }
    }
  }

  std::vector<double> ranks(static_cast<std::size_t>(q));
  std::vector<double> ap(static_cast<std::size_t>(q));
  parallel_for(0, q, [&](Index i) {
    const auto row = sim.row(i);
    std::vector<char> is_pos(static_cast<std::size_t>(g), 0);
    for (Index p : relevance[static_cast<std::size_t>(i)]) is_pos[static_cast<std::size_t>(p)] = 1;

    auto before = [&](Index a, Index b) {
      return row(a) > row(b) || (row(a) == row(b) && a < b);
    };
    // Best-ranked positive.
    Index best = -1;
    for (Index p : relevance[static_cast<std::size_t>(i)]) {
      if (best < 0 || before(p, best)) best = p;
    }
    Index ahead = 0;
    for (Index j = 0; j < g; ++j) {
      if (before(j, best)) ++ahead;
    }
    ranks[static_cast<std::size_t>(i)] = static_cast<double>(ahead + 1);

    const Index top = std::min<Index>(10, g);
    std::vector<Index> order(static_cast<std::size_t>(g));
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + top, order.end(), before);
    double hits = 0.0;
    double sum_precision = 0.0;
    for (Index r = 0; r < top; ++r) {
      if (is_pos[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])]) {
        hits += 1.0;
        sum_precision += hits / static_cast<double>(r + 1);
      }
    }
    const auto n_pos = static_cast<double>(relevance[static_cast<std::size_t>(i)].size());
    ap[static_cast<std::size_t>(i)] = sum_precision / std::min(n_pos, 10.0);
  });

  RetrievalMetrics m;
  m.direction = direction;
  m.n_queries = q;
  m.n_gallery = g;
  for (int k : kRecallCutoffs) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(),
                                    [k](double r) { return r <= static_cast<double>(k); });
    m.r_at[k] = 100.0 * static_cast<double>(hits) / static_cast<double>(q);
  }
  m.mean_rank = std::accumulate(ranks.begin(), ranks.end(), 0.0) / static_cast<double>(q);
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  m.median_rank = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  m.map10 = 100.0 * std::accumulate(ap.begin(), ap.end(), 0.0) / static_cast<double>(q);
  return m;
}

Protocol build_protocol(const RowMatrix& text, const RowMatrix& audio,
                        const std::vector<int>& groups, Direction direction) {
  if (text.rows() != audio.rows() || static_cast<Index>(groups.size()) != text.rows()) {
    throw Error(ErrorCode::GroupError, "text, audio and group ids must have equal length");
  }
  check_contiguous_groups(groups);
  const auto starts = group_starts(groups);
  const auto n_groups = static_cast<Index>(starts.size());

  Protocol p;
  RowMatrix unique_audio(n_groups, audio.cols());
  for (Index gi = 0; gi < n_groups; ++gi) {
    unique_audio.row(gi) = audio.row(starts[static_cast<std::size_t>(gi)]);
  }
  if (direction == Direction::TextToAudio) {
    p.queries = text;
    p.gallery = std::move(unique_audio);
    p.relevance.resize(static_cast<std::size_t>(text.rows()));
    Index gi = -1;
    for (Index i = 0; i < text.rows(); ++i) {
      if (gi + 1 < n_groups && starts[static_cast<std::size_t>(gi + 1)] == i) ++gi;
      p.relevance[static_cast<std::size_t>(i)] = {gi};
    }
  } else {
    p.queries = std::move(unique_audio);
    p.gallery = text;
    p.relevance.resize(static_cast<std::size_t>(n_groups));
    for (Index gi = 0; gi < n_groups; ++gi) {
      const Index lo = starts[static_cast<std::size_t>(gi)];
      const Index hi = gi + 1 < n_groups ? starts[static_cast<std::size_t>(gi + 1)] : text.rows();
      for (Index r = lo; r < hi; ++r) p.relevance[static_cast<std::size_t>(gi)].push_back(r);
    }
  }
  return p;
}

Protocol build_protocol(const PairedDataset& dataset, Direction direction) {
  return build_protocol(dataset.text.data, dataset.audio.data, dataset.groups, direction);
}

RetrievalMetrics retrieve(const RowMatrix& text, const RowMatrix& audio,
                          const std::vector<int>& groups, Direction direction) {
  const Protocol p = build_protocol(text, audio, groups, direction);
  return evaluate(similarity_matrix(p.queries, p.gallery), p.relevance, direction);
}

}  // namespace comet
