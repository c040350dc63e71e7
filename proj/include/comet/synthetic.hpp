#pragma once

#include "comet/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace comet {

/// Generative recipe for paired data with a planted shared head.
///
///   text  = t_mean + U_head z + text tail
///   audio = a_mean + V_head z + audio tail
///
/// z ~ N(0, diag(shared_cov)) per item. Tails live in the orthogonal
/// complement of each modality's head: isotropic with per-coordinate std
/// tail_energy_*, plus an optional modality-private low-rank part of rank
/// private_rank and std private_std along the first complement directions.
/// V_head is U_head rotated by uv_misalignment radians toward fresh
/// directions, so u_j . v_j = cos(uv_misalignment).
struct SyntheticSpec {
  Index n = 1000;
  Index c = 32;
  Index k_shared = 4;
  std::vector<double> shared_cov;
  double tail_energy_text = 0.0;
  double tail_energy_audio = 0.0;
  double mean_gap_norm = 0.0;
  double uv_misalignment = 0.0;
  std::uint64_t seed = 0;

  double text_mean_norm = 0.6;
  Index captions_per_item = 1;
  Index private_rank = 0;
  double private_std = 0.0;
};

struct SyntheticTruth {
  Eigen::MatrixXd text_dirs;   // U*, first k_shared columns are the head
  Eigen::MatrixXd audio_dirs;  // V*
  Vector shared_cov;
  Vector expected_sigma;  // n * shared_cov
  Vector text_mean;
  Vector audio_mean;
  RowMatrix latents;  // one row per item
};

struct SyntheticData {
  PairedDataset dataset;
  SyntheticTruth truth;
};

/// Throws BadSpec for inconsistent recipes. Same spec and seed give a
/// bitwise-identical result.
SyntheticData generate(const SyntheticSpec& spec);

/// Named recipes: aligned, noisy-tail, misaligned, clotho-like.
SyntheticSpec preset(const std::string& name, std::uint64_t seed = 0);
std::vector<std::string> preset_names();

/// Splits at the first group boundary at or after `first_rows`.
std::pair<PairedDataset, PairedDataset> split_dataset(const PairedDataset& data,
                                                      Index first_rows);

}  // namespace comet
