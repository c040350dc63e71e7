#include "comet/synthetic.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>

namespace comet {

namespace {

[[noreturn]] void bad_spec(const std::string& why) {
  throw Error(ErrorCode::BadSpec, "synthetic spec: " + why);
}

void validate(const SyntheticSpec& s) {
  if (s.n < 2) bad_spec("n must be >= 2");
  if (s.c < 2) bad_spec("c must be >= 2");
  if (s.k_shared < 1 || s.k_shared > s.c) bad_spec("k_shared must lie in [1, c]");
  if (static_cast<Index>(s.shared_cov.size()) != s.k_shared) {
    bad_spec("shared_cov must have k_shared entries");
  }
  for (std::size_t j = 0; j < s.shared_cov.size(); ++j) {
    if (!(s.shared_cov[j] > 0.0)) bad_spec("shared_cov entries must be positive");
    if (j > 0 && s.shared_cov[j] > s.shared_cov[j - 1]) bad_spec("shared_cov must be descending");
  }
  if (!(s.tail_energy_text >= 0.0) || !(s.tail_energy_audio >= 0.0)) {
    bad_spec("tail energies must be >= 0");
  }
  if (!(s.mean_gap_norm >= 0.0) || !(s.text_mean_norm >= 0.0)) bad_spec("norms must be >= 0");
  if (s.uv_misalignment != 0.0 && 2 * s.k_shared > s.c) {
    bad_spec("misalignment needs 2 * k_shared <= c");
  }
  if (s.captions_per_item < 1 || s.n % s.captions_per_item != 0) {
    bad_spec("n must be a multiple of captions_per_item");
  }
  if (s.private_rank < 0 || s.private_rank > s.c - s.k_shared) {
    bad_spec("private_rank must lie in [0, c - k_shared]");
  }
  if (!(s.private_std >= 0.0)) bad_spec("private_std must be >= 0");
}

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

  double operator()() { return dist_(rng_); }

  RowMatrix matrix(Index rows, Index cols) {
    RowMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) m(r, c) = dist_(rng_);
    }
    return m;
  }

  Vector vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = dist_(rng_);
    return v;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
// signs of R's diagonal folded into Q.
Eigen::MatrixXd random_orthogonal(Gaussian& gauss, Index c) {
  const Eigen::MatrixXd g = gauss.matrix(c, c);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(c, c);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < c; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

// Isotropic noise restricted to the orthogonal complement of `head`.
RowMatrix complement_noise(Gaussian& gauss, Index rows, const Eigen::MatrixXd& head, double std) {
  RowMatrix g = gauss.matrix(rows, head.rows());
  if (std == 0.0) return RowMatrix::Zero(rows, head.rows());
  const RowMatrix along = (g * head) * head.transpose();
  return std * (g - along);
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
  validate(spec);
  const Index c = spec.c;
  const Index k = spec.k_shared;
  const Index items = spec.n / spec.captions_per_item;
  Gaussian gauss(spec.seed);

  SyntheticTruth truth;
  truth.text_dirs = random_orthogonal(gauss, c);
  truth.audio_dirs = truth.text_dirs;
  if (spec.uv_misalignment != 0.0) {
    const double cs = std::cos(spec.uv_misalignment);
    const double sn = std::sin(spec.uv_misalignment);
    for (Index j = 0; j < k; ++j) {
      const Vector u = truth.text_dirs.col(j);
      const Vector w = truth.text_dirs.col(k + j);
      truth.audio_dirs.col(j) = cs * u + sn * w;
      truth.audio_dirs.col(k + j) = -sn * u + cs * w;
    }
  }

  Vector dir_t = gauss.vector(c);
  dir_t.normalize();
  Vector dir_gap = gauss.vector(c);
  dir_gap -= dir_gap.dot(dir_t) * dir_t;
  dir_gap.normalize();
  truth.text_mean = spec.text_mean_norm * dir_t;
  truth.audio_mean = truth.text_mean + spec.mean_gap_norm * dir_gap;

  truth.shared_cov = Eigen::Map<const Vector>(spec.shared_cov.data(), k);
  truth.expected_sigma = static_cast<double>(spec.n) * truth.shared_cov;
  truth.latents = gauss.matrix(items, k) * truth.shared_cov.cwiseSqrt().asDiagonal();

  const Eigen::MatrixXd u_head = truth.text_dirs.leftCols(k);
  const Eigen::MatrixXd v_head = truth.audio_dirs.leftCols(k);
  const Index r = spec.private_rank;

  RowMatrix text = complement_noise(gauss, spec.n, u_head, spec.tail_energy_text);
  if (r > 0) {
    text += spec.private_std * gauss.matrix(spec.n, r) * truth.text_dirs.middleCols(k, r).transpose();
  }
  RowMatrix audio_items = complement_noise(gauss, items, v_head, spec.tail_energy_audio);
  if (r > 0) {
    audio_items +=
        spec.private_std * gauss.matrix(items, r) * truth.audio_dirs.middleCols(k, r).transpose();
  }
  audio_items += truth.latents * v_head.transpose();
  audio_items.rowwise() += truth.audio_mean.transpose();

  std::vector<int> groups(static_cast<std::size_t>(spec.n));
  const RowMatrix text_signal = truth.latents * u_head.transpose();
  for (Index i = 0; i < spec.n; ++i) {
    const Index item = i / spec.captions_per_item;
    groups[static_cast<std::size_t>(i)] = static_cast<int>(item);
    text.row(i) += text_signal.row(item) + truth.text_mean.transpose();
  }

  PairedDataset data = make_paired(EmbeddingMatrix{std::move(text), Modality::Text},
                                   EmbeddingMatrix{std::move(audio_items), Modality::Audio},
                                   std::move(groups));
  return SyntheticData{std::move(data), std::move(truth)};
}

SyntheticSpec preset(const std::string& name, std::uint64_t seed) {
  auto geometric = [](Index k, double first, double ratio) {
    std::vector<double> v(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) v[static_cast<std::size_t>(j)] = first * std::pow(ratio, j);
    return v;
  };
  SyntheticSpec s;
  s.seed = seed;
  if (name == "aligned") {
    s.n = 2000;
    s.c = 64;
    s.k_shared = 8;
    s.shared_cov = geometric(8, 0.05, 0.8);
    s.tail_energy_text = 0.02;
    s.tail_energy_audio = 0.02;
    s.mean_gap_norm = 0.3;
  } else if (name == "noisy-tail") {
    s.n = 5000;
    s.c = 128;
    s.k_shared = 16;
    s.shared_cov = geometric(16, 0.05, 0.9);
    s.tail_energy_text = 0.035;
    s.tail_energy_audio = 0.035;
    s.mean_gap_norm = 0.3;
  } else if (name == "misaligned") {
    s.n = 4000;
    s.c = 128;
    s.k_shared = 16;
    s.captions_per_item = 5;
    s.shared_cov = geometric(16, 0.02, 0.97);
    s.tail_energy_text = 0.02;
    s.tail_energy_audio = 0.02;
    s.mean_gap_norm = 0.488;
    s.uv_misalignment = 0.6;
    s.private_rank = 20;
    s.private_std = 0.17;
  } else if (name == "clotho-like") {
    s.n = 19195;
    s.c = 1024;
    s.k_shared = 100;
    s.captions_per_item = 5;
    s.shared_cov = geometric(100, 0.02, 0.97);
    s.tail_energy_text = 0.012;
    s.tail_energy_audio = 0.011;
    s.mean_gap_norm = 0.488;
    s.uv_misalignment = 0.3;
  } else {
    bad_spec("unknown preset '" + name + "'");
  }
  return s;
}

std::vector<std::string> preset_names() {
  return {"aligned", "noisy-tail", "misaligned", "clotho-like"};
}

std::pair<PairedDataset, PairedDataset> split_dataset(const PairedDataset& data,
                                                      Index first_rows) {
  Index cut = std::clamp<Index>(first_rows, 0, data.size());
  while (cut > 0 && cut < data.size() &&
         data.groups[static_cast<std::size_t>(cut)] == data.groups[static_cast<std::size_t>(cut - 1)]) {
    ++cut;
  }
  if (cut <= 0 || cut >= data.size()) {
    throw Error(ErrorCode::PairingError, "split leaves an empty side");
  }
  auto part = [&](Index lo, Index len) {
    PairedDataset p;
    p.text = EmbeddingMatrix{data.text.data.middleRows(lo, len), Modality::Text};
    p.audio = EmbeddingMatrix{data.audio.data.middleRows(lo, len), Modality::Audio};
    p.groups.assign(data.groups.begin() + lo, data.groups.begin() + lo + len);
    if (data.texts) {
      p.texts = std::vector<std::string>(data.texts->begin() + lo, data.texts->begin() + lo + len);
    }
    p.name = data.name;
    return p;
  };
  return {part(0, cut), part(cut, data.size() - cut)};
}

}  // namespace comet
