#include "comet/diagnostics.hpp"
#include "comet/synthetic.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <functional>

using namespace comet;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

std::vector<int> singletons(Index n) {
  std::vector<int> g(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<int>(i);
  return g;
}

PairedDataset self_paired(const RowMatrix& t) {
  return make_paired({t, Modality::Text}, {t, Modality::Audio}, singletons(t.rows()));
}

// U = I, V = cyclic shift: no column of V matches its partner.
DissectionModel permuted_model(Index c) {
  DissectionModel m;
  m.text_mean = Vector::Zero(c);
  m.audio_mean = Vector::Zero(c);
  m.text_dirs = Eigen::MatrixXd::Identity(c, c);
  m.audio_dirs = Eigen::MatrixXd::Zero(c, c);
  for (Index j = 0; j < c; ++j) m.audio_dirs((j + 1) % c, j) = 1.0;
  m.sigma = Vector::LinSpaced(c, double(c), 1.0);
  m.n_train = 10;
  return m;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("spectrum of self-paired rank-2 data has two nonzero values") {
  const RowMatrix basis = oracle::gaussian(2, 6, 201);
  const RowMatrix t = oracle::gaussian(40, 2, 202) * basis;
  const Vector s = spectrum(fit(self_paired(t)));
  CHECK(s(1) > 1e-6 * s(0));
  for (Index j = 2; j < 6; ++j) CHECK(s(j) <= 1e-10 * s(0));
}

TEST_CASE("planted spectrum is recovered at large n") {
  SyntheticSpec spec;
  spec.n = 20000;
  spec.c = 6;
  spec.k_shared = 3;
  spec.shared_cov = {10.0, 5.0, 1.0};
  spec.seed = 3;
  const SyntheticData syn = generate(spec);
  const Vector s = spectrum(fit(syn.dataset));
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::abs(s(j) - syn.truth.expected_sigma(j)) <= 0.05 * syn.truth.expected_sigma(j));
  }
  for (Index j = 3; j < 6; ++j) CHECK(s(j) <= 1e-8 * s(0));
}

TEST_CASE("uv alignments") {
  const DissectionModel self = fit(self_paired(oracle::gaussian(60, 5, 211)));
  CHECK(max_abs(uv_alignments(self) - Vector::Ones(5)) <= 1e-12);
  CHECK(uv_alignments(permuted_model(4)).isZero());

  const DissectionModel m = fit(fixture::random_pairs(70, 7, 212));
  const Vector uv = uv_alignments(m);
  for (Index j = 0; j < 7; ++j) {
    double dot = 0.0;
    for (Index r = 0; r < 7; ++r) dot += m.text_dirs(r, j) * m.audio_dirs(r, j);
    CHECK(std::abs(uv(j) - dot) <= 1e-12);
  }
}

TEST_CASE("uv matrix") {
  const DissectionModel self = fit(self_paired(oracle::gaussian(60, 5, 221)));
  CHECK(max_abs(uv_matrix(self) - Eigen::MatrixXd::Identity(5, 5)) <= 1e-10);
  const DissectionModel m = fit(fixture::random_pairs(70, 6, 222));
  const Eigen::MatrixXd uv = uv_matrix(m);
  CHECK(max_abs(uv) <= 1.0 + 1e-12);
  for (Index r = 0; r < 6; ++r) CHECK(uv.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::MatrixXd abs_uv = uv_matrix(m, true);
  CHECK(abs_uv == uv.cwiseAbs());
  CHECK(abs_uv.minCoeff() >= 0.0);
}

TEST_CASE("covariance decomposition satisfies the correlation identity") {
  const PairedDataset d = fixture::random_pairs(200, 8, 231);
  const DissectionModel m = fit(d);
  const CovarianceDecomposition cd = covariance_decomposition(m, d);
  CHECK(cd.matches_model);
  for (Index j = 0; j < 8; ++j) {
    REQUIRE_FALSE(cd.degenerate[static_cast<std::size_t>(j)]);
    const double lhs = cd.corr(j) * cd.text_std(j) * cd.audio_std(j);
    CHECK(std::abs(lhs - m.sigma(j) / 200.0) <= 1e-10);
    CHECK(cd.sqrt_cov(j) == doctest::Approx(std::sqrt(m.sigma(j) / 200.0)).epsilon(1e-14));
    CHECK(std::abs(cd.corr(j)) <= 1.0);
  }
  // Any other paired set is flagged.
  CHECK_FALSE(covariance_decomposition(m, fixture::random_pairs(200, 8, 232)).matches_model);
  CHECK(code_of([&] { covariance_decomposition(m, fixture::random_pairs(20, 5, 1)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("self-paired fit has unit correlation") {
  const RowMatrix t = oracle::gaussian(100, 5, 241);
  const PairedDataset d = self_paired(t);
  const CovarianceDecomposition cd = covariance_decomposition(fit(d), d);
  for (Index j = 0; j < 5; ++j) CHECK(cd.corr(j) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero audio variance marks the direction degenerate") {
  RowMatrix t = oracle::gaussian(50, 3, 251);
  RowMatrix a = t;
  a.col(2).setConstant(0.7);
  const PairedDataset d = make_paired({t, Modality::Text}, {a, Modality::Audio}, singletons(50));
  const CovarianceDecomposition cd = covariance_decomposition(fit(d), d);
  CHECK(cd.degenerate[2]);
  CHECK(cd.corr(2) == 0.0);
  CHECK_FALSE(cd.degenerate[0]);
}

TEST_CASE("subspace norms partition the full norm") {
  const PairedDataset d = fixture::random_pairs(60, 10, 261);
  const DissectionModel m = fit(d);
  const RowMatrix unit_centered = l2_normalize(centered(d.text.data, m.text_mean));
  const Coefficients t{unit_centered * m.text_dirs, Modality::Text, 0, false};
  const Coefficients a = project(m, d.audio);
  const auto norms = subspace_norms(t, a, {{0, 4}, {4, 10}, {0, 10}});
  REQUIRE(norms.size() == 3);
  CHECK(norms[2].mean_norm_text <= 1.0 + 1e-12);
  for (Index i = 0; i < 60; ++i) {
    const double head = t.values.row(i).head(4).squaredNorm();
    const double rest = t.values.row(i).tail(6).squaredNorm();
    CHECK(std::abs(head + rest - t.values.row(i).squaredNorm()) <= 1e-10);
  }
  CHECK(norms[0].range.end == 4);
  CHECK(norms[1].mean_norm_audio == doctest::Approx(a.values.rightCols(6).rowwise().norm().mean()));

  const Coefficients tl = tail(a, 4);
  CHECK(mean_subspace_norm(tl, {4, 10}) == doctest::Approx(norms[1].mean_norm_audio).epsilon(1e-14));
  CHECK(code_of([&] { mean_subspace_norm(tl, {0, 10}); }) == ErrorCode::BadK);
  CHECK(code_of([&] { mean_subspace_norm(a, {3, 11}); }) == ErrorCode::BadK);
}

TEST_CASE("similarity dissection on basis directions") {
  const DissectionModel m = fit(fixture::random_pairs(80, 6, 271));
  const Vector t = m.text_mean + m.text_dirs.col(1);
  const Vector a1 = m.audio_mean + m.audio_dirs.col(1);
  const Vector a2 = m.audio_mean + m.audio_dirs.col(2);
  const SimilarityDissection s1 = similarity_dissection(m, t, a1);
  CHECK(s1.direct == doctest::Approx(m.text_dirs.col(1).dot(m.audio_dirs.col(1))).epsilon(1e-12));
  CHECK(std::abs(s1.cross) <= 1e-12);
  const SimilarityDissection s2 = similarity_dissection(m, t, a2);
  CHECK(std::abs(s2.direct) <= 1e-12);
  CHECK(s2.cross == doctest::Approx(m.text_dirs.col(1).dot(m.audio_dirs.col(2))).epsilon(1e-10));
  CHECK(code_of([&] { similarity_dissection(m, Vector::Zero(5), a1); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("direct plus cross equals the centered inner product") {
  const PairedDataset d = fixture::random_pairs(100, 9, 281);
  const DissectionModel m = fit(d);
  for (Index i = 0; i < 20; ++i) {
    const Vector t = d.text.data.row(i).transpose();
    const Vector a = d.audio.data.row((i * 7) % 100).transpose();
    const SimilarityDissection s = similarity_dissection(m, t, a);
    CHECK(std::abs(s.direct + s.cross - (t - m.text_mean).dot(a - m.audio_mean)) <= 1e-10);
    CHECK(std::abs(s.per_index_direct.sum() - s.direct) <= 1e-12);
  }
}

TEST_CASE("contribution report negatives match a brute-force pair loop") {
  // Three captions per item, so same-group pairs must be skipped.
  const RowMatrix t = oracle::gaussian(24, 5, 291);
  const RowMatrix items = oracle::gaussian(8, 5, 292);
  std::vector<int> groups;
  for (int g = 0; g < 8; ++g) groups.insert(groups.end(), 3, g);
  const PairedDataset d = make_paired({t, Modality::Text}, {items, Modality::Audio}, groups);
  const DissectionModel m = fit(d);
  const Index k = 2;
  const ContributionReport rep = contribution_report(m, d, k);

  double dn = 0, dkn = 0, cn = 0, dp = 0, dkp = 0, cp = 0;
  int count = 0;
  for (Index i = 0; i < 24; ++i) {
    for (Index j = 0; j < 24; ++j) {
      const SimilarityDissection s =
          similarity_dissection(m, d.text.data.row(i).transpose(), d.audio.data.row(j).transpose());
      const double dk = s.per_index_direct.head(k).sum();
      if (i == j) {
        dp += std::abs(s.direct);
        dkp += std::abs(dk);
        cp += std::abs(s.cross);
      }
      if (groups[static_cast<std::size_t>(i)] == groups[static_cast<std::size_t>(j)]) continue;
      dn += std::abs(s.direct);
      dkn += std::abs(dk);
      cn += std::abs(s.cross);
      ++count;
    }
  }
  CHECK(rep.negative_pairs == count);
  CHECK(count == 24 * 21);
  CHECK(rep.direct_neg == doctest::Approx(dn / count).epsilon(1e-10));
  CHECK(rep.direct_k_neg == doctest::Approx(dkn / count).epsilon(1e-10));
  CHECK(rep.cross_neg == doctest::Approx(cn / count).epsilon(1e-10));
  CHECK(rep.direct_pos == doctest::Approx(dp / 24).epsilon(1e-10));
  CHECK(rep.direct_k_pos == doctest::Approx(dkp / 24).epsilon(1e-10));
  CHECK(rep.cross_pos == doctest::Approx(cp / 24).epsilon(1e-10));
  CHECK(rep.negative_sampling == "exact:all-cross-group-ordered-pairs");
  CHECK(rep.k == 2);
}

TEST_CASE("contribution report: head of full width, sampling and errors") {
  const PairedDataset d = fixture::random_pairs(300, 6, 301);
  const DissectionModel m = fit(d);
  const ContributionReport full = contribution_report(m, d, 6);
  CHECK(full.direct_k_pos == full.direct_pos);
  CHECK(full.direct_k_neg == full.direct_neg);
  for (double v : {full.direct_pos, full.direct_k_pos, full.cross_pos, full.direct_neg, full.direct_k_neg,
                   full.cross_neg}) {
    CHECK(v >= 0.0);
  }

  NegativeSampling s;
  s.exact_limit = 0;
  s.sample_pairs = 40000;
  s.seed = 9;
  const ContributionReport a = contribution_report(m, d, 3, s);
  const ContributionReport b = contribution_report(m, d, 3, s);
  CHECK(a.negative_sampling == "sampled:40000:seed=9");
  CHECK(a.negative_pairs == 40000);
  CHECK(a.direct_neg == b.direct_neg);
  CHECK(a.cross_neg == b.cross_neg);
  const ContributionReport exact = contribution_report(m, d, 3);
  CHECK(a.direct_neg == doctest::Approx(exact.direct_neg).epsilon(0.03));
  CHECK(a.cross_neg == doctest::Approx(exact.cross_neg).epsilon(0.03));
  CHECK(a.direct_pos == exact.direct_pos);

  CHECK(code_of([&] { contribution_report(m, d, 0); }) == ErrorCode::BadK);
  CHECK(code_of([&] { contribution_report(m, d, 7); }) == ErrorCode::BadK);
}

TEST_CASE("aligned preset: positives dominate negatives and cross terms stay small") {
  const SyntheticData syn = generate(preset("aligned", 2));
  const DissectionModel m = fit(syn.dataset);
  const ContributionReport rep = contribution_report(m, syn.dataset, 8);
  CHECK(rep.direct_pos > 3.0 * rep.direct_neg);
  CHECK(rep.cross_pos < 0.1 * rep.direct_pos);
  CHECK(rep.cross_neg < 0.1 * rep.direct_pos);
}

TEST_CASE("net useful contribution") {
  const RowMatrix t = oracle::gaussian(50, 4, 311);
  const DissectionModel self = fit(self_paired(t));
  CHECK(max_abs(net_useful_contribution(self) - self.sigma) <= 1e-10 * self.sigma(0));

  const PairedDataset d = fixture::random_pairs(120, 7, 312);
  const DissectionModel m = fit(d);
  const Vector net = net_useful_contribution(m);
  const RowMatrix th = project(m, d.text).values;
  const RowMatrix ah = project(m, d.audio).values;
  for (Index j = 0; j < 7; ++j) {
    CHECK(net(j) <= m.sigma(j) + 1e-12);
    double sum = 0.0;
    for (Index i = 0; i < 120; ++i) sum += th(i, j) * ah(i, j);
    const double uv = m.text_dirs.col(j).dot(m.audio_dirs.col(j));
    CHECK(std::abs(net(j) - sum * uv) <= 1e-8 * m.sigma(0));
  }
  // Joint sign flips leave it unchanged.
  DissectionModel flipped = m;
  flipped.text_dirs.col(2) *= -1.0;
  flipped.audio_dirs.col(2) *= -1.0;
  CHECK(net_useful_contribution(flipped) == net);
}

TEST_CASE("top items by direction") {
  RowMatrix raw(5, 3);
  raw << 1, 0, 0,   //
      1, 0, 0,      // duplicate of row 0
      0, 1, 0,      //
      0, 0, 1,      //
      0.5, 0.5, 0;  //
  RowMatrix vals(5, 2);
  vals << 0.9, 0, 0.8, 0, 0.7, 0, 0.1, 0, 0.75, 0;
  const Coefficients c{vals, Modality::Text, 0, false};
  const std::vector<std::string> texts = {"a", "a again", "b", "c", "ab"};

  const auto top1 = top_items_by_direction(c, raw, texts, 0, 1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0].row == 0);
  CHECK(top1[0].text == "a");
  CHECK(top1[0].value == 0.9);

  const auto nodedup = top_items_by_direction(c, raw, texts, 0, 3, 1.0);
  CHECK(nodedup[1].row == 1);

  const auto dedup = top_items_by_direction(c, raw, texts, 0, 3, 0.99);
  REQUIRE(dedup.size() == 3);
  // Oracle: no two kept rows exceed the threshold, and row 1 was skipped.
  for (std::size_t x = 0; x < dedup.size(); ++x) {
    for (std::size_t y = x + 1; y < dedup.size(); ++y) {
      CHECK(oracle::naive_cosine(raw, dedup[x].row, raw, dedup[y].row) <= 0.99);
    }
  }
  CHECK(dedup[1].row == 4);
  CHECK(dedup[2].row == 2);

  CHECK(code_of([&] { top_items_by_direction(c, raw, {}, 0, 1); }) == ErrorCode::MissingTexts);
  CHECK(code_of([&] { top_items_by_direction(c, raw, texts, 2, 1); }) == ErrorCode::BadK);
}

TEST_CASE("coefficient covariance") {
  RowMatrix orth(3, 2);
  orth << 1, 0, 0, 2, 0, 0;
  const Eigen::MatrixXd g = coeff_covariance({orth, Modality::Text, 0, false});
  CHECK(g(0, 1) == 0.0);
  CHECK(g(1, 1) == 4.0);

  const RowMatrix x = oracle::gaussian(10, 4, 321);
  const Eigen::MatrixXd cov = coeff_covariance({x, Modality::Text, 0, false});
  for (Index p = 0; p < 4; ++p) {
    for (Index q = 0; q < 4; ++q) {
      double s = 0.0;
      for (Index i = 0; i < 10; ++i) s += x(i, p) * x(i, q);
      CHECK(std::abs(cov(p, q) - s) <= 1e-12);
    }
  }

  const PairedDataset d = fixture::random_pairs(90, 5, 322);
  const DissectionModel m = fit(d);
  const Eigen::MatrixXd tt = coeff_covariance(project(m, d.text));
  const CovarianceDecomposition cd = covariance_decomposition(m, d);
  for (Index j = 0; j < 5; ++j) {
    CHECK(tt(j, j) == doctest::Approx(90.0 * cd.text_std(j) * cd.text_std(j)).epsilon(1e-12));
  }
}

}  // TEST_SUITE
