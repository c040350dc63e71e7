#include "comet/mappers.hpp"
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

Vector unit(Vector v) { return v / v.norm(); }

}  // namespace

TEST_SUITE("gap_mitigation") {

TEST_CASE("memory bank rows are unit norm") {
  const MemoryBank bank(oracle::gaussian(30, 6, 401), "train.json");
  for (Index i = 0; i < bank.size(); ++i) CHECK(std::abs(bank.rows().row(i).norm() - 1.0) <= 1e-9);
  CHECK(bank.source() == "train.json");
  CHECK(code_of([] { MemoryBank(RowMatrix(0, 4)); }) == ErrorCode::EmptyBank);
  RowMatrix z = oracle::gaussian(3, 4, 402);
  z.row(1).setZero();
  CHECK(code_of([&] { MemoryBank{z}; }) == ErrorCode::DegenerateInput);
}

TEST_CASE("embedding shift") {
  const RowMatrix batch = oracle::gaussian(5, 4, 411);
  const Vector same = oracle::gaussian(4, 1, 412).col(0);
  CHECK(max_abs(embedding_shift(same, same, batch) - l2_normalize(batch)) <= 1e-15);

  const Vector t_mean = oracle::gaussian(4, 1, 413).col(0);
  const Vector a_mean = oracle::gaussian(4, 1, 414).col(0);
  RowMatrix at_mean(1, 4);
  at_mean.row(0) = a_mean.transpose();
  CHECK(max_abs(embedding_shift(t_mean, a_mean, at_mean).row(0).transpose() - unit(t_mean)) <= 1e-12);

  // Linearity: the raw shift moves the batch mean by exactly -(a_mean - t_mean).
  const RowMatrix raw = embedding_shift(t_mean, a_mean, batch, false);
  const Vector lhs = column_mean(raw) - t_mean;
  const Vector rhs = column_mean(batch) - a_mean;
  CHECK(max_abs(lhs - rhs) <= 1e-14);
  CHECK(code_of([&] { embedding_shift(t_mean, Vector::Zero(3), batch); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("noise injection") {
  const RowMatrix batch = oracle::gaussian(6, 5, 421);
  CHECK(noise_inject(batch, 0.0, 7) == l2_normalize(batch));
  CHECK(noise_inject(batch, kDefaultNoiseVariance, 7) == noise_inject(batch, kDefaultNoiseVariance, 7));
  CHECK(noise_inject(batch, kDefaultNoiseVariance, 7) != noise_inject(batch, kDefaultNoiseVariance, 8));
  const RowMatrix out = noise_inject(batch, 0.5, 3);
  for (Index r = 0; r < out.rows(); ++r) CHECK(out.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(code_of([&] { noise_inject(batch, -0.1, 1); }) == ErrorCode::BadSpec);

  // 10^6 draws: empirical variance within 1% of the target.
  const RowMatrix eps = sample_noise(1000, 1000, kDefaultNoiseVariance, 99);
  const double mean = eps.mean();
  const double var = (eps.array() - mean).square().sum() / static_cast<double>(eps.size());
  CHECK(std::abs(var - kDefaultNoiseVariance) <= 0.01 * kDefaultNoiseVariance);
  CHECK(std::abs(mean) <= 5.0 * std::sqrt(kDefaultNoiseVariance / 1e6));
}

TEST_CASE("nearest-neighbor decoding") {
  const RowMatrix raw = oracle::gaussian(50, 8, 431);
  const MemoryBank bank(raw);
  const NearestNeighbor hit = nnd(bank, bank.rows().row(7).transpose());
  CHECK(hit.index == 7);
  CHECK(hit.row == Vector(bank.rows().row(7).transpose()));

  RowMatrix twin = raw;
  twin.row(12) = twin.row(30);
  const MemoryBank tb(twin);
  CHECK(nnd(tb, tb.rows().row(30).transpose()).index == 12);

  // Brute-force argmax oracle over seeded queries.
  const RowMatrix q = l2_normalize(oracle::gaussian(20, 8, 432));
  std::vector<Index> picked;
  const RowMatrix mapped = map_nnd(bank, q, &picked);
  for (Index i = 0; i < 20; ++i) {
    Index best = 0;
    double best_cos = -2.0;
    for (Index j = 0; j < 50; ++j) {
      const double c = oracle::naive_cosine(q, i, raw, j);
      if (c > best_cos) {
        best_cos = c;
        best = j;
      }
    }
    CHECK(picked[static_cast<std::size_t>(i)] == best);
    CHECK(nnd(bank, q.row(i).transpose()).index == best);
    CHECK(mapped.row(i) == bank.rows().row(best));
  }
  CHECK(code_of([&] { nnd(bank, Vector::Ones(3)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("projection decoding matches a naive softmax sum") {
  const MemoryBank bank(oracle::gaussian(20, 6, 441));
  const RowMatrix q = l2_normalize(oracle::gaussian(5, 6, 442));
  const RowMatrix batch = map_pd(bank, q, kDefaultTau);
  for (Index i = 0; i < 5; ++i) {
    const std::vector<double> qi(q.row(i).data(), q.row(i).data() + 6);
    const std::vector<double> ref = oracle::naive_pd(bank.rows(), qi, kDefaultTau);
    const Vector single = projection_decode(bank, q.row(i).transpose());
    for (Index c = 0; c < 6; ++c) {
      CHECK(std::abs(single(c) - ref[static_cast<std::size_t>(c)]) <= 1e-10);
      CHECK(std::abs(batch(i, c) - ref[static_cast<std::size_t>(c)]) <= 1e-10);
    }
  }
}

TEST_CASE("temperature limits") {
  const MemoryBank bank(oracle::gaussian(25, 5, 451));
  const Vector q = unit(oracle::gaussian(5, 1, 452).col(0));
  CHECK((projection_decode(bank, q, 1e-9) - nnd(bank, q).row).norm() <= 1e-6);
  const Vector mean_dir = unit(column_mean(bank.rows()));
  CHECK((projection_decode(bank, q, 1e9) - mean_dir).norm() <= 1e-6);
  CHECK(code_of([&] { projection_decode(bank, q, 0.0); }) == ErrorCode::BadTau);
  CHECK(code_of([&] { projection_decode(bank, q, -1.0); }) == ErrorCode::BadTau);
  CHECK(code_of([&] { map_pd(bank, RowMatrix::Ones(2, 5), std::nan("")); }) == ErrorCode::BadTau);
}

TEST_CASE("PD output lies in the convex hull of the bank") {
  const MemoryBank bank(oracle::gaussian(12, 4, 461));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector q = unit(oracle::gaussian(4, 1, 470 + s).col(0));
    const Vector w = softmax_weights(bank, q, 0.3);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const Vector combo = bank.rows().transpose() * w;
    CHECK((unit(combo) - projection_decode(bank, q, 0.3)).norm() <= 1e-12);
  }
}

TEST_CASE("linear PD: direct and factored agree") {
  // Single row orthogonal to the query.
  DissectionModel m = fit(fixture::random_pairs(60, 4, 481));
  RowMatrix x(1, 4);
  x << 1, 0, 0, 0;
  Vector a(4);
  a << 0, 2, -1, 0.5;
  const LinearPd zero = linear_pd(m, x, a);
  CHECK(zero.direct.isZero());
  CHECK(zero.factored.norm() <= 1e-12);

  // Orthonormal rows spanning the space: X^T X = I.
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::gaussian(4, 4, 482)).householderQ();
  const LinearPd id = linear_pd(m, RowMatrix(q.transpose()), a);
  CHECK(max_abs(id.direct - a) <= 1e-12);
  CHECK(max_abs(id.factored - a) <= 1e-12);

  // Seeded 30x8 bank against a model fitted elsewhere.
  const DissectionModel m8 = fit(fixture::random_pairs(100, 8, 483));
  const RowMatrix bank = oracle::gaussian(30, 8, 484);
  const Vector query = oracle::gaussian(8, 1, 485).col(0);
  const LinearPd lp = linear_pd(m8, bank, query);
  CHECK(max_abs(lp.direct - lp.factored) <= 1e-8);
  CHECK(max_abs(lp.direct - lp.factored) <= 1e-8 * bank.squaredNorm() * query.norm());

  const RowMatrix queries = oracle::gaussian(6, 8, 486);
  const LinearPdBatch batch = linear_pd_batch(m8, bank, queries);
  for (Index i = 0; i < 6; ++i) {
    const LinearPd one = linear_pd(m8, bank, queries.row(i).transpose());
    CHECK(max_abs(batch.direct.row(i).transpose() - one.direct) <= 1e-10);
    CHECK(max_abs(batch.factored.row(i).transpose() - one.factored) <= 1e-10);
  }
  CHECK(code_of([&] { linear_pd(m8, bank, Vector::Ones(7)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("pd_characterize on an identical-row bank is degenerate") {
  const SyntheticData syn = generate(preset("aligned", 4));
  const DissectionModel m = fit(syn.dataset);
  RowMatrix same(10, 64);
  same.rowwise() = syn.dataset.text.data.row(0);
  const MemoryBank bank(same);
  const PdCharacterization pc = pd_characterize(m, syn.dataset, bank, kDefaultTau, 8);
  const Vector row = unit(syn.dataset.text.data.row(0).transpose());
  CHECK(pc.cos_mean_after == doctest::Approx(row.dot(unit(m.text_mean))).epsilon(1e-10));
  CHECK(pc.degenerate);
}

TEST_CASE("pd_characterize on the aligned preset moves the mean toward text") {
  const SyntheticData train = generate(preset("aligned", 5));
  const auto [fit_part, eval_part] = split_dataset(train.dataset, 1600);
  const DissectionModel m = fit(fit_part);
  const MemoryBank bank(fit_part.text.data);
  const PdCharacterization pc = pd_characterize(m, eval_part, bank, kDefaultTau, 8);
  CHECK(pc.cos_mean_after > pc.cos_mean_before);
  CHECK(pc.dist_mean_after < pc.dist_mean_before);
  CHECK_FALSE(pc.degenerate);
  CHECK(pc.n_queries == 400);
  for (double c : {pc.cos_mean_before, pc.cos_mean_after, pc.head_cos_mean, pc.tail_cos_mean,
                   pc.head_cos_mean_nnd, pc.audio_mean_cos_train_eval}) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
  CHECK(pc.dist_mean_after >= 0.0);
  CHECK(pc.audio_mean_dist_train_eval >= 0.0);
  // PD keeps the head and discards the tail.
  CHECK(pc.head_cos_mean > 0.5);
  CHECK(std::abs(pc.tail_cos_mean) < 0.2);
  CHECK(code_of([&] { pd_characterize(m, eval_part, bank, kDefaultTau, 64); }) == ErrorCode::BadK);
}

TEST_CASE("softmax support") {
  const MemoryBank bank(oracle::gaussian(40, 6, 491));
  const Vector q = unit(oracle::gaussian(6, 1, 492).col(0));
  CHECK(softmax_support(bank, q, 1e-9, 0.99) == 1);

  RowMatrix same(40, 6);
  same.rowwise() = oracle::gaussian(1, 6, 493).row(0);
  const MemoryBank uniform(same);
  for (double mass : {0.1, 0.5, 0.99}) {
    CHECK(softmax_support(uniform, q, 0.01, mass) == static_cast<Index>(std::ceil(mass * 40.0)));
  }

  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector qs = unit(oracle::gaussian(6, 1, 500 + s).col(0));
    CHECK(softmax_support(bank, qs, 0.01, 0.99) < softmax_support(bank, qs, 1.0, 0.99));
  }
  CHECK(code_of([&] { softmax_support(bank, q, 0.01, 1.0); }) == ErrorCode::BadMass);
  CHECK(code_of([&] { softmax_support(bank, q, 0.01, 0.0); }) == ErrorCode::BadMass);
}

}  // TEST_SUITE
