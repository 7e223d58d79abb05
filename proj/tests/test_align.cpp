#include <doctest.h>

#include <filesystem>

#include "samgpt/align.hpp"
#include "samgpt/error.hpp"
#include "support.hpp"

using namespace samgpt;
using testing::random_matrix;

TEST_CASE("fit_dal: diagonal example") {
  Matrix x(2, 2);
  x << 3, 0, 0, 2;
  auto r = fit_dal(x, 1);
  CHECK(r.rank == 2);
  CHECK(r.kept == 1);
  CHECK(r.features.rows() == 2);
  CHECK(r.features.cols() == 1);
  CHECK(r.features(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs(r.features(1, 0)) < 1e-14);
}

TEST_CASE("fit_dal: Gram preservation and zero padding") {
  Rng rng(1);
  Matrix x = random_matrix(rng, 7, 4);
  auto r = fit_dal(x, 6);
  CHECK(r.kept == 4);
  CHECK(r.features.cols() == 6);
  CHECK(r.features.rightCols(2).isZero(0.0));
  Matrix gram = x * x.transpose();
  CHECK((r.features * r.features.transpose() - gram).cwiseAbs().maxCoeff() < 1e-8);

  // rank-deficient input: two identical columns
  Matrix y(5, 3);
  y.col(0) = random_matrix(rng, 5, 1);
  y.col(1) = y.col(0);
  y.col(2) = random_matrix(rng, 5, 1);
  auto ry = fit_dal(y, 3);
  CHECK(ry.rank == 2);
  CHECK(ry.features.col(2).isZero(0.0));

  CHECK_THROWS_AS(fit_dal(Matrix(0, 3), 2), ShapeError);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(fit_dal(bad, 1), NumericError);
}

TEST_CASE("fit_dal: matches an independent eigensolver oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = random_matrix(rng, 6, 4);
    auto r = fit_dal(x, 2);
    std::vector<std::vector<double>> gram(6, std::vector<double>(6, 0.0));
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 4; ++k) gram[i][j] += x(i, k) * x(j, k);
    auto [values, vectors] = testing::jacobi_eigen(gram);
    for (int k = 0; k < 2; ++k) {
      // column k = sqrt(λ_k) u_k, signed so the largest-magnitude entry is >= 0
      std::vector<double> u = vectors[static_cast<std::size_t>(k)];
      std::size_t arg = 0;
      for (std::size_t i = 1; i < u.size(); ++i)
        if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
      const double sign = u[arg] < 0 ? -1.0 : 1.0;
      for (int i = 0; i < 6; ++i)
        CHECK(std::abs(r.features(i, k) - sign * std::sqrt(values[static_cast<std::size_t>(k)]) * u[i]) < 1e-8);
    }
    CHECK(std::abs(r.features.col(0).dot(r.features.col(1))) < 1e-8);
  }
}

TEST_CASE("fit_dal: float instantiation agrees") {
  Rng rng(3);
  Matrix x = random_matrix(rng, 8, 5);
  auto d = fit_dal(x, 3);
  auto f = fit_dal(Eigen::MatrixXf(x.cast<float>()), 3);
  CHECK((f.features.cast<double>() - d.features).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("DimAligner caches per dataset and width") {
  Rng rng(4);
  Matrix x = random_matrix(rng, 10, 6);
  auto dir = std::filesystem::temp_directory_path() / "samgpt_dal_cache";
  std::filesystem::remove_all(dir);
  DimAligner a(4);
  Matrix first = a.align_cached("d", x, dir);
  CHECK(a.ranks().at("d") == 6);
  CHECK(std::filesystem::exists(dir / dal_cache_key(x, 4) / "manifest.json"));
  DimAligner b(4);
  CHECK(b.align_cached("d", x, dir) == first);
  CHECK(b.ranks().at("d") == 6);
  CHECK(dal_cache_key(x, 4) != dal_cache_key(x, 5));
  CHECK(first == a.align("d", x));
}

TEST_CASE("apply_fal") {
  Rng rng(5);
  Matrix x = random_matrix(rng, 4, 3);
  auto tokens = FeatureTokens::ones(2, 3, true);
  Tape t;
  CHECK(apply_fal(t.constant(x), 0, tokens).value() == x);
  tokens.tokens[1].value() << 2, 0, 0;
  Matrix y = apply_fal(t.constant(x), 1, tokens).value();
  CHECK(y.col(0) == 2.0 * x.col(0));
  CHECK(y.rightCols(2).isZero(0.0));
  CHECK_THROWS_AS(apply_fal(t.constant(x), 2, tokens), ShapeError);
  CHECK_THROWS_AS(apply_fal(t.constant(Matrix::Ones(2, 4)), 0, tokens), ShapeError);

  tokens.tokens[1].value() = random_matrix(rng, 1, 3);
  Matrix w = random_matrix(rng, 3, 2);
  auto loss = [&](Tape& tp) {
    return sum(normalize_rows(matmul(apply_fal(tp.constant(x), 1, tokens), tp.constant(w))));
  };
  {
    Tape tp;
    tp.backward(loss(tp));
  }
  CHECK(tokens.tokens[0].grad().isZero(0.0));
  CHECK(testing::fd_max_rel_error(tokens.tokens[1].value(), tokens.tokens[1].grad(), [&] {
          Tape tp;
          return loss(tp).value()(0, 0);
        }) < 1e-5);
}

TEST_CASE("apply_fad") {
  Rng rng(6);
  Matrix x = random_matrix(rng, 5, 3);
  FeatureTokens tokens;
  for (int i = 0; i < 3; ++i) tokens.tokens.emplace_back(random_matrix(rng, 1, 3, 0.5, 1.5), true);
  const Matrix stack = tokens.stacked();
  auto fad = FeatureAdapter::init(3, 3);
  CHECK(fad.mixture.value() == Matrix::Constant(1, 3, 1.0 / 3.0));
  CHECK(fad.offset.value().isZero(0.0));

  Tape t;
  fad.mixture.value() << 0, 1, 0;
  CHECK(apply_fad(t.constant(x), fad, stack).value() == apply_fal(t.constant(x), 1, tokens).value());
  fad.mixture.value().setZero();
  fad.offset.value().setOnes();
  CHECK(apply_fad(t.constant(x), fad, stack).value() == x);
  FeatureAdapter wrong = FeatureAdapter::init(2, 3);
  CHECK_THROWS_AS(apply_fad(t.constant(x), wrong, stack), ShapeError);

  fad.mixture.value() = random_matrix(rng, 1, 3);
  fad.offset.value() = random_matrix(rng, 1, 3);
  Matrix w = random_matrix(rng, 3, 2);
  auto loss = [&](Tape& tp) {
    return sum(normalize_rows(matmul(apply_fad(tp.constant(x), fad, tokens.stacked()), tp.constant(w))));
  };
  {
    Tape tp;
    tp.backward(loss(tp));
  }
  for (auto& tok : tokens.tokens) CHECK(tok.grad().isZero(0.0));
  auto f = [&] {
    Tape tp;
    return loss(tp).value()(0, 0);
  };
  CHECK(testing::fd_max_rel_error(fad.mixture.value(), fad.mixture.grad(), f) < 1e-5);
  CHECK(testing::fd_max_rel_error(fad.offset.value(), fad.offset.grad(), f) < 1e-5);
}
