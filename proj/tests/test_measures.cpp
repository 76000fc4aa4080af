#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "ifyot/measures.h"

using ifyot::DiscreteMeasure;
using ifyot::GaussianSpec;
using ifyot::Index;
using ifyot::Matrix;
using ifyot::Vector;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("measure invariants are enforced") {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  Vector w(2);
  w << 0.5, 0.5;
  DiscreteMeasure ok(pts, w, 1.0);
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.size() == 2);
  CHECK(ok.dim() == 1);

  Vector bad = w;
  bad[0] = -0.1;
  DiscreteMeasure neg(pts, bad, 0.9);
  CHECK_THROWS_AS(neg.validate(), ifyot::InvalidInput);

  Vector three(3);
  three << 0.2, 0.3, 0.5;
  DiscreteMeasure mismatch(pts, three, 1.0);
  CHECK_THROWS_AS(mismatch.validate(), ifyot::InvalidInput);
}

TEST_CASE("empirical measures spread the mass uniformly") {
  Matrix samples(4, 2);
  samples << 0, 0, 1, 0, 0, 1, 1, 1;
  DiscreteMeasure m = ifyot::empirical_from_samples(samples, 2.0);
  CHECK(m.size() == 4);
  CHECK(m.mass == doctest::Approx(2.0));
  for (Index i = 0; i < 4; ++i) CHECK(m.weights[i] == doctest::Approx(0.5));
  CHECK(m.points == samples);
}

TEST_CASE("gaussian sampling is deterministic and matches its moments") {
  GaussianSpec spec;
  spec.mean = Vector(2);
  spec.mean << 1.0, -2.0;
  spec.covariance = Matrix(2, 2);
  spec.covariance << 2.0, 0.6, 0.6, 1.0;

  Matrix a = ifyot::sample_gaussian(spec, 500, 11);
  Matrix b = ifyot::sample_gaussian(spec, 500, 11);
  CHECK(a == b);

  const Index n = 200000;
  Matrix big = ifyot::sample_gaussian(spec, n, 5);
  Vector mean = big.colwise().mean().transpose();
  Matrix centered = big.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  CHECK((mean - spec.mean).norm() < 0.02);
  CHECK((cov - spec.covariance).norm() < 0.05);
}

TEST_CASE("rank-deficient covariances sample on the degenerate subspace") {
  GaussianSpec spec;
  spec.mean = Vector::Zero(2);
  spec.covariance = Matrix(2, 2);
  spec.covariance << 1.0, 1.0, 1.0, 1.0;  // rank one, direction (1,1)
  Matrix s = ifyot::sample_gaussian(spec, 200, 3);
  for (Index i = 0; i < s.rows(); ++i)
    CHECK(std::abs(s(i, 0) - s(i, 1)) < 1e-12);
}

TEST_CASE("coupled samples validate their shapes") {
  ifyot::CoupledSample cs;
  cs.x = Matrix::Zero(3, 2);
  cs.y = Matrix::Zero(3, 1);
  cs.mass = 1.0;
  CHECK_NOTHROW(cs.validate());
  cs.y = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(cs.validate(), ifyot::InvalidInput);
}

TEST_CASE("csv round trip preserves points and weights exactly") {
  Matrix pts(3, 2);
  pts << 0.1, -2.5, 1e-7, 3.25, 1.0 / 3.0, -0.0;
  Vector w(3);
  w << 0.25, 0.5, 0.125;
  DiscreteMeasure m(pts, w, 0.875);
  std::string path = temp_path("ifyot_measure_roundtrip.csv");
  ifyot::save_measure_csv(m, path);
  DiscreteMeasure back = ifyot::load_measure_csv(path, 0.875);
  std::remove(path.c_str());
  REQUIRE(back.size() == m.size());
  REQUIRE(back.dim() == m.dim());
  CHECK((back.points - m.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.weights - m.weights).cwiseAbs().maxCoeff() == 0.0);
}
