#include <cmath>
#include <vector>

#include "doctest.h"
#include "ifyot/certificates.h"
#include "ifyot/gaussian_oracle.h"
#include "ifyot/rng.h"
#include "oracles.h"

using ifyot::Certificate;
using ifyot::CostBasis;
using ifyot::DiscreteMeasure;
using ifyot::FyIuotLoss;
using ifyot::Index;
using ifyot::Matrix;
using ifyot::ModelTangent;
using ifyot::PhiDivergence;
using ifyot::Rng;
using ifyot::Vector;

namespace {

Matrix random_spd(Rng& rng, Index n, double ridge) {
  Matrix b(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) b(i, j) = rng.normal();
  return b * b.transpose() + ridge * Matrix::Identity(n, n);
}

struct Grids {
  DiscreteMeasure alpha;
  DiscreteMeasure beta;
  CostBasis basis;
};

Grids make_grids(Rng& rng, Index n, Index m) {
  Matrix pa(n, 1), pb(m, 1);
  Vector wa(n), wb(m);
  for (Index i = 0; i < n; ++i) {
    pa(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    wa[i] = 0.3 + rng.uniform01();
  }
  for (Index j = 0; j < m; ++j) {
    pb(j, 0) = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
    wb[j] = 0.3 + rng.uniform01();
  }
  wa /= wa.sum();
  wb /= wb.sum();
  CostBasis basis = CostBasis::generic(
      ifyot::make_squared_distance_feature(),
      {ifyot::make_coordinate_product_feature(0, 0),
       ifyot::Feature{"x2y",
                      [](const Vector& x, const Vector& y) {
                        return x[0] * x[0] * y[0];
                      },
                      nullptr, nullptr}});
  return Grids{DiscreteMeasure(pa, wa, 1.0), DiscreteMeasure(pb, wb, 1.0),
               basis};
}

Matrix optimal_density(const Grids& g, const Vector& theta, double eta,
                       const PhiDivergence& d1, const PhiDivergence& d2) {
  ifyot::BasisMatrices mats = ifyot::evaluate(g.basis, g.alpha, g.beta);
  ifyot::UotProblem prob{g.alpha, g.beta, mats.cost(theta), eta, d1, d2};
  ifyot::SinkhornOptions opts;
  opts.tol = 1e-13;
  opts.max_iter = 300000;
  ifyot::SinkhornResult res = ifyot::solve_sinkhorn(prob, opts);
  REQUIRE(res.status == ifyot::SinkhornStatus::Converged);
  return ifyot::primal_from_dual(prob, res.potentials).density;
}

}  // namespace

TEST_CASE("l1 tangent reads support and signs and projects idempotently") {
  Vector theta(5);
  theta << 1.5, 0.0, -2.0, 1e-7, 0.0;
  ModelTangent t = ModelTangent::l1(theta);
  CHECK(t.kind() == ifyot::TangentKind::L1);
  CHECK(t.support() == std::vector<Index>{0, 2});
  Vector sign = t.sign_vector();
  CHECK(sign[0] == doctest::Approx(1.0));
  CHECK(sign[2] == doctest::Approx(-1.0));
  CHECK(sign[1] == doctest::Approx(0.0));

  Vector z(5);
  z << 0.3, -0.7, 0.9, 2.0, 0.1;
  Vector pz = t.project(z);
  CHECK(pz[0] == doctest::Approx(0.3));
  CHECK(pz[1] == doctest::Approx(0.0));
  CHECK((t.project(pz) - pz).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((t.project_off(z) + pz - z).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(t.off_model_norm(z) == doctest::Approx(2.0));

  Vector clipped = t.clip_off_model(z);
  CHECK(clipped[0] == doctest::Approx(0.3));  // support untouched
  CHECK(clipped[3] == doctest::Approx(1.0));
  CHECK(clipped[1] == doctest::Approx(-0.7));
  CHECK(t.off_model_norm(clipped) <= 1.0 + 1e-12);
}

TEST_CASE("nuclear tangent matches its kronecker projector") {
  Rng rng(601);
  const Index d = 3;
  Vector u(d), v(d);
  u << 1.0, 0.5, -0.3;
  v << 0.2, -1.0, 0.4;
  u.normalize();
  v.normalize();
  Matrix theta = 2.0 * u * v.transpose();
  ModelTangent t = ModelTangent::nuclear(theta);
  CHECK(!t.symmetric());
  CHECK(t.rows() == d);
  CHECK(t.cols() == d);

  Matrix uu = t.factor_u() * t.factor_u().transpose();
  Matrix vv = t.factor_v() * t.factor_v().transpose();
  Matrix eye = Matrix::Identity(d, d);
  Matrix p_formula = ifyot::kronecker(eye, uu) + ifyot::kronecker(vv, eye) -
                     ifyot::kronecker(vv, uu);
  Matrix p_dense = t.dense_projector();
  CHECK((p_dense - p_formula).cwiseAbs().maxCoeff() < 1e-12);

  const Matrix& basis = t.tangent_basis();
  CHECK((basis.transpose() * basis - Matrix::Identity(basis.cols(), basis.cols()))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((basis * basis.transpose() - p_dense).cwiseAbs().maxCoeff() < 1e-12);

  Matrix z(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) z(i, j) = rng.normal();
  Vector vz = Eigen::Map<const Vector>(z.data(), d * d);
  Matrix off = (eye - uu) * z * (eye - vv);
  Eigen::JacobiSVD<Matrix> svd(off);
  CHECK(t.off_model_norm(vz) ==
        doctest::Approx(svd.singularValues()[0]).epsilon(1e-10));

  Vector s = t.sign_vector();
  Matrix uvt = t.factor_u() * t.factor_v().transpose();
  CHECK((s - Eigen::Map<const Vector>(uvt.data(), d * d)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("symmetric nuclear tangents stay inside symmetric matrices") {
  const Index d = 3;
  Vector u(3);
  u << 1.0, -1.0, 0.5;
  u.normalize();
  Matrix theta = 1.5 * u * u.transpose();
  ModelTangent t = ModelTangent::nuclear(theta);
  CHECK(t.symmetric());
  const Matrix& basis = t.tangent_basis();
  for (Index c = 0; c < basis.cols(); ++c) {
    Matrix m = Eigen::Map<const Matrix>(basis.col(c).data(), d, d);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Matrix& off = t.off_basis();
  for (Index c = 0; c < off.cols(); ++c) {
    Matrix m = Eigen::Map<const Matrix>(off.col(c).data(), d, d);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("precertificate equals the dense solve and is scale invariant") {
  Rng rng(607);
  Vector theta(6);
  theta << 1.2, 0.0, -0.8, 0.0, 0.0, 0.6;
  ModelTangent t = ModelTangent::l1(theta);
  Matrix h = random_spd(rng, 6, 0.3);
  Certificate cert = ifyot::precertificate(h, t);
  Vector oracle_z = oracle::precertificate_kkt(h, t);
  CHECK((cert.z - oracle_z).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(cert.margin ==
        doctest::Approx(1.0 - t.off_model_norm(cert.z)).epsilon(1e-12));
  CHECK((t.project(cert.z) - t.project(t.sign_vector())).cwiseAbs().maxCoeff() <
        1e-9);

  Certificate scaled = ifyot::precertificate(3.0 * h, t);
  CHECK((scaled.z - cert.z).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("precertificate on a nuclear tangent matches the dense solve") {
  Matrix s(2, 2);
  s << 0.6, 0.1, 0.1, 0.4;
  Vector m(2);
  m << 0.3, -0.2;
  Matrix h = ifyot::gaussian_fy_hessian({ifyot::GaussianSpec{m, s}});
  Vector u(2);
  u << 1.0, 0.4;
  u.normalize();
  ModelTangent t = ModelTangent::nuclear(u * u.transpose());
  Certificate cert = ifyot::precertificate(h, t);
  Vector oracle_z = oracle::precertificate_kkt(h, t);
  CHECK((cert.z - oracle_z).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank deficient tangent blocks are reported") {
  Vector theta(4);
  theta << 1.0, 0.0, 0.0, -1.0;
  ModelTangent t = ModelTangent::l1(theta);
  Matrix h = Matrix::Zero(4, 4);
  h(1, 1) = 1.0;
  h(2, 2) = 1.0;  // zero on the support block
  CHECK_THROWS_AS(ifyot::precertificate(h, t), ifyot::RankDeficientTangent);
}

TEST_CASE("minimal norm certificate coincides with a nondegenerate precert") {
  Rng rng(613);
  Vector theta(5);
  theta << 2.0, 0.0, 0.0, -1.0, 0.0;
  ModelTangent t = ModelTangent::l1(theta);
  // Near-diagonal curvature keeps the precertificate inside the unit ball.
  Matrix h = Matrix::Identity(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j)
      if (i != j) h(i, j) = 0.05 * rng.normal();
  h = 0.5 * (h + h.transpose());
  Certificate pre = ifyot::precertificate(h, t);
  REQUIRE(pre.margin > 0.0);
  Certificate direct = ifyot::minimal_norm_certificate(h, t);
  CHECK((direct.z - pre.z).cwiseAbs().maxCoeff() < 1e-12);
  Certificate iterative = ifyot::minimal_norm_certificate(h, t, 1e-12, true);
  CHECK(iterative.kind == ifyot::CertificateKind::MinimalNorm);
  CHECK((iterative.z - pre.z).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("degenerate problems still admit a feasible minimal certificate") {
  Vector theta(3);
  theta << 1.0, 0.0, 0.0;
  ModelTangent t = ModelTangent::l1(theta);
  Matrix h(3, 3);
  h << 1.0, 1.6, 0.2, 1.6, 4.0, 0.0, 0.2, 0.0, 2.0;
  Certificate pre = ifyot::precertificate(h, t);
  REQUIRE(pre.margin < 0.0);  // off entry 1.6 on a unit diagonal
  Certificate min_cert = ifyot::minimal_norm_certificate(h, t, 1e-11);
  CHECK(t.off_model_norm(min_cert.z) <= 1.0 + 1e-8);
  CHECK(min_cert.z[0] == doctest::Approx(1.0).epsilon(1e-8));

  // Minimality against the plain sign vector, in the H^{-1} metric.
  Matrix hinv = h.inverse();
  Vector sign = t.sign_vector();
  CHECK(min_cert.z.dot(hinv * min_cert.z) <=
        sign.dot(hinv * sign) + 1e-8);
}

TEST_CASE("transport loss curvature matches finite differences") {
  Rng rng(617);
  Grids g = make_grids(rng, 4, 5);
  Vector theta_star(2);
  theta_star << 0.8, -0.5;
  const double eta = 0.4;

  SUBCASE("soft marginals") {
    PhiDivergence d1 = PhiDivergence::kl(1.0), d2 = PhiDivergence::kl(0.7);
    Matrix density = optimal_density(g, theta_star, eta, d1, d2);
    FyIuotLoss loss(g.basis, g.alpha, g.beta, density, eta, d1, d2);
    Vector at(2);
    at << 0.6, -0.3;
    Matrix h = ifyot::hessian_at(loss, at, 1e-12);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Matrix fd = oracle::fd_hessian(
        [&](const Vector& tv) {
          loss.solve_inner(tv, 1e-13);
          return loss.loss_and_grad(tv, nullptr);
        },
        at, 1e-4);
    CHECK((h - fd).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + h.cwiseAbs().maxCoeff()));
  }

  SUBCASE("balanced marginals through the gauge fixed system") {
    PhiDivergence d1 = PhiDivergence::balanced(), d2 = PhiDivergence::balanced();
    Matrix density = optimal_density(g, theta_star, eta, d1, d2);
    FyIuotLoss loss(g.basis, g.alpha, g.beta, density, eta, d1, d2);
    Vector at(2);
    at << 0.7, -0.4;
    Matrix h = ifyot::hessian_at(loss, at, 1e-12);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
    Matrix fd = oracle::fd_hessian(
        [&](const Vector& tv) {
          loss.solve_inner(tv, 1e-13);
          return loss.loss_and_grad(tv, nullptr);
        },
        at, 1e-4);
    CHECK((h - fd).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + h.cwiseAbs().maxCoeff()));
  }
}
