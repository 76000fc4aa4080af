#include <cmath>

#include "doctest.h"
#include "ifyot/fy_loss.h"
#include "ifyot/rng.h"
#include "oracles.h"

using ifyot::CostBasis;
using ifyot::CoupledSample;
using ifyot::DiscreteMeasure;
using ifyot::FyIuotLoss;
using ifyot::Index;
using ifyot::Matrix;
using ifyot::PhiDivergence;
using ifyot::QuadraticSharpenedInstance;
using ifyot::Rng;
using ifyot::Vector;

namespace {

struct Setting {
  DiscreteMeasure alpha;
  DiscreteMeasure beta;
  CostBasis basis;
  Vector theta_star;
};

// 1-D grids with a two-feature cost c = |x-y|^2 + theta1 x y + theta2 x^2 y.
Setting make_setting(Rng& rng, Index n, Index m) {
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
  Vector theta(2);
  theta << 0.8, -0.5;
  return Setting{DiscreteMeasure(pa, wa, 1.0), DiscreteMeasure(pb, wb, 1.0),
                 basis, theta};
}

Matrix optimal_density(const Setting& s, const Vector& theta, double eta,
                       const PhiDivergence& d1, const PhiDivergence& d2) {
  ifyot::BasisMatrices mats = ifyot::evaluate(s.basis, s.alpha, s.beta);
  ifyot::UotProblem prob{s.alpha, s.beta, mats.cost(theta), eta, d1, d2};
  ifyot::SinkhornOptions opts;
  opts.tol = 1e-13;
  opts.max_iter = 200000;
  ifyot::SinkhornResult res = ifyot::solve_sinkhorn(prob, opts);
  REQUIRE(res.status == ifyot::SinkhornStatus::Converged);
  return ifyot::primal_from_dual(prob, res.potentials).density;
}

}  // namespace

TEST_CASE("loss vanishes with zero gradient at the generating parameter") {
  Rng rng(211);
  Setting s = make_setting(rng, 5, 6);
  const double eta = 0.4;
  PhiDivergence d1 = PhiDivergence::kl(1.0), d2 = PhiDivergence::kl(1.0);
  Matrix density = optimal_density(s, s.theta_star, eta, d1, d2);
  FyIuotLoss loss(s.basis, s.alpha, s.beta, density, eta, d1, d2);
  Vector grad;
  double at_star = loss.loss_and_grad(s.theta_star, &grad);
  CHECK(std::abs(at_star) < 1e-8);
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-7);

  Vector away = s.theta_star;
  away[0] += 0.7;
  CHECK(loss.loss_and_grad(away, nullptr) > 1e-4);
}

TEST_CASE("loss is nonnegative and convex along segments") {
  Rng rng(223);
  Setting s = make_setting(rng, 4, 4);
  const double eta = 0.3;
  PhiDivergence d1 = PhiDivergence::kl(0.8), d2 = PhiDivergence::kl(1.3);
  Matrix density = optimal_density(s, s.theta_star, eta, d1, d2);
  FyIuotLoss loss(s.basis, s.alpha, s.beta, density, eta, d1, d2);
  for (int trial = 0; trial < 3; ++trial) {
    Vector a(2), b(2);
    a << rng.normal(), rng.normal();
    b << rng.normal(), rng.normal();
    double fa = loss.loss_and_grad(a, nullptr);
    double fb = loss.loss_and_grad(b, nullptr);
    CHECK(fa >= -1e-10);
    CHECK(fb >= -1e-10);
    for (double t : {0.25, 0.5, 0.75}) {
      Vector mid = (1.0 - t) * a + t * b;
      double fm = loss.loss_and_grad(mid, nullptr);
      CHECK(fm <= (1.0 - t) * fa + t * fb + 1e-8);
    }
  }
}

TEST_CASE("envelope gradient matches finite differences of the value") {
  Rng rng(227);
  Setting s = make_setting(rng, 4, 5);
  const double eta = 0.35;
  PhiDivergence d1 = PhiDivergence::kl(1.1), d2 = PhiDivergence::kl(0.9);
  Matrix density = optimal_density(s, s.theta_star, eta, d1, d2);
  FyIuotLoss loss(s.basis, s.alpha, s.beta, density, eta, d1, d2);
  Vector theta(2);
  theta << 0.2, 0.1;
  loss.solve_inner(theta, 1e-13);
  Vector grad;
  loss.loss_and_grad(theta, &grad);
  Vector fd = oracle::fd_gradient(
      [&](const Vector& t) {
        loss.solve_inner(t, 1e-13);
        Vector unused;
        return loss.loss_and_grad(t, &unused);
      },
      theta, 1e-5);
  CHECK((grad - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pairs on the grids expose the exact data offset") {
  Rng rng(229);
  const Index n = 4;
  Matrix pts(n, 1);
  for (Index i = 0; i < n; ++i) pts(i, 0) = 0.1 + 0.2 * static_cast<double>(i);
  Vector uniform = Vector::Constant(n, 1.0 / static_cast<double>(n));
  DiscreteMeasure alpha(pts, uniform, 1.0);
  Matrix ypts = pts.array() + 0.05;
  DiscreteMeasure beta(ypts, uniform, 1.0);
  CostBasis basis =
      CostBasis::generic(ifyot::make_squared_distance_feature(),
                         {ifyot::make_coordinate_product_feature(0, 0)});

  CoupledSample pairs{pts, ypts, 1.0};
  FyIuotLoss on_grid(basis, alpha, beta, pairs, 0.5, PhiDivergence::kl(1.0),
                     PhiDivergence::kl(1.0));
  CHECK(on_grid.offset_available());

  Matrix ypts_off = ypts;
  ypts_off(0, 0) += 1e-3;
  CoupledSample off_pairs{pts, ypts_off, 1.0};
  FyIuotLoss off_grid(basis, alpha, beta, off_pairs, 0.5,
                      PhiDivergence::kl(1.0), PhiDivergence::kl(1.0));
  CHECK(!off_grid.offset_available());

  // The data features are plain pair averages in both forms.
  double expected = 0.0;
  for (Index i = 0; i < n; ++i)
    expected += pts(i, 0) * ypts(i, 0) / static_cast<double>(n);
  CHECK(on_grid.data_features()[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("density and matching pairs data give the same gradient") {
  // A diagonal pairing density (scaled identity matches uniform grids).
  const Index n = 4;
  Matrix pts(n, 1);
  for (Index i = 0; i < n; ++i) pts(i, 0) = 0.15 * static_cast<double>(i);
  Vector uniform = Vector::Constant(n, 1.0 / static_cast<double>(n));
  DiscreteMeasure alpha(pts, uniform, 1.0);
  Matrix ypts = pts.array() * 0.9 + 0.02;
  DiscreteMeasure beta(ypts, uniform, 1.0);
  CostBasis basis =
      CostBasis::generic(ifyot::make_squared_distance_feature(),
                         {ifyot::make_coordinate_product_feature(0, 0)});
  const double eta = 0.6;
  PhiDivergence d1 = PhiDivergence::kl(1.0), d2 = PhiDivergence::kl(1.0);

  Matrix density = Matrix::Identity(n, n) * static_cast<double>(n);
  FyIuotLoss via_density(basis, alpha, beta, density, eta, d1, d2);
  CoupledSample pairs{pts, ypts, 1.0};
  FyIuotLoss via_pairs(basis, alpha, beta, pairs, eta, d1, d2);

  Vector theta(1);
  theta << 0.3;
  Vector g_density, g_pairs;
  via_density.loss_and_grad(theta, &g_density);
  via_pairs.loss_and_grad(theta, &g_pairs);
  CHECK((g_density - g_pairs).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((via_density.data_features() - via_pairs.data_features())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("quadratic sharpened loss closed form equals the max form") {
  Rng rng(233);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 2 + trial % 4;
    Matrix b(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) b(i, j) = rng.normal();
    QuadraticSharpenedInstance inst;
    inst.A = b * b.transpose() + 0.1 * Matrix::Identity(d, d);
    inst.r = 0.1 + 3.0 * rng.uniform01();
    inst.y_hat = Vector::NullaryExpr(d, [&](Index) { return rng.normal(); });
    inst.validate();
    Vector x = Vector::NullaryExpr(d, [&](Index) { return rng.normal(); });
    ifyot::QuadraticLossPair pair = ifyot::quadratic_sharpened_loss(inst, x);
    CHECK(std::abs(pair.max_form - pair.closed_form) <
          1e-10 * (1.0 + std::abs(pair.closed_form)));
    CHECK(pair.closed_form >= -1e-12);
  }
}

TEST_CASE("sharper losses never exceed weaker ones on shared data") {
  Rng rng(239);
  const Index d = 3;
  Matrix b(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) b(i, j) = rng.normal();
  QuadraticSharpenedInstance weaker;
  weaker.A = b * b.transpose() + 0.2 * Matrix::Identity(d, d);
  weaker.r = 0.5;
  weaker.y_hat = Vector::NullaryExpr(d, [&](Index) { return rng.normal(); });
  QuadraticSharpenedInstance sharper = weaker;
  sharper.r = 4.0;
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = Vector::NullaryExpr(d, [&](Index) { return rng.normal(); });
    CHECK(ifyot::sharpening_monotonicity_probe(weaker, sharper, x));
  }
  QuadraticSharpenedInstance other = sharper;
  other.y_hat[0] += 0.5;
  Vector x = Vector::Zero(d);
  CHECK_THROWS_AS(ifyot::sharpening_monotonicity_probe(weaker, other, x),
                  ifyot::InvalidInput);
}

TEST_CASE("function probe accepts dominated pairs and flags violations") {
  Vector f(1);
  f << 0.3;
  auto weak = [](const Vector& v) { return v[0] * v[0] + 1.0; };
  auto sharp = [](const Vector& v) { return v[0] * v[0]; };
  CHECK(ifyot::sharpening_monotonicity_probe(weak, sharp, f));
  CHECK(!ifyot::sharpening_monotonicity_probe(sharp, weak, f));
}
