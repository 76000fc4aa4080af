#include <cmath>

#include "doctest.h"
#include "ifyot/ijko.h"
#include "ifyot/rng.h"
#include "ifyot/solver.h"
#include "oracles.h"

using ifyot::Coupling;
using ifyot::DiscreteMeasure;
using ifyot::IjkoFyLoss;
using ifyot::IjkoInstance;
using ifyot::Index;
using ifyot::Matrix;
using ifyot::PotentialBasis;
using ifyot::QuadraticLossForm;
using ifyot::Rng;
using ifyot::Vector;

namespace {

DiscreteMeasure cloud(Rng& rng, Index n, Index d, double shift) {
  Matrix pts(n, d);
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) pts(i, k) = 0.4 * rng.normal() + shift;
    w[i] = 0.3 + rng.uniform01();
  }
  w /= w.sum();
  return DiscreteMeasure(pts, w, 1.0);
}

IjkoInstance make_instance(Rng& rng, Index n1, Index n0, Index d, double tau,
                           double eta, double r) {
  DiscreteMeasure ak1 = cloud(rng, n1, d, 0.0);
  DiscreteMeasure ak = cloud(rng, n0, d, 0.15);
  return IjkoInstance{ak, ak1, tau, eta, r,
                      PotentialBasis::symmetric_quadratic(static_cast<int>(d))};
}

}  // namespace

TEST_CASE("squared distance matrix holds pairwise squared norms") {
  Rng rng(401);
  Matrix y(3, 2), x(4, 2);
  for (Index i = 0; i < 3; ++i)
    for (Index k = 0; k < 2; ++k) y(i, k) = rng.normal();
  for (Index j = 0; j < 4; ++j)
    for (Index k = 0; k < 2; ++k) x(j, k) = rng.normal();
  Matrix d = ifyot::squared_distance_matrix(y, x);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j)
      CHECK(d(i, j) == doctest::Approx((y.row(i) - x.row(j)).squaredNorm())
                           .epsilon(1e-12));
  Matrix bad(2, 3);
  CHECK_THROWS_AS(ifyot::squared_distance_matrix(y, bad), ifyot::InvalidInput);
}

TEST_CASE("instance validation enforces probability snapshots") {
  Rng rng(403);
  IjkoInstance inst = make_instance(rng, 4, 4, 1, 0.5, 0.05, 3.0);
  CHECK_NOTHROW(inst.validate());
  CHECK(inst.r_prime() == doctest::Approx(3.0 - 0.1));

  IjkoInstance off_mass = inst;
  off_mass.alpha_k1 =
      DiscreteMeasure(inst.alpha_k1.points, 0.9 * inst.alpha_k1.weights, 0.9);
  CHECK_THROWS_AS(off_mass.validate(), ifyot::InvalidInput);

  IjkoInstance weak = inst;
  weak.r = 0.05;  // r' = 0.05 - 0.1 < 0
  CHECK_THROWS_AS(IjkoFyLoss{weak}, ifyot::InvalidInput);
}

TEST_CASE("step loss is a nonnegative gap and one shot matches the class") {
  Rng rng(409);
  IjkoInstance inst = make_instance(rng, 5, 4, 2, 0.4, 0.08, 5.0);
  Vector theta(3);
  theta << 0.4, -0.1, 0.3;
  IjkoFyLoss loss(inst);
  Vector grad_a, grad_b;
  double via_class = loss.loss_and_grad(theta, &grad_a);
  double via_free = ifyot::ijko_loss_and_grad(inst, theta, &grad_b);
  CHECK(via_class == doctest::Approx(via_free).epsilon(1e-9));
  CHECK((grad_a - grad_b).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(via_class >= -1e-10);
  CHECK(loss.dim() == 3);
}

TEST_CASE("semidual minimum is the reduction value up to a data constant") {
  Rng rng(419);
  IjkoInstance inst = make_instance(rng, 5, 4, 2, 0.4, 0.08, 5.0);
  const Index n1 = inst.alpha_k1.size();
  double first_diff = 0.0;
  for (int t = 0; t < 3; ++t) {
    Vector theta(3);
    theta << 0.3 + 0.2 * t, -0.1 * t, 0.25;
    Vector grad_red;
    double value_red = ifyot::ijko_loss_and_grad(inst, theta, &grad_red);

    ifyot::Objective semi = [&](const Vector& f, Vector* g) {
      Vector gf;
      double v = ifyot::ijko_semidual(inst, theta, f, nullptr, &gf);
      if (g) *g = gf;
      return v;
    };
    ifyot::MinimizeOptions mo;
    mo.tol = 1e-10;
    mo.max_iter = 3000;
    ifyot::SolveReport rep =
        ifyot::minimize_smooth(semi, Vector::Zero(n1), mo);
    double diff = rep.objective - value_red;
    if (t == 0)
      first_diff = diff;
    else
      CHECK(diff == doctest::Approx(first_diff).epsilon(1e-7));

    Vector grad_theta(3);
    ifyot::ijko_semidual(inst, theta, rep.theta_hat, &grad_theta, nullptr);
    CHECK((grad_theta - grad_red).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("semidual gradients match finite differences") {
  Rng rng(421);
  IjkoInstance inst = make_instance(rng, 4, 3, 2, 0.5, 0.1, 4.0);
  Vector theta(3), f(4);
  theta << 0.2, 0.1, -0.3;
  for (Index i = 0; i < 4; ++i) f[i] = 0.2 * rng.normal();
  Vector grad_theta, grad_f;
  ifyot::ijko_semidual(inst, theta, f, &grad_theta, &grad_f);
  Vector fd_theta = oracle::fd_gradient(
      [&](const Vector& t) {
        return ifyot::ijko_semidual(inst, t, f, nullptr, nullptr);
      },
      theta, 1e-6);
  Vector fd_f = oracle::fd_gradient(
      [&](const Vector& u) {
        return ifyot::ijko_semidual(inst, theta, u, nullptr, nullptr);
      },
      f, 1e-6);
  CHECK((grad_theta - fd_theta).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((grad_f - fd_f).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("quadratic entropic transport matches the two by two reduction") {
  Rng rng(431);
  Matrix ya(2, 1), xb(2, 1);
  ya << 0.1, 0.9;
  xb << 0.25, 0.65;
  Vector wa(2), wb(2);
  wa << 0.4, 0.6;
  wb << 0.7, 0.3;
  DiscreteMeasure a(ya, wa, 1.0), b(xb, wb, 1.0);
  for (double eta : {0.05, 0.2, 0.8}) {
    ifyot::QuadOtSolution sol =
        ifyot::quadratic_entropic_ot(a, b, eta, 1e-12, 200000);
    REQUIRE(sol.status == ifyot::SinkhornStatus::Converged);
    ifyot::UotProblem prob{a, b, ifyot::squared_distance_matrix(ya, xb), eta,
                           ifyot::PhiDivergence::balanced(),
                           ifyot::PhiDivergence::balanced()};
    CHECK(std::abs(sol.value - oracle::balanced_2x2_primal(prob)) < 1e-6);
  }
}

TEST_CASE("first order loss form agrees with its direct evaluation") {
  Rng rng(433);
  IjkoInstance inst = make_instance(rng, 5, 4, 2, 0.4, 0.05, 6.0);
  Coupling plan;
  plan.density = Matrix::Ones(5, 4);  // independent coupling, exact marginals
  plan.mass = 1.0;
  QuadraticLossForm form = ifyot::ijko_star_form(inst, plan);
  REQUIRE(form.dim() == 3);
  for (int t = 0; t < 4; ++t) {
    Vector theta(3);
    theta << rng.normal(), rng.normal(), rng.normal();
    Vector grad_direct;
    double direct = ifyot::ijko_star_loss(inst, theta, plan, &grad_direct);
    Vector grad_form;
    double via_form = form.value_and_grad(theta, &grad_form);
    CHECK(direct == doctest::Approx(via_form).epsilon(1e-10));
    CHECK((grad_direct - grad_form).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(direct >= -1e-12);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(form.G, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);

  Coupling corrupt = plan;
  corrupt.density *= 1.5;
  CHECK_THROWS_AS(ifyot::ijko_star_form(inst, corrupt), ifyot::InvalidInput);
}

TEST_CASE("variance limit form agrees with its direct evaluation") {
  Rng rng(439);
  IjkoInstance inst = make_instance(rng, 6, 5, 2, 0.4, 0.05, 6.0);
  Vector f(6);
  for (Index i = 0; i < 6; ++i) f[i] = 0.3 * rng.normal();
  QuadraticLossForm form = ifyot::variance_limit_form(inst, f);
  for (int t = 0; t < 4; ++t) {
    Vector theta(3);
    theta << rng.normal(), rng.normal(), rng.normal();
    Vector grad_direct, grad_form;
    double direct = ifyot::variance_limit_loss(inst, theta, f, &grad_direct);
    double via_form = form.value_and_grad(theta, &grad_form);
    CHECK(direct == doctest::Approx(via_form).epsilon(1e-10));
    CHECK((grad_direct - grad_form).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(direct >= -1e-12);
  }

  // Shift invariance in f, and exact zero when V_theta + f/tau is constant.
  Vector shifted = f.array() + 3.7;
  QuadraticLossForm form2 = ifyot::variance_limit_form(inst, shifted);
  Vector theta(3);
  theta << 0.3, -0.2, 0.5;
  CHECK(form.value(theta) == doctest::Approx(form2.value(theta)).epsilon(1e-9));

  Vector cancel(6);
  for (Index i = 0; i < 6; ++i)
    cancel[i] = -inst.tau * inst.basis.value(theta, inst.alpha_k1.point(i));
  QuadraticLossForm zero_form = ifyot::variance_limit_form(inst, cancel);
  CHECK(std::abs(zero_form.value(theta)) < 1e-12);
}

TEST_CASE("kl expansion probe approaches its quadratic expansion") {
  Rng rng(443);
  Vector q(5), g(5);
  for (Index i = 0; i < 5; ++i) {
    q[i] = 0.2 + rng.uniform01();
    g[i] = rng.normal();
  }
  auto at = [&](double t) {
    auto [kl, expansion] = ifyot::kl_expansion_probe(q, g, t);
    REQUIRE(expansion > 0.0);
    return kl / expansion;
  };
  CHECK(std::abs(at(1e-3) - 1.0) < 1e-3);
  CHECK(std::abs(at(1e-2) - 1.0) < 1e-1);
  CHECK(std::abs(at(1e-2) - 1.0) > std::abs(at(1e-3) - 1.0));
}

TEST_CASE("scaled sharpened gaps approach the variance limit") {
  Rng rng(449);
  IjkoInstance base = make_instance(rng, 6, 5, 1, 0.5, 0.05, 10.0);
  Vector theta(1);
  theta << 0.4;
  ifyot::QuadOtSolution ot = ifyot::quadratic_entropic_ot(
      base.alpha_k1, base.alpha_k, base.eta, 1e-12, 200000);
  REQUIRE(ot.status == ifyot::SinkhornStatus::Converged);
  double limit =
      ifyot::variance_limit_form(base, ot.potentials.f).value(theta);
  REQUIRE(limit > 0.0);

  double prev_err = ifyot::kInf;
  double final_err = 0.0;
  for (double r : {10.0, 100.0, 1000.0}) {
    IjkoInstance inst = base;
    inst.r = r;
    double gap = ifyot::ijko_sharpened_gap(inst, theta);
    CHECK(gap >= 0.0);
    double err = std::abs(r * gap - limit);
    CHECK(err < prev_err);
    prev_err = err;
    final_err = err;
  }
  CHECK(final_err / limit < 0.05);
}
