#include <cmath>

#include "doctest.h"
#include "ifyot/rng.h"
#include "ifyot/solver.h"
#include "oracles.h"

using ifyot::Index;
using ifyot::Matrix;
using ifyot::MinimizeOptions;
using ifyot::Objective;
using ifyot::Regularizer;
using ifyot::RegularizedOptions;
using ifyot::RegKind;
using ifyot::Rng;
using ifyot::SolveReport;
using ifyot::Vector;

namespace {

Objective quadratic_objective(const Matrix& a, const Vector& b) {
  return [a, b](const Vector& x, Vector* grad) {
    Vector ax = a * x;
    if (grad) *grad = ax - b;
    return 0.5 * x.dot(ax) - b.dot(x);
  };
}

}  // namespace

TEST_CASE("smooth minimizer solves strongly convex quadratics") {
  Rng rng(311);
  for (Index d : {Index(2), Index(6), Index(12)}) {
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) m(i, j) = rng.normal();
    Matrix a = m * m.transpose() + Matrix::Identity(d, d);
    Vector b(d);
    for (Index i = 0; i < d; ++i) b[i] = rng.normal();
    MinimizeOptions opts;
    opts.tol = 1e-10;
    SolveReport rep =
        ifyot::minimize_smooth(quadratic_objective(a, b), Vector::Zero(d), opts);
    CHECK(rep.converged);
    CHECK(rep.grad_norm <= 1e-10);
    Vector exact = a.ldlt().solve(b);
    CHECK((rep.theta_hat - exact).norm() < 1e-8 * (1.0 + exact.norm()));
  }
}

TEST_CASE("smooth minimizer handles the banana valley") {
  Objective rosenbrock = [](const Vector& x, Vector* grad) {
    double a = 1.0 - x[0];
    double b = x[1] - x[0] * x[0];
    if (grad) {
      (*grad)[0] = -2.0 * a - 400.0 * x[0] * b;
      (*grad)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  Vector x0(2);
  x0 << -1.2, 1.0;
  MinimizeOptions opts;
  opts.tol = 1e-9;
  opts.max_iter = 5000;
  SolveReport rep = ifyot::minimize_smooth(rosenbrock, x0, opts);
  CHECK(rep.converged);
  CHECK(std::abs(rep.theta_hat[0] - 1.0) < 1e-6);
  CHECK(std::abs(rep.theta_hat[1] - 1.0) < 1e-6);
}

TEST_CASE("non finite trial points shrink the step instead of throwing") {
  // Finite inside the unit ball, +inf outside; minimum at an interior point.
  Objective walled = [](const Vector& x, Vector* grad) {
    if (x.norm() >= 1.0) {
      if (grad) grad->setZero(x.size());
      return ifyot::kInf;
    }
    Vector target(2);
    target << 0.4, -0.3;
    if (grad) *grad = 2.0 * (x - target);
    return (x - target).squaredNorm();
  };
  SolveReport rep = ifyot::minimize_smooth(walled, Vector::Zero(2));
  CHECK(rep.converged);
  CHECK(std::abs(rep.theta_hat[0] - 0.4) < 1e-6);
  CHECK(std::abs(rep.theta_hat[1] + 0.3) < 1e-6);
}

TEST_CASE("iteration budget of one reports not converged") {
  Rng rng(313);
  Matrix a = Matrix::Identity(3, 3);
  Vector b(3);
  for (Index i = 0; i < 3; ++i) b[i] = 1.0 + rng.uniform01();
  MinimizeOptions opts;
  opts.max_iter = 1;
  SolveReport rep =
      ifyot::minimize_smooth(quadratic_objective(a, b), Vector::Zero(3), opts);
  CHECK(!rep.converged);
  CHECK(rep.iterations <= 1);
}

TEST_CASE("reparameterized penalties match the proximal solution") {
  // min 1/2 |theta - y|^2 + lambda R(theta) has the shrinkage closed form.
  Rng rng(317);
  const Index d = 6;
  Vector y(d);
  for (Index i = 0; i < d; ++i) y[i] = 2.0 * rng.normal();
  Objective smooth = [y](const Vector& x, Vector* grad) {
    if (grad) *grad = x - y;
    return 0.5 * (x - y).squaredNorm();
  };
  const double lambda = 0.7;
  RegularizedOptions opts;
  opts.inner.tol = 1e-12;
  opts.inner.max_iter = 5000;
  opts.seed = 5;

  SUBCASE("entrywise shrinkage") {
    Regularizer reg{RegKind::L1, lambda, 0, 0};
    SolveReport rep = ifyot::solve_regularized(smooth, d, reg, nullptr, opts);
    Vector exact = oracle::prox_penalty(y, lambda, oracle::PenKind::L1, 0, 0);
    CHECK((rep.theta_hat - exact).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("nonnegative shrinkage") {
    Regularizer reg{RegKind::NonnegativeL1, lambda, 0, 0};
    SolveReport rep = ifyot::solve_regularized(smooth, d, reg, nullptr, opts);
    Vector exact =
        oracle::prox_penalty(y, lambda, oracle::PenKind::NonnegL1, 0, 0);
    CHECK((rep.theta_hat - exact).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(rep.theta_hat.minCoeff() >= -1e-12);
  }
}

TEST_CASE("nuclear reparameterization matches singular value shrinkage") {
  Rng rng(331);
  const Index r = 3, c = 2;
  Vector y(r * c);
  for (Index i = 0; i < r * c; ++i) y[i] = 1.5 * rng.normal();
  Objective smooth = [y](const Vector& x, Vector* grad) {
    if (grad) *grad = x - y;
    return 0.5 * (x - y).squaredNorm();
  };
  const double lambda = 0.4;
  Regularizer reg{RegKind::Nuclear, lambda, r, c};
  RegularizedOptions opts;
  opts.inner.tol = 1e-12;
  opts.inner.max_iter = 8000;
  opts.seed = 9;
  SolveReport rep = ifyot::solve_regularized(smooth, r * c, reg, nullptr, opts);
  Vector exact =
      oracle::prox_penalty(y, lambda, oracle::PenKind::Nuclear, r, c);
  CHECK((rep.theta_hat - exact).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(rep.factor_x.rows() == r);
  CHECK(rep.factor_y.cols() == c);
  Matrix composed = rep.factor_x * rep.factor_y;
  CHECK((Eigen::Map<const Matrix>(rep.theta_hat.data(), r, c) - composed)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("penalized quadratic agrees with plain proximal gradient") {
  Rng rng(337);
  const Index d = 5;
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  Matrix a = m * m.transpose() / static_cast<double>(d) +
             0.5 * Matrix::Identity(d, d);
  Vector b(d);
  for (Index i = 0; i < d; ++i) b[i] = rng.normal();
  Objective smooth = quadratic_objective(a, b);
  const double lambda = 0.15;
  const double lipschitz =
      Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().maxCoeff();

  Vector ista = oracle::ista_reference(smooth, Vector::Zero(d), lipschitz,
                                       lambda, oracle::PenKind::L1, 0, 0);
  Regularizer reg{RegKind::L1, lambda, 0, 0};
  RegularizedOptions opts;
  opts.inner.tol = 1e-12;
  opts.inner.max_iter = 8000;
  opts.seed = 21;
  SolveReport rep = ifyot::solve_regularized(smooth, d, reg, nullptr, opts);
  CHECK((rep.theta_hat - ista).cwiseAbs().maxCoeff() < 2e-5);

  // Objective parity: composed value uses the true l1 penalty.
  double ista_obj = smooth(ista, nullptr) + lambda * ista.lpNorm<1>();
  CHECK(rep.objective <= ista_obj + 1e-7);
}

TEST_CASE("regularizer values and validation") {
  Vector theta(4);
  theta << 1.0, -2.0, 0.0, 0.5;
  Regularizer l1{RegKind::L1, 2.0, 0, 0};
  CHECK(l1.value(theta) == doctest::Approx(7.0));
  Regularizer none{RegKind::None, 2.0, 0, 0};
  CHECK(none.value(theta) == doctest::Approx(0.0));
  Regularizer nuc{RegKind::Nuclear, 1.0, 2, 2};
  CHECK_NOTHROW(nuc.validate(4));
  Regularizer bad{RegKind::Nuclear, 1.0, 2, 3};
  CHECK_THROWS_AS(bad.validate(4), ifyot::InvalidInput);
  Regularizer nonneg{RegKind::NonnegativeL1, 1.5, 0, 0};
  Vector pos(2);
  pos << 1.0, 2.0;
  CHECK(nonneg.value(pos) == doctest::Approx(4.5));
}

TEST_CASE("support and rank read off thresholded structure") {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 2) = 0.5;
  m(2, 1) = 0.5;
  ifyot::ModelDescriptor desc = ifyot::support_and_rank(m);
  CHECK(desc.rank_defined);
  CHECK(desc.rank == 3);  // eigenvalues 1, 0.5, -0.5
  CHECK(desc.support.size() == 3);

  Vector packed(6);  // upper triangle of a 3x3, row-major
  packed << 1.0, 0.0, 0.0, 1e-7, 0.0, 2.0;
  ifyot::ModelDescriptor vdesc = ifyot::support_and_rank(packed);
  CHECK(vdesc.rank_defined);
  CHECK(vdesc.support == std::vector<Index>{0, 5});
  CHECK(vdesc.rank == 2);

  Vector odd(5);  // neither triangular nor square
  odd.setZero();
  odd[2] = 3.0;
  ifyot::ModelDescriptor odesc = ifyot::support_and_rank(odd);
  CHECK(!odesc.rank_defined);
  CHECK(odesc.support == std::vector<Index>{2});
}
