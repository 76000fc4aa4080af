#include "ifyot/fy_loss.h"

#include <cmath>
#include <utility>

namespace ifyot {

namespace {

// Mass-ratio penalty phi(m_rho/m_base) * m_base with the indicator kinds
// judged to a 1e-9 relative tolerance (exact masses rarely compare equal in
// floating point).
double mass_ratio_penalty(const PhiDivergence& div, double m_rho,
                          double m_base) {
  const double ratio = m_rho / m_base;
  const double rel_tol = 1e-9;
  switch (div.kind()) {
    case DivKind::Balanced:
      return std::abs(m_rho - m_base) <= rel_tol * std::max(1.0, m_base)
                 ? 0.0
                 : kInf;
    case DivKind::RangeConstraint: {
      auto [a, b] = div.range();
      return (ratio >= a - rel_tol && ratio <= b + rel_tol) ? 0.0 : kInf;
    }
    default:
      return div.phi(ratio) * m_base;
  }
}

bool uniform_weights(const DiscreteMeasure& m) {
  const double w = m.mass / static_cast<double>(m.size());
  for (Index i = 0; i < m.size(); ++i)
    if (std::abs(m.weights[i] - w) > 1e-12 * std::max(1.0, w)) return false;
  return true;
}

}  // namespace

FyIuotLoss::FyIuotLoss(const CostBasis& basis, DiscreteMeasure alpha,
                       DiscreteMeasure beta, const Matrix& data_density,
                       double eta, PhiDivergence div1, PhiDivergence div2,
                       double marginal_tol)
    : alpha_(std::move(alpha)),
      beta_(std::move(beta)),
      eta_(eta),
      div1_(div1),
      div2_(div2) {
  init_matrices(basis);
  if (data_density.rows() != alpha_.size() ||
      data_density.cols() != beta_.size())
    throw InvalidInput("data density shape does not match the marginal grids");
  if (!all_finite(data_density) || (data_density.array() < 0.0).any())
    throw InvalidInput("data density must be finite and nonnegative");

  const Vector& aw = alpha_.weights;
  const Vector& bw = beta_.weights;
  data_features_.resize(matrices_.size());
  Coupling data{data_density, aw.transpose() * data_density * bw};
  UotProblem zero_cost{alpha_, beta_, Matrix::Zero(alpha_.size(), beta_.size()),
                       eta_, div1_, div2_};
  data_phi0_ = test_integral(data, zero_cost, matrices_.Phi0);
  for (Index s = 0; s < matrices_.size(); ++s)
    data_features_[s] = test_integral(data, zero_cost, matrices_.Phi[s]);
  // Omega(pi_hat) is the primal objective at zero cost.
  data_offset_ = primal_objective(zero_cost, data, marginal_tol);
  offset_available_ = true;
}

FyIuotLoss::FyIuotLoss(const CostBasis& basis, DiscreteMeasure alpha,
                       DiscreteMeasure beta, const CoupledSample& pairs,
                       double eta, PhiDivergence div1, PhiDivergence div2)
    : alpha_(std::move(alpha)),
      beta_(std::move(beta)),
      eta_(eta),
      div1_(div1),
      div2_(div2) {
  init_matrices(basis);
  pairs.validate();
  const Index n = pairs.size();
  const double atom = pairs.mass / static_cast<double>(n);

  data_features_.setZero(matrices_.size());
  data_phi0_ = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector x = pairs.x.row(i).transpose();
    const Vector y = pairs.y.row(i).transpose();
    if (!basis.phi0().eval)
      throw InvalidInput("pairs-form data requires evaluable features");
    data_phi0_ += basis.phi0().eval(x, y) * atom;
    for (Index s = 0; s < matrices_.size(); ++s) {
      const Feature& f = basis.phis()[static_cast<size_t>(s)];
      if (!f.eval)
        throw InvalidInput("pairs-form data requires evaluable features");
      data_features_[s] += f.eval(x, y) * atom;
    }
  }

  // Closed-form Omega(pi_hat) when the pairs are exactly the grid atoms in
  // order with uniform weights: the coupling is then the diagonal of the
  // product grid, with density n*m_pi/(m_alpha*m_beta) on the diagonal.
  const bool aligned = alpha_.size() == n && beta_.size() == n &&
                       alpha_.points == pairs.x && beta_.points == pairs.y &&
                       uniform_weights(alpha_) && uniform_weights(beta_);
  if (aligned) {
    const double mp = pairs.mass;
    const double ma = alpha_.mass;
    const double mb = beta_.mass;
    double offset = mass_ratio_penalty(div1_, mp, ma) +
                    mass_ratio_penalty(div2_, mp, mb);
    const double p = static_cast<double>(n) * mp / (ma * mb);
    offset += eta_ * (mp * (std::log(p) - 1.0) + ma * mb);
    data_offset_ = offset;
    offset_available_ = std::isfinite(offset);
    if (!offset_available_) data_offset_ = 0.0;
  } else {
    data_offset_ = 0.0;
    offset_available_ = false;
  }
}

void FyIuotLoss::init_matrices(const CostBasis& basis) {
  alpha_.validate();
  beta_.validate();
  if (!(eta_ > 0.0) || !std::isfinite(eta_))
    throw InvalidInput("eta must be positive and finite");
  matrices_ = evaluate(basis, alpha_, beta_);
}

UotProblem FyIuotLoss::problem_at(const Vector& theta) const {
  if (theta.size() != matrices_.size())
    throw InvalidInput("theta length does not match the basis");
  if (!theta.allFinite()) throw InvalidInput("theta must be finite");
  return UotProblem{alpha_, beta_, matrices_.cost(theta), eta_, div1_, div2_};
}

double FyIuotLoss::inner_tolerance() const {
  return std::min(1e-9, 1e-3 * last_grad_norm_);
}

void FyIuotLoss::set_inner_max_iter(int budget) {
  if (budget < 1) throw InvalidInput("inner iteration budget must be positive");
  inner_max_iter_ = budget;
}

SinkhornResult FyIuotLoss::solve_inner(const Vector& theta, double tol) {
  UotProblem prob = problem_at(theta);
  SinkhornOptions opts;
  opts.tol = tol > 0.0 ? tol : inner_tolerance();
  opts.max_iter = inner_max_iter_;
  opts.warm = has_warm_ ? &warm_ : nullptr;
  SinkhornResult res = solve_sinkhorn(prob, opts);
  if (res.status == SinkhornStatus::Converged) {
    warm_ = res.potentials;
    has_warm_ = true;
  }
  return res;
}

double FyIuotLoss::loss_and_grad(const Vector& theta, Vector* grad) {
  UotProblem prob = problem_at(theta);
  SinkhornOptions opts;
  opts.tol = inner_tolerance();
  opts.max_iter = inner_max_iter_;
  opts.warm = has_warm_ ? &warm_ : nullptr;
  SinkhornResult res = solve_sinkhorn(prob, opts);
  if (res.status != SinkhornStatus::Converged)
    throw InnerSolveDiverged(theta, res.residual);
  warm_ = res.potentials;
  has_warm_ = true;

  const double min_k = dual_objective(prob, res.potentials);
  double value = data_offset_ + data_phi0_ + theta.dot(data_features_) +
                 min_k - eta_ * alpha_.mass * beta_.mass;

  if (grad) {
    Coupling pi = primal_from_dual(prob, res.potentials);
    grad->resize(matrices_.size());
    for (Index s = 0; s < matrices_.size(); ++s)
      (*grad)[s] =
          data_features_[s] - test_integral(pi, prob, matrices_.Phi[s]);
    last_grad_norm_ = grad->norm();
  }
  return value;
}

void QuadraticSharpenedInstance::validate() const {
  if (A.rows() != A.cols() || A.rows() != y_hat.size())
    throw InvalidInput("quadratic instance shapes are inconsistent");
  if (!all_finite(A) || !y_hat.allFinite())
    throw InvalidInput("quadratic instance must be finite");
  if (!A.isApprox(A.transpose(), 1e-12))
    throw InvalidInput("A must be symmetric");
  if (r < 0.0) throw InvalidInput("sharpening weight r must be nonnegative");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw InvalidInput("A must be positive definite");
}

QuadraticLossPair quadratic_sharpened_loss(
    const QuadraticSharpenedInstance& inst, const Vector& x) {
  inst.validate();
  if (x.size() != inst.y_hat.size())
    throw InvalidInput("argument size does not match the instance");
  const Index d = x.size();
  const Matrix B = inst.A + inst.r * Matrix::Identity(d, d);

  QuadraticLossPair out;
  {
    // Inner maximization: Lambda*(x) attained at y* with B y* = x + r y_hat.
    Vector y_star = B.ldlt().solve(x + inst.r * inst.y_hat);
    double lambda_at_ystar =
        0.5 * y_star.dot(inst.A * y_star) +
        0.5 * inst.r * (y_star - inst.y_hat).squaredNorm();
    double conj = x.dot(y_star) - lambda_at_ystar;
    double lambda_at_yhat = 0.5 * inst.y_hat.dot(inst.A * inst.y_hat);
    out.max_form = lambda_at_yhat + conj - x.dot(inst.y_hat);
  }
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(B);
    Vector lam = eig.eigenvalues();
    Matrix U = eig.eigenvectors();
    Matrix b_half =
        U * lam.array().sqrt().matrix().asDiagonal() * U.transpose();
    Matrix b_inv_half =
        U * lam.array().rsqrt().matrix().asDiagonal() * U.transpose();
    Vector v = b_inv_half * (x + inst.r * inst.y_hat) - b_half * inst.y_hat;
    out.closed_form = 0.5 * v.squaredNorm();
  }
  return out;
}

bool sharpening_monotonicity_probe(
    const std::function<double(const Vector&)>& weaker,
    const std::function<double(const Vector&)>& sharper, const Vector& f,
    double tol) {
  return weaker(f) >= sharper(f) - tol;
}

bool sharpening_monotonicity_probe(const QuadraticSharpenedInstance& weaker,
                                   const QuadraticSharpenedInstance& sharper,
                                   const Vector& x) {
  if (weaker.A != sharper.A || weaker.y_hat != sharper.y_hat)
    throw InvalidInput("monotonicity probe requires shared A and y_hat");
  if (weaker.r > sharper.r)
    throw InvalidInput("weaker instance must have the smaller sharpening");
  return quadratic_sharpened_loss(weaker, x).closed_form >=
         quadratic_sharpened_loss(sharper, x).closed_form - 1e-9;
}

}  // namespace ifyot
