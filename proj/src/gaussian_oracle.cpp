#include "ifyot/gaussian_oracle.h"

#include <cmath>

#include "ifyot/cost_basis.h"

namespace ifyot {

void QuadraticPotentialTruth::validate() const {
  const Index d = m0.size();
  if (theta_star.rows() != d || theta_star.cols() != d ||
      sigma0.rows() != d || sigma0.cols() != d || d == 0)
    throw InvalidInput("truth: shapes disagree");
  if ((theta_star - theta_star.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidInput("truth: theta_star must be symmetric");
  GaussianSpec spec{m0, sigma0};
  spec.validate();
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<GaussianSpec> trajectory(const QuadraticPotentialTruth& truth,
                                     double tau, int steps) {
  truth.validate();
  if (steps < 1) throw InvalidInput("trajectory: steps must be >= 1");
  if (!(tau > 0.0)) throw InvalidInput("trajectory: tau must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> es(truth.theta_star);
  const Matrix& q = es.eigenvectors();
  const Vector& lam = es.eigenvalues();

  std::vector<GaussianSpec> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    double t = tau * k;
    Vector decay = (-2.0 * t * lam.array()).exp();
    Matrix e = q * decay.asDiagonal() * q.transpose();
    GaussianSpec spec;
    spec.mean = e * truth.m0;
    spec.covariance = e * truth.sigma0 * e;
    out.push_back(std::move(spec));
  }
  return out;
}

QuadraticKantorovich fit_quadratic_values(const DiscreteMeasure& alpha,
                                          const Vector& f) {
  alpha.validate();
  const Index n = alpha.size();
  const Index d = alpha.dim();
  if (f.size() != n) throw InvalidInput("fit: potential size mismatch");
  const Index packed = d * (d + 1) / 2;
  if (n < 10 * d * d)
    throw InvalidInput("fit: need at least 10 d^2 atoms");

  Matrix design(n, packed + d + 1);
  for (Index i = 0; i < n; ++i) {
    Vector x = alpha.point(i);
    Index k = 0;
    for (Index a = 0; a < d; ++a)
      for (Index b = a; b < d; ++b)
        design(i, k++) = a == b ? x[a] * x[a] : 2.0 * x[a] * x[b];
    design.block(i, packed, 1, d) = x.transpose();
    design(i, packed + d) = 1.0;
  }
  Vector coef = design.colPivHouseholderQr().solve(f);

  QuadraticKantorovich fit;
  fit.w = symmetric_embed(coef.head(packed));
  fit.b = coef.segment(packed, d);
  fit.constant = coef[packed + d];
  double rss = (design * coef - f).squaredNorm();
  double var = (f.array() - f.mean()).square().sum();
  fit.residual_fraction = var > 0.0 ? rss / var : (rss > 1e-18 ? kInf : 0.0);
  fit.poor_fit = fit.residual_fraction > 0.10;
  return fit;
}

QuadraticKantorovich fit_quadratic_potential(const DiscreteMeasure& alpha,
                                             const DiscreteMeasure& beta,
                                             double eta) {
  QuadOtSolution sol = quadratic_entropic_ot(alpha, beta, eta);
  if (sol.status != SinkhornStatus::Converged)
    throw InnerSolveDiverged(Vector(), sol.residual);
  return fit_quadratic_values(alpha, sol.potentials.f);
}

LimitingLosses limiting_losses(const GaussianSpec& alpha_k1,
                               const GaussianSpec& alpha_k,
                               const QuadraticKantorovich& kanto, double tau,
                               const Matrix& theta) {
  alpha_k1.validate();
  alpha_k.validate();
  if (!(tau > 0.0)) throw InvalidInput("limiting_losses: tau must be positive");
  const Index d = alpha_k1.dim();
  if (theta.rows() != d || theta.cols() != d || kanto.w.rows() != d ||
      kanto.b.size() != d)
    throw InvalidInput("limiting_losses: shapes disagree");

  Matrix a = theta + kanto.w / tau;
  Matrix a_sym = 0.5 * (a + a.transpose());
  Matrix root = psd_sqrt(alpha_k1.covariance);
  Vector lin = 2.0 * a_sym * alpha_k1.mean + kanto.b / tau;

  LimitingLosses out;
  out.fy_limit = 2.0 * (root * a_sym * root).squaredNorm() +
                 (root * lin).squaredNorm();
  out.ijko_star = 4.0 * (root * a_sym).squaredNorm() + lin.squaredNorm();
  return out;
}

}  // namespace ifyot
